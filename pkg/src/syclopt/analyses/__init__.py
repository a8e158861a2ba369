"""Static analyses: alias, reaching definitions, uniformity and memory access."""

from .alias import AliasError, AliasResult, alias
from .memaccess import (
    AccessClassification,
    AffineAccess,
    BasisVar,
    NotAffine,
    Placement,
    classify_access,
    extract_access,
)
from .reachdef import DefSet, DefSetLattice, ReachingDefs, reaching_defs
from .uniformity import Uniformity, UniformityLattice, UniformityResult, compute_uniformity

__all__ = [
    "AliasError",
    "AliasResult",
    "alias",
    "AccessClassification",
    "AffineAccess",
    "BasisVar",
    "NotAffine",
    "Placement",
    "classify_access",
    "extract_access",
    "DefSet",
    "DefSetLattice",
    "ReachingDefs",
    "reaching_defs",
    "Uniformity",
    "UniformityLattice",
    "UniformityResult",
    "compute_uniformity",
]
