"""Device transformations: canonicalization, LICM, reduction detection and
loop internalization."""

from .canonicalize import canonicalize, canonicalize_function
from .internalize import TilingPlan, loop_internalize, loop_internalize_function
from .licm import licm, licm_function
from .reduction import detect_reduction, detect_reduction_function
from .report import ChangeReport

__all__ = [
    "ChangeReport",
    "canonicalize",
    "canonicalize_function",
    "licm",
    "licm_function",
    "detect_reduction",
    "detect_reduction_function",
    "loop_internalize",
    "loop_internalize_function",
    "TilingPlan",
]
