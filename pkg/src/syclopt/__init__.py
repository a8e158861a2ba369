"""Multi-level IR toolkit for SYCL-style host and device code.

The package provides an SSA IR with nested regions, a dialect catalog,
dataflow analyses (alias, reaching definitions, uniformity, affine memory
access), device transformations, host raising with host-to-device constant
propagation, and a deterministic ND-range interpreter.
"""

from .ir import ModuleIR, parse_module, print_module, verify_module

__version__ = "0.1.0"

__all__ = ["ModuleIR", "parse_module", "print_module", "verify_module"]
