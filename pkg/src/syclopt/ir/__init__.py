"""Core IR: types, SSA data model, textual format and verifier."""

from .core import (
    Block,
    Diagnostic,
    IRError,
    Location,
    ModuleIR,
    Operation,
    Region,
    Symbol,
    Value,
    clone_op,
    clone_region,
    defined_outside,
    detach,
    dominates,
    enclosing_function,
    erase_op,
    in_device_module,
    insert_after,
    insert_before,
    move_before,
    replace_all_uses,
    structurally_equal,
)
from .parser import ParseError, parse_module, parse_type
from .printer import function_namer, print_module, print_op
from .types import (
    F32,
    F64,
    I1,
    I32,
    I64,
    INDEX,
    FloatType,
    IndexType,
    IntType,
    InvalidType,
    RefType,
    SyclType,
)
from .verifier import verify_module

__all__ = [name for name in dir() if not name.startswith("_")]
