"""Alias analysis aware of SYCL accessor subscripting.

Rules are tried in order; the first that applies decides:

1. identical values                                  -> MustAlias
2. results of two distinct allocations               -> NoAlias
3. an allocation result vs a function argument       -> NoAlias
4. subscripts whose base accessors are NoAlias       -> NoAlias
5. subscripts with MustAlias bases and identical
   constant ids                                      -> MustAlias
6. refs in different memory spaces                   -> NoAlias

Anything else is MayAlias.
"""

from __future__ import annotations

import enum
from typing import Optional

from ..dialects import ALLOC, effects_of
from ..ir.core import Operation, Value
from ..ir.types import RefType


class AliasResult(enum.Enum):
    NoAlias = "NoAlias"
    MayAlias = "MayAlias"
    MustAlias = "MustAlias"

    def __str__(self) -> str:
        return self.value


class AliasError(ValueError):
    pass


def _alloc_op(v: Value) -> Optional[Operation]:
    d = v.defining_op
    if d is not None and any(e.kind == ALLOC for e in effects_of(d)):
        return d
    return None


def _is_function_arg(v: Value) -> bool:
    if not v.is_block_arg:
        return False
    owner = v.owner.parent_op
    return owner is not None and owner.name == "func.func"


def _subscript(v: Value) -> Optional[Operation]:
    d = v.defining_op
    return d if d is not None and d.name == "sycl.accessor.subscript" else None


def constant_value(v: Value):
    d = v.defining_op
    if d is not None and d.name in ("arith.constant", "llv.constant"):
        return d.attributes.get("value")
    if d is not None and d.name == "arith.index_cast":
        return constant_value(d.operands[0])
    return None


def constant_id(id_ref: Value) -> Optional[tuple]:
    """Index tuple of an id that is written exactly once, by a constant constructor."""
    writers = [op for op, i in id_ref.uses if op.name == "sycl.constructor" and i == 0]
    others = [op for op, _ in id_ref.uses if op.name not in ("sycl.constructor", "sycl.accessor.subscript", "sycl.id.get")]
    if len(writers) != 1 or others:
        return None
    vals = tuple(constant_value(v) for v in writers[0].operands[1:])
    if any(x is None for x in vals):
        return None
    return vals


def alias(a: Value, b: Value) -> AliasResult:
    """Classify the relationship between the memory referenced by ``a`` and ``b``."""
    for v in (a, b):
        if not isinstance(v.type, RefType):
            raise AliasError(f"alias query on non-ref value of type {v.type}")
    return _alias(a, b)[0]


def alias_with_rule(a: Value, b: Value) -> tuple[AliasResult, int]:
    """Like :func:`alias` but also returns the deciding rule (0 for the default)."""
    for v in (a, b):
        if not isinstance(v.type, RefType):
            raise AliasError(f"alias query on non-ref value of type {v.type}")
    return _alias(a, b)


def _alias(a: Value, b: Value) -> tuple[AliasResult, int]:
    if a is b:
        return AliasResult.MustAlias, 1
    alloc_a, alloc_b = _alloc_op(a), _alloc_op(b)
    if alloc_a is not None and alloc_b is not None and alloc_a is not alloc_b:
        return AliasResult.NoAlias, 2
    if (alloc_a is not None and _is_function_arg(b)) or (alloc_b is not None and _is_function_arg(a)):
        return AliasResult.NoAlias, 3
    sa, sb = _subscript(a), _subscript(b)
    if sa is not None and sb is not None:
        base = _alias(sa.operands[0], sb.operands[0])[0]
        if base is AliasResult.NoAlias:
            return AliasResult.NoAlias, 4
        if base is AliasResult.MustAlias:
            ia, ib = sa.operands[1], sb.operands[1]
            ca, cb = constant_id(ia), constant_id(ib)
            if ca is not None and ca == cb:
                return AliasResult.MustAlias, 5
    if a.type.space != b.type.space:
        return AliasResult.NoAlias, 6
    return AliasResult.MayAlias, 0


def ref_values(func: Operation) -> list[Value]:
    """Ref-typed values of ``func`` in definition order (arguments first)."""
    out = [a for a in func.arguments if isinstance(a.type, RefType)]
    for op in func.walk():
        if op is func:
            continue
        out.extend(r for r in op.results if isinstance(r.type, RefType))
        for r in op.regions:
            for blk in r.blocks:
                out.extend(x for x in blk.args if isinstance(x.type, RefType))
    return out
