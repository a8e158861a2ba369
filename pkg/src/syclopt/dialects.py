"""Operation catalog for the ``arith``, ``func``, ``loop``, ``mem``, ``sycl``,
``sycl.host`` and ``llv`` dialects.

Each registered op has an :class:`OpSpec` carrying its arity, memory effects,
markers and a verifier hook. The catalog is built once at import time and is
read-only afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .ir.core import Operation, Symbol, Value
from .ir.types import (
    I1,
    INDEX,
    FloatType,
    IndexType,
    IntType,
    RefType,
    SyclType,
    is_integer_like,
    is_scalar,
    sycl_elem,
)

READ = "Read"
WRITE = "Write"
ALLOC = "Alloc"
FREE = "Free"
BARRIER = "Barrier"
UNKNOWN = "Unknown"

NON_UNIFORM_SOURCE = "NonUniformSource"

# Callee names of the synthetic low-level host ABI.
ABI_BUFFER_CTOR = "sycl_buffer_ctor"
ABI_ACCESSOR_CTOR = "sycl_accessor_ctor"
ABI_ACCESSOR_CTOR_RANGED = "sycl_accessor_ctor_ranged"
ABI_SCHEDULE_KERNEL = "sycl_schedule_kernel"
ABI_SYMBOLS = (ABI_BUFFER_CTOR, ABI_ACCESSOR_CTOR, ABI_ACCESSOR_CTOR_RANGED, ABI_SCHEDULE_KERNEL)

CMP_PREDICATES = ("eq", "ne", "slt", "sle", "sgt", "sge")


class CatalogError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class MemoryEffect:
    """One memory effect of an operation.

    ``subject`` is the operand index the effect applies to (None when the
    effect is op-global). ``value`` is the affected SSA value; for region ops
    it is the nested value and ``source`` the nested op producing the effect.
    """

    kind: str
    subject: Optional[int] = None
    value: Optional[Value] = None
    source: Optional[Operation] = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, MemoryEffect):
            return NotImplemented
        return (self.kind, self.subject, self.value, self.source) == (
            other.kind,
            other.subject,
            other.value,
            other.source,
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.subject, id(self.value), id(self.source)))

    def __repr__(self) -> str:
        return f"{self.kind}({'' if self.subject is None else self.subject})"


Verifier = Callable[[Operation], list]


@dataclass
class OpSpec:
    name: str
    operands: tuple = (0, 0)  # (min, max); max None = variadic
    results: tuple = (0, 0)
    regions: tuple = (0, 0)
    effects: object = ()  # tuple of (kind, subject) or callable(op) -> list[MemoryEffect]
    markers: frozenset = frozenset()
    context: str = "any"  # any | device | host
    verify: Optional[Verifier] = None
    terminator: bool = False
    attrs: tuple = ()  # required attribute keys
    pure: bool = field(init=False, default=False)

    def __post_init__(self) -> None:
        self.pure = self.effects == () and self.regions == (0, 0)


_CATALOG: dict[str, OpSpec] = {}


def _register(spec: OpSpec) -> None:
    if spec.name in _CATALOG:
        raise CatalogError(f"duplicate registration of '{spec.name}'")
    _CATALOG[spec.name] = spec


def lookup(name: str) -> OpSpec:
    try:
        return _CATALOG[name]
    except KeyError:
        raise CatalogError(f"unknown operation '{name}'") from None


def is_registered(name: str) -> bool:
    return name in _CATALOG


def catalog() -> dict[str, OpSpec]:
    return dict(_CATALOG)


# -- verifier helpers ----------------------------------------------------------


def _same_types(pred) -> Verifier:
    def check(op: Operation) -> list:
        ts = [v.type for v in op.operands] + [r.type for r in op.results]
        if len(set(ts)) != 1:
            return [f"{op.name} requires identical operand and result types"]
        if not pred(ts[0]):
            return [f"{op.name} has invalid type {ts[0]}"]
        return []

    return check


def _verify_constant(op: Operation) -> list:
    if "value" not in op.attributes:
        return ["arith.constant requires a 'value' attribute"]
    t, v = op.result.type, op.attributes["value"]
    if isinstance(t, FloatType):
        ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    elif t == I1:
        ok = isinstance(v, bool) or v in (0, 1)
    elif is_integer_like(t):
        ok = isinstance(v, int) and not isinstance(v, bool)
    else:
        ok = False
    return [] if ok else [f"constant value {v!r} does not match type {t}"]


def _verify_cmpi(op: Operation) -> list:
    errs = []
    a, b = op.operands
    if a.type != b.type or not is_integer_like(a.type):
        errs.append("arith.cmpi operands must be the same integer type")
    if op.result.type != I1:
        errs.append("arith.cmpi result must be i1")
    if op.attributes.get("pred") not in CMP_PREDICATES:
        errs.append(f"arith.cmpi has invalid predicate {op.attributes.get('pred')!r}")
    return errs


def _verify_index_cast(op: Operation) -> list:
    if not (is_integer_like(op.operands[0].type) and is_integer_like(op.result.type)):
        return ["arith.index_cast converts between integer types"]
    return []


def _verify_load(op: Operation) -> list:
    ref = op.operands[0].type
    if not isinstance(ref, RefType):
        return [f"{op.name} expects a ref operand"]
    idx = op.operands[1:]
    errs = []
    if len(idx) != ref.rank:
        errs.append(f"{op.name} expects {ref.rank} indices, got {len(idx)}")
    if any(not isinstance(i.type, IndexType) for i in idx):
        errs.append(f"{op.name} indices must be index-typed")
    if op.result.type != ref.elem:
        errs.append(f"{op.name} result type {op.result.type} does not match element {ref.elem}")
    return errs


def _verify_store(op: Operation) -> list:
    val, ref = op.operands[0], op.operands[1]
    if not isinstance(ref.type, RefType):
        return [f"{op.name} expects a ref operand"]
    errs = []
    idx = op.operands[2:]
    if len(idx) != ref.type.rank:
        errs.append(f"{op.name} expects {ref.type.rank} indices, got {len(idx)}")
    if any(not isinstance(i.type, IndexType) for i in idx):
        errs.append(f"{op.name} indices must be index-typed")
    if val.type != ref.type.elem:
        errs.append(f"{op.name} stores {val.type} into ref of {ref.type.elem}")
    d = ref.defining_op
    if d is not None and d.name == "sycl.accessor.subscript":
        acc = sycl_elem(d.operands[0].type, "accessor")
        if acc is not None and acc.mode == "read":
            errs.append("store through a read-only accessor")
    return errs


def _verify_alloc(space: str) -> Verifier:
    def check(op: Operation) -> list:
        t = op.result.type
        if not isinstance(t, RefType) or t.space != space:
            return [f"{op.name} must produce a ref in {space} space"]
        if any(e < 0 for e in t.shape):
            return [f"{op.name} requires a static shape"]
        return []

    return check


def _expect_sycl_ref(v: Value, name: str) -> Optional[SyclType]:
    if not isinstance(v.type, RefType):
        return None
    return sycl_elem(v.type, name)


def _verify_item_getter(kinds: tuple, result_ok) -> Verifier:
    def check(op: Operation) -> list:
        errs = []
        if not any(_expect_sycl_ref(op.operands[0], k) for k in kinds):
            errs.append(f"{op.name} expects a ref to {' or '.join(kinds)}")
        if len(op.operands) > 1 and not isinstance(op.operands[1].type, IntType):
            errs.append(f"{op.name} dimension operand must be an integer")
        if not result_ok(op.result.type):
            errs.append(f"{op.name} has invalid result type {op.result.type}")
        return errs

    return check


def _verify_get_group(op: Operation) -> list:
    it = _expect_sycl_ref(op.operands[0], "nd_item")
    if it is None:
        return ["sycl.nd_item.get_group expects a ref to nd_item"]
    if op.result.type != SyclType("group", (it.dim,)):
        return ["sycl.nd_item.get_group must return the matching group type"]
    return []


def _verify_constructor(op: Operation) -> list:
    out = op.operands[0]
    sym = op.attributes.get("callee")
    if not isinstance(sym, Symbol):
        return ["sycl.constructor requires a class symbol"]
    t = _expect_sycl_ref(out, sym.name)
    if t is None:
        return [f"sycl.constructor @{sym.name} must write a ref to !sycl.{sym.name}"]
    if sym.name in ("id", "range") and len(op.operands) - 1 != t.dim:
        return [f"sycl.constructor @{sym.name} expects {t.dim} indices"]
    if any(not is_integer_like(v.type) for v in op.operands[1:]):
        return ["sycl.constructor indices must be integers"]
    return []


def _verify_subscript(op: Operation) -> list:
    acc = _expect_sycl_ref(op.operands[0], "accessor")
    idt = _expect_sycl_ref(op.operands[1], "id")
    if acc is None or idt is None:
        return ["sycl.accessor.subscript expects (accessor ref, id ref)"]
    errs = []
    if acc.dim != idt.dim:
        errs.append("sycl.accessor.subscript id dimensionality mismatch")
    want = RefType((1,), acc.elem, acc.params[3])
    if op.result.type != want:
        errs.append(f"sycl.accessor.subscript must return {want}")
    return errs


def _verify_accessor_getter(op: Operation) -> list:
    if _expect_sycl_ref(op.operands[0], "accessor") is None:
        return [f"{op.name} expects an accessor ref"]
    if op.result.type != INDEX:
        return [f"{op.name} returns index"]
    return []


def _verify_barrier(op: Operation) -> list:
    t = op.operands[0].type
    if not (isinstance(t, SyclType) and t.name == "group"):
        return ["sycl.work_group_barrier expects a group"]
    return []


def _verify_disjoint(op: Operation) -> list:
    if not all(isinstance(v.type, RefType) for v in op.operands):
        return ["mem.disjoint expects two refs"]
    if op.result.type != I1:
        return ["mem.disjoint returns i1"]
    return []


def _verify_host_ctor(op: Operation) -> list:
    t = op.attributes.get("type")
    if not isinstance(t, SyclType) or t.name not in ("buffer", "accessor"):
        return ["sycl.host.constructor requires a buffer or accessor 'type' attribute"]
    if t.name == "accessor" and not isinstance(op.attributes.get("ranged"), bool):
        return ["accessor construction requires a boolean 'ranged' attribute"]
    return []


def _verify_schedule(op: Operation) -> list:
    if not isinstance(op.attributes.get("callee"), Symbol):
        return ["sycl.host.schedule_kernel requires a kernel symbol"]
    if not op.segment("range"):
        return ["sycl.host.schedule_kernel requires a [range ...] segment"]
    wg = op.segment("wg")
    if wg and len(wg) != len(op.segment("range")):
        return ["sycl.host.schedule_kernel wg rank differs from range rank"]
    return []


def _verify_llv_alloca(op: Operation) -> list:
    t = op.result.type
    if not isinstance(t, RefType) or t.space != "host":
        return ["llv.alloca must produce a host ref"]
    return []


# -- effects -------------------------------------------------------------------


def _aggregate_effects(op: Operation) -> list:
    out = []
    for r in op.regions:
        for b in r.blocks:
            for inner in b.ops:
                for e in effects_of(inner):
                    out.append(
                        MemoryEffect(e.kind, None, e.value, e.source if e.source is not None else inner)
                    )
    return out


def _call_effects(op: Operation) -> list:
    if op.name == "llv.call" and op.symbol in (ABI_BUFFER_CTOR, ABI_ACCESSOR_CTOR, ABI_ACCESSOR_CTOR_RANGED):
        return [MemoryEffect(WRITE, 0, op.operands[0])]
    if op.name == "llv.call" and op.symbol == ABI_SCHEDULE_KERNEL:
        out = []
        for i, v in enumerate(op.operands):
            if isinstance(v.type, RefType):
                out.append(MemoryEffect(READ, i, v))
                out.append(MemoryEffect(WRITE, i, v))
        return out
    return [MemoryEffect(UNKNOWN)]


def _root(op: Operation) -> Operation:
    while op.parent_op is not None:
        op = op.parent_op
    return op


def _schedule_effects(op: Operation) -> list:
    kernel = None
    name = op.symbol
    for f in _root(op).walk():
        if f.name == "func.func" and f.sym_name == name:
            kernel = f
            break
    params = explicit_kernel_params(kernel) if kernel is not None else []
    out = []
    args = op.main_operands
    base = len(op.operands) - len(args)
    for j, v in enumerate(args):
        if not isinstance(v.type, RefType):
            continue
        out.append(MemoryEffect(READ, base + j, v))
        acc = sycl_elem(params[j].type, "accessor") if j < len(params) else None
        if acc is None or acc.mode != "read":
            out.append(MemoryEffect(WRITE, base + j, v))
    return out


def effects_of(op: Operation) -> list:
    """Memory effects of ``op``; region ops report the union of their bodies."""
    spec = lookup(op.name)
    if callable(spec.effects):
        return spec.effects(op)
    effs = []
    for kind, subject in spec.effects:
        if kind == UNKNOWN:
            return [MemoryEffect(UNKNOWN)]
        value = op.operands[subject] if subject is not None and subject < len(op.operands) else None
        effs.append(MemoryEffect(kind, subject, value))
    return effs


def is_pure(op: Operation) -> bool:
    return not op.regions and not effects_of(op)


def has_unknown_effects(op: Operation) -> bool:
    return any(e.kind == UNKNOWN for e in effects_of(op))


def is_nonuniform_source(op: Operation) -> bool:
    return NON_UNIFORM_SOURCE in lookup(op.name).markers


def explicit_kernel_params(kernel: Operation) -> list:
    """Kernel parameters supplied by a launch; item/nd_item params are implicit."""
    return [p for p in kernel.arguments if not is_item_param(p)]


def is_item_param(p: Value) -> bool:
    return sycl_elem(p.type, "nd_item") is not None or sycl_elem(p.type, "item") is not None


# -- registration ----------------------------------------------------------------


def register_dialects() -> dict[str, OpSpec]:
    """Populate the catalog. Calling it twice raises :class:`CatalogError`."""
    R = _register
    R(OpSpec("arith.constant", (0, 0), (1, 1), verify=_verify_constant, attrs=("value",)))
    for name in ("arith.addi", "arith.subi", "arith.muli", "arith.divsi"):
        R(OpSpec(name, (2, 2), (1, 1), verify=_same_types(is_integer_like)))
    R(OpSpec("arith.andi", (2, 2), (1, 1), verify=_same_types(lambda t: t == I1)))
    for name in ("arith.addf", "arith.subf", "arith.mulf"):
        R(OpSpec(name, (2, 2), (1, 1), verify=_same_types(lambda t: isinstance(t, FloatType))))
    R(OpSpec("arith.cmpi", (2, 2), (1, 1), verify=_verify_cmpi, attrs=("pred",)))
    R(OpSpec("arith.index_cast", (1, 1), (1, 1), verify=_verify_index_cast))

    R(OpSpec("func.func", (0, 0), (0, 0), (1, 1), effects=_aggregate_effects))
    R(OpSpec("func.call", (0, None), (0, None), effects=_call_effects, attrs=("callee",)))
    R(OpSpec("func.return", (0, None), (0, 0), terminator=True))
    R(OpSpec("module", (0, 0), (0, 0), (1, 1), effects=_aggregate_effects))

    R(OpSpec("loop.for", (3, None), (0, None), (1, 1), effects=_aggregate_effects))
    R(OpSpec("loop.if", (1, 1), (0, None), (1, 2), effects=_aggregate_effects))
    R(OpSpec("loop.yield", (0, None), (0, 0), terminator=True))

    R(OpSpec("mem.alloca", (0, 0), (1, 1), effects=((ALLOC, None),), verify=_verify_alloc("private")))
    R(
        OpSpec(
            "mem.local_alloc",
            (0, 0),
            (1, 1),
            effects=((ALLOC, None),),
            context="device",
            verify=_verify_alloc("local"),
        )
    )
    R(OpSpec("mem.load", (1, None), (1, 1), effects=((READ, 0),), verify=_verify_load))
    R(OpSpec("mem.store", (2, None), (0, 0), effects=((WRITE, 1),), verify=_verify_store))
    R(OpSpec("mem.disjoint", (2, 2), (1, 1), verify=_verify_disjoint))

    nd = ("nd_item",)
    for getter in ("get_global_id", "get_local_id", "get_group_id"):
        R(
            OpSpec(
                f"sycl.nd_item.{getter}",
                (2, 2),
                (1, 1),
                markers=frozenset({NON_UNIFORM_SOURCE}),
                context="device",
                verify=_verify_item_getter(nd, is_integer_like),
            )
        )
    R(
        OpSpec(
            "sycl.item.get_id",
            (2, 2),
            (1, 1),
            markers=frozenset({NON_UNIFORM_SOURCE}),
            context="device",
            verify=_verify_item_getter(("item",), is_integer_like),
        )
    )
    for name, kinds in (
        ("sycl.nd_item.get_global_range", nd),
        ("sycl.nd_item.get_local_range", nd),
        ("sycl.item.get_range", ("item",)),
    ):
        R(OpSpec(name, (2, 2), (1, 1), context="device", verify=_verify_item_getter(kinds, lambda t: t == INDEX)))
    R(OpSpec("sycl.nd_item.get_group", (1, 1), (1, 1), context="device", verify=_verify_get_group))
    R(
        OpSpec(
            "sycl.id.get",
            (2, 2),
            (1, 1),
            effects=((READ, 0),),
            context="device",
            verify=_verify_item_getter(("id",), lambda t: t == INDEX),
        )
    )
    R(
        OpSpec(
            "sycl.constructor",
            (1, None),
            (0, 0),
            effects=((WRITE, 0),),
            context="device",
            verify=_verify_constructor,
            attrs=("callee",),
        )
    )
    R(
        OpSpec(
            "sycl.accessor.subscript",
            (2, 2),
            (1, 1),
            effects=((READ, 1),),
            context="device",
            verify=_verify_subscript,
        )
    )
    for getter in ("get_mem_range", "get_access_range", "get_offset"):
        R(
            OpSpec(
                f"sycl.accessor.{getter}",
                (2, 2),
                (1, 1),
                effects=((READ, 0),),
                context="device",
                verify=_verify_accessor_getter,
            )
        )
    R(
        OpSpec(
            "sycl.work_group_barrier",
            (1, 1),
            (0, 0),
            effects=((BARRIER, None),),
            context="device",
            verify=_verify_barrier,
        )
    )

    R(
        OpSpec(
            "sycl.host.constructor",
            (1, None),
            (0, 0),
            effects=((WRITE, 0),),
            context="host",
            verify=_verify_host_ctor,
            attrs=("type",),
        )
    )
    R(
        OpSpec(
            "sycl.host.schedule_kernel",
            (1, None),
            (0, 0),
            effects=_schedule_effects,
            context="host",
            verify=_verify_schedule,
            attrs=("callee",),
        )
    )

    R(OpSpec("llv.alloca", (0, 0), (1, 1), effects=((ALLOC, None),), context="host", verify=_verify_llv_alloca))
    R(OpSpec("llv.call", (0, None), (0, None), effects=_call_effects, context="host", attrs=("callee",)))
    R(OpSpec("llv.store", (2, 2), (0, 0), effects=((WRITE, 1),), context="host"))
    R(OpSpec("llv.load", (1, 1), (1, 1), effects=((READ, 0),), context="host"))
    R(OpSpec("llv.undef", (0, 0), (1, 1), context="host"))
    R(OpSpec("llv.constant", (0, 0), (1, 1), context="host", verify=_verify_constant, attrs=("value",)))
    return catalog()


register_dialects()

__all__ = [
    "MemoryEffect",
    "OpSpec",
    "CatalogError",
    "lookup",
    "effects_of",
    "is_pure",
    "is_nonuniform_source",
    "explicit_kernel_params",
    "register_dialects",
    "is_scalar",
]
