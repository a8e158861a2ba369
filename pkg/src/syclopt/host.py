"""Host raising, launch-site analysis and host-to-device propagation.

Low-level host code calls a small fixed ABI (``@sycl_buffer_ctor``,
``@sycl_accessor_ctor``, ``@sycl_accessor_ctor_ranged`` and
``@sycl_schedule_kernel``). Raising turns those calls into ``sycl.host``
operations; launch analysis then traces every schedule operand back to its
constructor or constant, and propagation rewrites the device kernel with
what is known at every launch.

Host object slots are typed: a buffer lives in ``ref<1x!sycl.buffer<..>, host>``
and an accessor in ``ref<1x!sycl.accessor<..>, host>``, which is where the
raised ``type`` attribute comes from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .analyses.alias import constant_value
from .analyses.reachdef import ReachingDefs
from .dataflow import build_call_graph
from .dialects import (
    ABI_ACCESSOR_CTOR,
    ABI_ACCESSOR_CTOR_RANGED,
    ABI_BUFFER_CTOR,
    ABI_SCHEDULE_KERNEL,
    explicit_kernel_params,
)
from .ir.core import ModuleIR, Operation, Symbol, Value, erase_op, in_device_module, insert_before, replace_all_uses
from .ir.types import INDEX, FloatType, IndexType, IntType, RefType, sycl_elem
from .transforms.canonicalize import canonicalize_function, make_constant
from .transforms.report import ChangeReport

KERNEL_ARG_UNUSED = "sycl.kernel_arg_unused"
WG_SIZE = "sycl.wg_size"
DEAD_ARGS = "dead_args"


class RaiseError(ValueError):
    pass


# -- raising -----------------------------------------------------------------------


def _slot_type(v: Value, name: str):
    return sycl_elem(v.type, name) if isinstance(v.type, RefType) and v.type.space == "host" else None


def _arity_error(op: Operation, want: int) -> RaiseError:
    return RaiseError(f"raising pattern arity: @{op.symbol} expects {want} operands, got {len(op.operands)}")


def _raise_buffer(op: Operation, m: ModuleIR) -> Operation:
    t = _slot_type(op.operands[0], "buffer") if op.operands else None
    if t is None:
        raise RaiseError(f"@{op.symbol} must construct into a host buffer slot")
    if len(op.operands) != 2 + t.dim:
        raise _arity_error(op, 2 + t.dim)
    attrs = {k: v for k, v in op.attributes.items() if k != "callee"}
    attrs["type"] = t
    return Operation("sycl.host.constructor", op.operands, (), attrs, location=op.location)


def _raise_accessor(ranged: bool) -> Callable:
    def build(op: Operation, m: ModuleIR) -> Operation:
        t = _slot_type(op.operands[0], "accessor") if op.operands else None
        if t is None:
            raise RaiseError(f"@{op.symbol} must construct into a host accessor slot")
        want = 3 + (2 * t.dim if ranged else 0)
        if len(op.operands) != want:
            raise _arity_error(op, want)
        attrs = {k: v for k, v in op.attributes.items() if k != "callee"}
        attrs["type"] = t
        attrs["ranged"] = ranged
        return Operation("sycl.host.constructor", op.operands, (), attrs, location=op.location)

    return build


def _kernel_item(kernel: Operation):
    """(dimensionality, is_nd) of the kernel's implicit item parameter."""
    for a in reversed(kernel.arguments):
        t = sycl_elem(a.type, "nd_item")
        if t is not None:
            return t.dim, True
        t = sycl_elem(a.type, "item")
        if t is not None:
            return t.dim, False
    return 1, False


def find_kernel(m: ModuleIR, name: str) -> Optional[Operation]:
    dev = m.device_module
    if dev is None:
        return None
    for f in dev.body.ops:
        if f.name == "func.func" and f.sym_name == name and f.is_kernel:
            return f
    return None


def schedule_layout(kernel: Operation) -> tuple[int, bool, int]:
    """(range rank, has wg operands, explicit argument count) of a launch of ``kernel``."""
    dim, nd = _kernel_item(kernel)
    return dim, nd, len(explicit_kernel_params(kernel))


def _raise_schedule(op: Operation, m: ModuleIR) -> Operation:
    sym = op.attributes.get("kernel")
    if not isinstance(sym, Symbol):
        raise RaiseError(f"@{op.symbol} requires a 'kernel' symbol attribute")
    kernel = find_kernel(m, sym.name)
    if kernel is None:
        raise RaiseError(f"schedule target '@{sym.name}' not found in device module")
    dim, nd, nargs = schedule_layout(kernel)
    want = 1 + dim + (dim if nd else 0) + nargs
    if len(op.operands) != want:
        raise _arity_error(op, want)
    rest = op.operands[1:]
    segments = [("range", dim)] + ([("wg", dim)] if nd else [])
    attrs = {k: v for k, v in op.attributes.items() if k not in ("callee", "kernel")}
    attrs["callee"] = sym
    return Operation("sycl.host.schedule_kernel", rest, (), attrs, segments=segments, location=op.location)


@dataclass(frozen=True)
class RaisePattern:
    callee: str
    produces: str
    convention: str
    build: Callable = field(compare=False, repr=False)


PATTERNS: dict[str, RaisePattern] = {
    p.callee: p
    for p in (
        RaisePattern(ABI_BUFFER_CTOR, "sycl.host.constructor", "(out, data, size...)", _raise_buffer),
        RaisePattern(ABI_ACCESSOR_CTOR, "sycl.host.constructor", "(out, buffer, cgh)", _raise_accessor(False)),
        RaisePattern(
            ABI_ACCESSOR_CTOR_RANGED,
            "sycl.host.constructor",
            "(out, buffer, cgh, range..., offset...)",
            _raise_accessor(True),
        ),
        RaisePattern(
            ABI_SCHEDULE_KERNEL,
            "sycl.host.schedule_kernel",
            "(cgh, range..., [wg...], args...) {kernel = @K}",
            _raise_schedule,
        ),
    )
}


def raise_host(m: ModuleIR) -> ChangeReport:
    """Replace ABI calls in host functions by ``sycl.host`` operations."""
    report = ChangeReport("raise-host")
    for f in m.host_functions():
        for op in list(f.walk()):
            if op.name != "llv.call":
                continue
            pat = PATTERNS.get(op.symbol)
            if pat is None:
                continue
            new = insert_before(op, pat.build(op, m))
            erase_op(op)
            key = "scheduled" if new.name == "sycl.host.schedule_kernel" else "constructed"
            report.add(f.sym_name, key)
    return report


# -- launch-site analysis --------------------------------------------------------------


def _same(a, b):
    return a if (a is not None and a == b and type(a) is type(b)) else None


def _join_dims(a: Optional[tuple], b: Optional[tuple]) -> Optional[tuple]:
    if a is None or b is None or len(a) != len(b):
        return None
    return tuple(_same(x, y) for x, y in zip(a, b))


def _fmt_dims(d: Optional[tuple]) -> str:
    if d is None:
        return "?"
    return "[" + ", ".join("?" if x is None else str(x) for x in d) + "]"


@dataclass(frozen=True)
class AccessorFacts:
    mem_range: Optional[tuple]
    access_range: Optional[tuple]
    offset: Optional[tuple]
    access_is_mem: bool
    ranged: Optional[bool]

    @classmethod
    def unknown(cls) -> "AccessorFacts":
        return cls(None, None, None, False, None)

    def join(self, other: "AccessorFacts") -> "AccessorFacts":
        return AccessorFacts(
            _join_dims(self.mem_range, other.mem_range),
            _join_dims(self.access_range, other.access_range),
            _join_dims(self.offset, other.offset),
            self.access_is_mem and other.access_is_mem,
            self.ranged if self.ranged == other.ranged else None,
        )

    def render(self) -> str:
        acc = "mem_range" if self.access_is_mem else _fmt_dims(self.access_range)
        if self.access_is_mem and self.access_range and all(x is not None for x in self.access_range):
            acc += f" {_fmt_dims(self.access_range)}"
        ranged = "?" if self.ranged is None else str(self.ranged).lower()
        return (
            f"{{mem_range = {_fmt_dims(self.mem_range)}, access_range = {acc},"
            f" offset = {_fmt_dims(self.offset)}, ranged = {ranged}}}"
        )


@dataclass
class LaunchSummary:
    kernel: str
    sites: int = 0
    global_range: Optional[tuple] = None
    wg: Optional[tuple] = None
    scalars: dict = field(default_factory=dict)  # explicit param index -> constant or None
    accessors: dict = field(default_factory=dict)  # explicit param index -> AccessorFacts

    def join(self, other: "LaunchSummary") -> "LaunchSummary":
        if self.sites == 0:
            return other
        if other.sites == 0:
            return self
        return LaunchSummary(
            self.kernel,
            self.sites + other.sites,
            _join_dims(self.global_range, other.global_range),
            _join_dims(self.wg, other.wg),
            {j: _same(v, other.scalars.get(j)) for j, v in self.scalars.items()},
            {j: f.join(other.accessors.get(j, AccessorFacts.unknown())) for j, f in self.accessors.items()},
        )

    def render(self) -> str:
        parts = [f"sites = {self.sites}", f"range = {_fmt_dims(self.global_range)}", f"wg = {_fmt_dims(self.wg)}"]
        for j in sorted(self.scalars):
            v = self.scalars[j]
            parts.append(f"arg{j} = {'?' if v is None else v}")
        for j in sorted(self.accessors):
            parts.append(f"arg{j} = {self.accessors[j].render()}")
        return f"// launch: @{self.kernel} -> " + " ".join(parts)


class _Tracer:
    """Constant and constructor tracking through host memory via reaching definitions."""

    def __init__(self, func: Operation):
        self.rd = ReachingDefs(func)

    def writer(self, at: Operation, slot: Value) -> Optional[Operation]:
        """The unique definition of ``slot`` reaching ``at``.

        Launches do not change host slots, so a schedule op that appears as a
        writer is looked through to the definitions reaching it.
        """
        mods, pmods, seen = set(), set(), set()
        work = [(at, True)]
        while work:
            op, must = work.pop()
            d = self.rd.before(op, slot)
            for o, m in [(o, must) for o in d.mods] + [(o, False) for o in d.pmods]:
                if o.name == "sycl.host.schedule_kernel":
                    if o.id not in seen:
                        seen.add(o.id)
                        work.append((o, m))
                else:
                    (mods if m else pmods).add(o)
        if pmods or len(mods) != 1:
            return None
        return mods.pop()

    def constant(self, v: Value, depth: int = 0):
        c = constant_value(v)
        if c is not None or depth > 16:
            return c
        d = v.defining_op
        if d is None:
            return None
        if d.name == "llv.load":
            w = self.writer(d, d.operands[0])
            if w is not None and w.name == "llv.store" and w.operands[1] is d.operands[0]:
                return self.constant(w.operands[0], depth + 1)
            return None
        if d.name == "arith.index_cast":
            return self.constant(d.operands[0], depth + 1)
        return None

    def dims(self, values, at: Operation) -> tuple:
        return tuple(self._int(self.constant(v)) for v in values)

    @staticmethod
    def _int(c):
        return c if isinstance(c, int) and not isinstance(c, bool) else None

    def accessor(self, slot: Value, at: Operation) -> AccessorFacts:
        ctor = self.writer(at, slot)
        t = sycl_elem(slot.type, "accessor")
        if ctor is None or ctor.name != "sycl.host.constructor" or ctor.operands[0] is not slot or t is None:
            return AccessorFacts.unknown()
        n = t.dim
        buf = ctor.operands[1]
        bctor = self.writer(ctor, buf)
        mem = None
        if bctor is not None and bctor.name == "sycl.host.constructor" and bctor.operands[0] is buf:
            mem = self.dims(bctor.operands[2:2 + n], bctor)
        if ctor.attributes.get("ranged"):
            acc = self.dims(ctor.operands[3:3 + n], ctor)
            off = self.dims(ctor.operands[3 + n:3 + 2 * n], ctor)
            return AccessorFacts(mem, acc, off, mem is not None and acc == mem and None not in acc, True)
        return AccessorFacts(mem, mem, (0,) * n, True, False)


def _site_summary(op: Operation, kernel: Operation, tracer: _Tracer) -> LaunchSummary:
    params = explicit_kernel_params(kernel)
    s = LaunchSummary(kernel.sym_name, 1)
    s.global_range = tracer.dims(op.segment("range"), op)
    wg = op.segment("wg")
    s.wg = tracer.dims(wg, op) if wg else None
    for j, (p, v) in enumerate(zip(params, op.main_operands)):
        if sycl_elem(p.type, "accessor") is not None:
            s.accessors[j] = tracer.accessor(v, op)
        elif isinstance(p.type, (IntType, IndexType, FloatType)):
            s.scalars[j] = tracer.constant(v)
    return s


def schedule_sites(m: ModuleIR) -> list[Operation]:
    return [op for f in m.host_functions() for op in f.walk() if op.name == "sycl.host.schedule_kernel"]


def analyze_launch_sites(m: ModuleIR) -> dict[str, LaunchSummary]:
    """Summaries of what every launch of each kernel agrees on."""
    cg = build_call_graph(m)
    out: dict[str, LaunchSummary] = {}
    tracers: dict[int, _Tracer] = {}
    for k in m.kernels():
        out[k.sym_name] = LaunchSummary(k.sym_name)
    for f in m.host_functions():
        for op in f.walk():
            if op.name != "sycl.host.schedule_kernel":
                continue
            kernel = find_kernel(m, op.symbol)
            if kernel is None:
                continue
            tracer = tracers.setdefault(f.id, _Tracer(f))
            site = _site_summary(op, kernel, tracer)
            out[kernel.sym_name] = out[kernel.sym_name].join(site)
    for name, s in out.items():
        if s.sites and cg.has_external_callers(name):
            out[name] = LaunchSummary(name, s.sites)
    return out


def render_launch(m: ModuleIR) -> list[str]:
    return [s.render() for s in analyze_launch_sites(m).values()]


# -- propagation -------------------------------------------------------------------


def _dim_of(op: Operation) -> Optional[int]:
    c = constant_value(op.operands[1])
    return c if isinstance(c, int) and not isinstance(c, bool) else None


def _replace_with_constant(op: Operation, value) -> None:
    c = insert_before(op, make_constant(value, op.result.type, op.location))
    replace_all_uses(op.result, c.result)
    erase_op(op)


def _param_index(v: Value, kernel: Operation, params: list) -> Optional[int]:
    if v.is_block_arg and v.owner is kernel.body:
        for j, p in enumerate(params):
            if p is v:
                return j
    return None


def _propagate_kernel(kernel: Operation, s: LaunchSummary, report: ChangeReport) -> None:
    name = kernel.sym_name
    params = explicit_kernel_params(kernel)
    for op in list(kernel.walk()):
        if op.parent is None:
            continue
        d = _dim_of(op) if len(op.operands) == 2 else None
        if op.name in ("sycl.nd_item.get_global_range", "sycl.item.get_range", "sycl.nd_item.get_local_range"):
            dims = s.wg if op.name == "sycl.nd_item.get_local_range" else s.global_range
            if d is not None and dims and d < len(dims) and dims[d] is not None:
                _replace_with_constant(op, dims[d])
                report.add(name, "propagated")
            continue
        if not op.name.startswith("sycl.accessor.get_"):
            continue
        j = _param_index(op.operands[0], kernel, params)
        facts = s.accessors.get(j) if j is not None else None
        if facts is None or d is None:
            continue
        member = {
            "sycl.accessor.get_mem_range": facts.mem_range,
            "sycl.accessor.get_access_range": facts.access_range,
            "sycl.accessor.get_offset": facts.offset,
        }.get(op.name)
        if member and d < len(member) and member[d] is not None:
            _replace_with_constant(op, member[d])
            report.add(name, "propagated")
        elif op.name == "sycl.accessor.get_access_range" and facts.access_is_mem:
            mem = Operation("sycl.accessor.get_mem_range", op.operands, (INDEX,), location=op.location)
            insert_before(op, mem)
            replace_all_uses(op.result, mem.result)
            erase_op(op)
            report.add(name, "unified")
    entry = kernel.body.ops[0] if kernel.body.ops else None
    for j, c in sorted(s.scalars.items()):
        p = params[j]
        if c is None or not p.uses or entry is None:
            continue
        const = insert_before(entry, make_constant(c, p.type, kernel.location))
        replace_all_uses(p, const.result)
        report.add(name, "propagated")


def _mark_unused(m: ModuleIR, kernel: Operation, report: ChangeReport) -> None:
    params = explicit_kernel_params(kernel)
    unused = tuple(j for j, p in enumerate(params) if not p.uses)
    name = kernel.sym_name
    old = tuple(kernel.attributes.get(KERNEL_ARG_UNUSED, ()))
    if unused != old:
        if unused:
            kernel.attributes[KERNEL_ARG_UNUSED] = unused
        else:
            kernel.attributes.pop(KERNEL_ARG_UNUSED, None)
        report.add(name, "unused_args")
    for op in schedule_sites(m):
        if op.symbol != name:
            continue
        if tuple(op.attributes.get(DEAD_ARGS, ())) != unused:
            if unused:
                op.attributes[DEAD_ARGS] = unused
            else:
                op.attributes.pop(DEAD_ARGS, None)
            report.add(name, "dead_sites")


def propagate_host_to_device(m: ModuleIR) -> ChangeReport:
    """Fold launch facts into kernels, canonicalize them and mark unused arguments."""
    report = ChangeReport("sycl-constprop")
    summaries = analyze_launch_sites(m)
    for kernel in m.kernels():
        s = summaries.get(kernel.sym_name)
        if s is None or s.sites == 0 or not in_device_module(kernel):
            continue
        if s.wg and all(x is not None for x in s.wg) and kernel.attributes.get(WG_SIZE) != tuple(s.wg):
            kernel.attributes[WG_SIZE] = tuple(s.wg)
            report.add(kernel.sym_name, "wg_size")
        before = report.total()
        _propagate_kernel(kernel, s, report)
        if report.total() != before:
            canonicalize_function(kernel, ChangeReport("canonicalize"))
        _mark_unused(m, kernel, report)
        n = report.count(kernel.sym_name, "propagated") + report.count(kernel.sym_name, "unified")
        if n:
            unused = kernel.attributes.get(KERNEL_ARG_UNUSED, ())
            extra = f", unused arguments {list(unused)}" if unused else ""
            report.remark(kernel.sym_name, f"propagated {n} launch fact(s){extra}")
    return report


__all__ = [
    "RaiseError",
    "RaisePattern",
    "PATTERNS",
    "raise_host",
    "AccessorFacts",
    "LaunchSummary",
    "analyze_launch_sites",
    "render_launch",
    "propagate_host_to_device",
    "find_kernel",
    "schedule_layout",
    "schedule_sites",
]
