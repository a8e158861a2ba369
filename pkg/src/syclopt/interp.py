"""Deterministic reference interpreter for host programs and ND-range kernels.

Work-items are Python generators that suspend at ``sycl.work_group_barrier``.
Groups run one at a time in lexicographic order; inside a group the items
are advanced round-robin in lexicographic local-id order until every item
either waits at the same barrier instance (all resume) or finishes. Any
other combination is a barrier-divergence error rather than a hang.

Every executed ``mem.load``/``mem.store`` bumps exactly one counter in
:class:`ExecStats`, split by memory space and by buffer.
"""

from __future__ import annotations

import copy
import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .dialects import ABI_ACCESSOR_CTOR, ABI_ACCESSOR_CTOR_RANGED, ABI_BUFFER_CTOR, ABI_SCHEDULE_KERNEL, explicit_kernel_params, is_item_param
from .ir.core import ModuleIR, Operation, Value, in_device_module
from .ir.types import I1, DYNAMIC, FloatType, IndexType, IntType, RefType, SyclType, sycl_elem
from .semantics import FOLDABLE, ArithError, evaluate, format_scalar, from_attr, wrap_int


class InterpError(RuntimeError):
    """Execution failure; ``kind`` names the error class (e.g. "barrier divergence")."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


# -- memory model ------------------------------------------------------------------


def _dtype(elem):
    if elem == I1:
        return np.bool_
    if isinstance(elem, FloatType):
        return np.float32 if elem.width == 32 else np.float64
    if isinstance(elem, (IntType, IndexType)):
        return np.int64
    return None  # sycl objects live in Python lists


class Storage:
    """A flat array of cells in one memory space."""

    def __init__(self, name: str, space: str, elem, size: int, shape: tuple | None = None):
        self.name = name
        self.space = space
        self.elem = elem
        self.shape = tuple(shape) if shape is not None else (size,)
        dt = _dtype(elem)
        self.cells = np.zeros(size, dtype=dt) if dt is not None else [None] * size

    def __len__(self) -> int:
        return len(self.cells)

    def get(self, addr: int):
        x = self.cells[addr]
        if isinstance(x, np.bool_):
            return bool(x)
        if isinstance(x, np.integer):
            return int(x)
        return x

    def set(self, addr: int, value) -> None:
        self.cells[addr] = value

    def snapshot(self) -> np.ndarray:
        return np.array(self.cells, copy=True)

    def __repr__(self) -> str:
        return f"<Storage {self.name} {self.space} {self.shape}>"


@dataclass(frozen=True)
class Pointer:
    """Runtime value of a ref: a view of ``storage`` starting at cell ``base``."""

    storage: Storage
    base: int
    shape: tuple
    readonly: bool = False
    buffer: Optional[str] = None  # accessor buffer name, for error messages

    def extent(self) -> int:
        if any(e == DYNAMIC for e in self.shape):
            return len(self.storage) - self.base
        return int(np.prod(self.shape))

    def address(self, idx: list[int]) -> int:
        if len(idx) != len(self.shape):
            raise InterpError("out-of-bounds access", f"rank mismatch on {self.storage.name}")
        dims = list(self.shape)
        if DYNAMIC in dims:
            rest = int(np.prod([d for d in dims[1:] if d != DYNAMIC])) if len(dims) > 1 else 1
            dims[0] = max(0, (len(self.storage) - self.base) // max(rest, 1))
        flat = 0
        for i, d in zip(idx, dims):
            if not 0 <= i < d:
                raise InterpError("out-of-bounds access", f"{self.storage.name} index {tuple(idx)} outside {tuple(dims)}")
            flat = flat * d + i
        addr = self.base + flat
        if not 0 <= addr < len(self.storage):
            raise InterpError("out-of-bounds access", f"{self.storage.name} cell {addr} outside {len(self.storage)}")
        return addr

    def cell_range(self) -> tuple[int, int]:
        return self.base, self.base + self.extent()


@dataclass(frozen=True)
class AccessorBinding:
    buffer: str
    mem_range: tuple
    access_range: tuple
    offset: tuple
    mode: str = "read_write"


@dataclass(frozen=True)
class RefBinding:
    buffer: str
    offset: int = 0


@dataclass(frozen=True)
class GroupValue:
    group_id: tuple


class Undef:
    def __repr__(self) -> str:
        return "undef"


UNDEF = Undef()


@dataclass
class NDRangeSpec:
    global_size: tuple
    local_size: Optional[tuple] = None

    def __post_init__(self) -> None:
        self.global_size = tuple(int(x) for x in self.global_size)
        if not 1 <= len(self.global_size) <= 3:
            raise ValueError("ND-range must have 1, 2 or 3 dimensions")
        if any(x <= 0 for x in self.global_size):
            raise ValueError("ND-range sizes must be positive")
        if self.local_size is None:
            self.local_size = self.global_size
        self.local_size = tuple(int(x) for x in self.local_size)
        if len(self.local_size) != len(self.global_size):
            raise ValueError("work-group rank differs from the global range rank")
        for g, w in zip(self.global_size, self.local_size):
            if w <= 0 or g % w:
                raise ValueError(f"work-group size {w} does not divide global size {g}")

    @property
    def dims(self) -> int:
        return len(self.global_size)

    @property
    def groups(self) -> tuple:
        return tuple(g // w for g, w in zip(self.global_size, self.local_size))

    @property
    def items(self) -> int:
        return int(np.prod(self.global_size))


@dataclass
class MemoryImage:
    """Buffers by name plus kernel-argument bindings by parameter name."""

    buffers: dict = field(default_factory=dict)
    bindings: dict = field(default_factory=dict)

    def add_buffer(self, name: str, data, elem=None, shape=None) -> Storage:
        from .ir.types import F32

        elem = elem or F32
        arr = np.asarray(data, dtype=_dtype(elem)).reshape(-1)
        shape = tuple(shape) if shape is not None else (arr.size,)
        if int(np.prod(shape)) != arr.size:
            raise ValueError(f"buffer {name}: {arr.size} values do not fill shape {shape}")
        st = Storage(name, "global", elem, arr.size, shape)
        st.cells[:] = arr
        self.buffers[name] = st
        return st

    def bind(self, param: str, value) -> None:
        self.bindings[param] = value

    def bind_accessor(self, param: str, buffer: str, mode: str = "read_write", access_range=None, offset=None) -> None:
        shape = self.buffers[buffer].shape
        self.bindings[param] = AccessorBinding(
            buffer,
            shape,
            tuple(access_range) if access_range is not None else shape,
            tuple(offset) if offset is not None else (0,) * len(shape),
            mode,
        )

    def array(self, name: str) -> np.ndarray:
        st = self.buffers[name]
        return st.snapshot().reshape(st.shape)

    def copy(self) -> "MemoryImage":
        return copy.deepcopy(self)


@dataclass
class ExecStats:
    global_loads: int = 0
    global_stores: int = 0
    local_loads: int = 0
    local_stores: int = 0
    private_loads: int = 0
    private_stores: int = 0
    host_loads: int = 0
    host_stores: int = 0
    barrier_waits: int = 0
    items: int = 0
    launches: int = 0
    per_buffer: dict = field(default_factory=lambda: defaultdict(Counter))
    cell_accesses: Counter = field(default_factory=Counter)

    COUNTERS = (
        "global_loads",
        "global_stores",
        "local_loads",
        "local_stores",
        "private_loads",
        "private_stores",
        "host_loads",
        "host_stores",
        "barrier_waits",
        "items",
        "launches",
    )

    def count(self, storage: Storage, kind: str, addr: int) -> None:
        key = f"{storage.space}_{kind}"
        setattr(self, key, getattr(self, key) + 1)
        self.per_buffer[storage.name][key] += 1
        self.cell_accesses[(storage.name, addr)] += 1

    def buffer(self, name: str, key: str) -> int:
        return self.per_buffer.get(name, Counter())[key]

    def cell(self, name: str, addr: int) -> int:
        return self.cell_accesses[(name, addr)]

    def merge(self, other: "ExecStats") -> None:
        for k in self.COUNTERS:
            setattr(self, k, getattr(self, k) + getattr(other, k))
        for name, c in other.per_buffer.items():
            self.per_buffer[name].update(c)
        self.cell_accesses.update(other.cell_accesses)

    def render(self) -> list[str]:
        lines = [f"// stat: {k} = {getattr(self, k)}" for k in self.COUNTERS]
        for name in sorted(self.per_buffer):
            for k, v in sorted(self.per_buffer[name].items()):
                lines.append(f"// stat: {name}.{k} = {v}")
        return lines


@dataclass
class WorkItemState:
    global_id: tuple = (0,)
    local_id: tuple = (0,)
    group_id: tuple = (0,)
    global_size: tuple = (1,)
    local_size: tuple = (1,)
    loop_stack: list = field(default_factory=list)

    def context(self) -> tuple:
        return tuple(self.loop_stack)


# Called as trace(item, op, loop_context, values) after every executed
# non-region op (values are its results, empty for stores) and after region ops
# with results. ``loop.for`` additionally reports ``[iv, *carried]`` at the
# start of each iteration, with that iteration in the context.
Trace = Callable[[WorkItemState, Operation, tuple, list], None]


# -- execution ------------------------------------------------------------------------


def _space_name(v: Value, prefix: str, counter: Counter) -> str:
    hint = v.name_hint
    if hint and not hint.isdigit():
        base = f"{prefix}:{hint}"
    else:
        base = f"{prefix}{counter[prefix]}"
        counter[prefix] += 1
    return base


def _int(x) -> int:
    return int(x)


class _Machine:
    def __init__(self, m: ModuleIR, image: MemoryImage, stats: ExecStats, trace: Optional[Trace] = None,
                 reverse_items: bool = False):
        self.m = m
        self.image = image
        self.stats = stats
        self.trace = trace
        self.reverse_items = reverse_items
        self.funcs = {f.sym_name: f for f in m.functions()}
        self.arena: dict[int, Pointer] = {}
        self.names: Counter = Counter()

    # -- values ---------------------------------------------------------------
    def deref(self, ptr, what: str):
        if not isinstance(ptr, Pointer):
            raise InterpError("unbound argument", f"{what} is not bound to memory")
        return ptr.storage.get(ptr.base)

    def _alloc(self, v: Value, space: str, prefix: str) -> Pointer:
        t = v.type
        size = int(np.prod(t.shape))
        st = Storage(_space_name(v, prefix, self.names), space, t.elem, size, t.shape)
        return Pointer(st, 0, t.shape)

    # -- blocks -----------------------------------------------------------------
    def run_block(self, block, env: dict, item: WorkItemState):
        for op in block.ops:
            name = op.name
            if name in ("loop.yield", "func.return"):
                return [env[v.id] for v in op.operands]
            if name == "loop.for":
                yield from self.run_for(op, env, item)
            elif name == "loop.if":
                cond = env[op.operands[0].id]
                res = []
                if cond:
                    res = yield from self.run_block(op.regions[0].block, env, item)
                elif len(op.regions) > 1:
                    res = yield from self.run_block(op.regions[1].block, env, item)
                for r, v in zip(op.results, res):
                    env[r.id] = v
            elif name == "sycl.work_group_barrier":
                yield (op.id, item.context())
            elif name == "func.call":
                callee = self.funcs.get(op.symbol)
                if callee is None:
                    raise InterpError("unresolved symbol", f"@{op.symbol}")
                res = yield from self.call(callee, [env[v.id] for v in op.operands], item)
                for r, v in zip(op.results, res):
                    env[r.id] = v
            else:
                self.step(op, env, item)
                continue
            if self.trace is not None and op.results:
                self.trace(item, op, item.context(), [env[r.id] for r in op.results])
        return []

    def call(self, f: Operation, args: list, item: WorkItemState):
        env = {a.id: v for a, v in zip(f.arguments, args)}
        res = yield from self.run_block(f.body, env, item)
        return res

    def run_for(self, op: Operation, env: dict, item: WorkItemState):
        lb, ub, step = (_int(env[v.id]) for v in op.operands[:3])
        if step <= 0:
            raise InterpError("invalid loop", f"non-positive step {step}")
        carried = [env[v.id] for v in op.operands[3:]]
        body = op.regions[0].block
        iv, iargs = body.args[0], body.args[1:]
        item.loop_stack.append(0)
        it = 0
        i = lb
        while i < ub:
            item.loop_stack[-1] = it
            env[iv.id] = i
            for a, v in zip(iargs, carried):
                env[a.id] = v
            if self.trace is not None:
                self.trace(item, op, item.context(), [i, *carried])
            res = yield from self.run_block(body, env, item)
            if iargs:
                carried = res
            i += step
            it += 1
        item.loop_stack.pop()
        for r, v in zip(op.results, carried):
            env[r.id] = v

    # -- single operations ---------------------------------------------------------
    def step(self, op: Operation, env: dict, item: WorkItemState) -> None:
        name = op.name
        vals = [env[v.id] for v in op.operands]
        for v in vals:
            if isinstance(v, _Unbound):
                raise InterpError("unbound argument", f"%{v.param.name_hint or v.param.index} is used but not bound")
        out = None
        if name in ("arith.constant", "llv.constant"):
            out = from_attr(op.attributes["value"], op.result.type)
        elif name in FOLDABLE:
            try:
                out = evaluate(name, vals, op.result.type, op.attributes)
            except ArithError as e:
                raise InterpError("arithmetic error", str(e)) from None
        elif name == "mem.load":
            ptr = vals[0]
            addr = ptr.address([_int(i) for i in vals[1:]])
            self.stats.count(ptr.storage, "loads", addr)
            out = ptr.storage.get(addr)
        elif name == "mem.store":
            ptr = vals[1]
            if ptr.readonly:
                raise InterpError("read-only store", f"store through a read-only accessor of {ptr.buffer}")
            addr = ptr.address([_int(i) for i in vals[2:]])
            self.stats.count(ptr.storage, "stores", addr)
            ptr.storage.set(addr, vals[0])
        elif name == "mem.alloca":
            out = self._alloc(op.result, "private", "private")
        elif name == "mem.local_alloc":
            out = self.arena.get(op.id)
            if out is None:
                out = self.arena[op.id] = self._alloc(op.result, "local", "local")
        elif name == "mem.disjoint":
            p, q = vals
            if p.storage is not q.storage:
                out = True
            else:
                (a0, a1), (b0, b1) = p.cell_range(), q.cell_range()
                out = a1 <= b0 or b1 <= a0
        elif name.startswith("sycl."):
            out = self.sycl_op(op, vals, item)
        elif name.startswith("llv.") or name.startswith("sycl.host"):
            out = self.host_op(op, vals, env)
        else:
            raise InterpError("unsupported operation", name)
        if op.results:
            env[op.result.id] = out
        if self.trace is not None:
            self.trace(item, op, item.context(), [out] if op.results else [])

    def sycl_op(self, op: Operation, vals: list, item: WorkItemState):
        name = op.name
        if name.startswith("sycl.host"):
            return self.host_op(op, vals, None)
        if name.startswith("sycl.nd_item.") or name.startswith("sycl.item."):
            info = self.deref(vals[0], "item")
            getter = name.rsplit(".", 1)[1]
            if getter == "get_group":
                return GroupValue(info.group_id)
            d = _int(vals[1])
            table = {
                "get_global_id": info.global_id,
                "get_id": info.global_id,
                "get_local_id": info.local_id,
                "get_group_id": info.group_id,
                "get_global_range": info.global_size,
                "get_range": info.global_size,
                "get_local_range": info.local_size,
            }
            seq = table[getter]
            if not 0 <= d < len(seq):
                raise InterpError("out-of-bounds access", f"{name} dimension {d}")
            return wrap_int(seq[d], op.result.type)
        if name == "sycl.constructor":
            out = vals[0]
            out.storage.set(out.base, tuple(_int(v) for v in vals[1:]))
            return None
        if name == "sycl.id.get":
            idv = self.deref(vals[0], "id")
            return wrap_int(idv[_int(vals[1])], op.result.type)
        if name == "sycl.accessor.subscript":
            acc = self.deref(vals[0], "accessor")
            if not isinstance(acc, AccessorBinding):
                raise InterpError("unbound argument", "accessor is not bound")
            idv = self.deref(vals[1], "id")
            if idv is None:
                raise InterpError("uninitialized id", "subscript with an unconstructed id")
            buf = self.image.buffers[acc.buffer]
            flat = 0
            for d, (i, a, o, mr) in enumerate(zip(idv, acc.access_range, acc.offset, acc.mem_range)):
                j = o + i
                if not (0 <= i < a and 0 <= j < mr):
                    raise InterpError("out-of-bounds access", f"buffer {acc.buffer} index {tuple(idv)}")
                flat = flat * mr + j
            return Pointer(buf, flat, (1,), readonly=acc.mode == "read", buffer=acc.buffer)
        if name.startswith("sycl.accessor.get_"):
            acc = self.deref(vals[0], "accessor")
            if not isinstance(acc, AccessorBinding):
                raise InterpError("unbound argument", "accessor is not bound")
            d = _int(vals[1])
            member = {"get_mem_range": acc.mem_range, "get_access_range": acc.access_range, "get_offset": acc.offset}
            return wrap_int(member[name.rsplit(".", 1)[1]][d], op.result.type)
        raise InterpError("unsupported operation", name)

    # -- host ---------------------------------------------------------------------
    def host_op(self, op: Operation, vals: list, env):
        name = op.name
        if name == "llv.alloca":
            return self._alloc(op.result, "host", "host")
        if name == "llv.undef":
            return UNDEF
        if name == "llv.store":
            ptr = vals[1]
            self.stats.count(ptr.storage, "stores", ptr.base)
            ptr.storage.set(ptr.base, vals[0])
            return None
        if name == "llv.load":
            ptr = vals[0]
            self.stats.count(ptr.storage, "loads", ptr.base)
            return ptr.storage.get(ptr.base)
        if name == "sycl.host.constructor":
            t = op.attributes["type"]
            if t.name == "buffer":
                return self.make_buffer(op, vals[0], vals[2:], t)
            n = t.dim
            ranged = op.attributes.get("ranged", False)
            extra = vals[3:] if ranged else []
            return self.make_accessor(vals[0], vals[1], t, extra[:n], extra[n:2 * n])
        if name == "sycl.host.schedule_kernel":
            rng = op.segment("range")
            wg = op.segment("wg")
            k = len(rng) + len(wg)
            return self.schedule(op, op.symbol, vals[:len(rng)], vals[len(rng):k], vals[k:])
        if name == "llv.call":
            return self.abi_call(op, vals)
        raise InterpError("unsupported operation", name)

    def abi_call(self, op: Operation, vals: list):
        sym = op.symbol
        if sym == ABI_BUFFER_CTOR:
            t = sycl_elem(op.operands[0].type, "buffer")
            return self.make_buffer(op, vals[0], vals[2:], t)
        if sym in (ABI_ACCESSOR_CTOR, ABI_ACCESSOR_CTOR_RANGED):
            t = sycl_elem(op.operands[0].type, "accessor")
            n = t.dim
            extra = vals[3:] if sym == ABI_ACCESSOR_CTOR_RANGED else []
            return self.make_accessor(vals[0], vals[1], t, extra[:n], extra[n:2 * n])
        if sym == ABI_SCHEDULE_KERNEL:
            from .host import find_kernel, schedule_layout

            kname = op.attributes["kernel"].name
            kernel = find_kernel(self.m, kname)
            if kernel is None:
                raise InterpError("unresolved kernel", f"@{kname}")
            dim, nd, _ = schedule_layout(kernel)
            k = 1 + dim + (dim if nd else 0)
            return self.schedule(op, kname, vals[1:1 + dim], vals[1 + dim:k], vals[k:])
        raise InterpError("unresolved host call", f"@{sym}")

    def make_buffer(self, op: Operation, slot: Pointer, sizes: list, t: SyclType):
        shape = tuple(_int(s) for s in sizes)
        hint = op.operands[0].name_hint
        name = hint if hint and not hint.isdigit() else f"buffer{len(self.image.buffers)}"
        while name in self.image.buffers:
            self.names[name] += 1
            name = f"{name}.{self.names[name]}"
        size = int(np.prod(shape))
        st = Storage(name, "global", t.elem, size, shape)
        init = op.attributes.get("init")
        if init is not None:
            if len(init) != size:
                raise InterpError("host error", f"buffer {name} init has {len(init)} values for {size} cells")
            st.cells[:] = np.asarray(init, dtype=_dtype(t.elem))
        self.image.buffers[name] = st
        slot.storage.set(slot.base, name)
        return None

    def make_accessor(self, slot: Pointer, buf_slot: Pointer, t: SyclType, rng: list, off: list):
        bname = self.deref(buf_slot, "buffer")
        if not isinstance(bname, str):
            raise InterpError("host error", "accessor constructed before its buffer")
        shape = self.image.buffers[bname].shape
        acc = tuple(_int(x) for x in rng) if rng else shape
        offset = tuple(_int(x) for x in off) if off else (0,) * len(shape)
        slot.storage.set(slot.base, AccessorBinding(bname, shape, acc, offset, t.mode))
        return None

    def schedule(self, op: Operation, kname: str, rng: list, wg: list, args: list):
        from .host import DEAD_ARGS, find_kernel

        kernel = find_kernel(self.m, kname)
        if kernel is None:
            raise InterpError("unresolved kernel", f"@{kname}")
        params = explicit_kernel_params(kernel)
        if len(args) != len(params):
            raise InterpError("binding arity mismatch", f"@{kname} takes {len(params)} arguments, got {len(args)}")
        dead = set(op.attributes.get(DEAD_ARGS, ()))
        bound = []
        for j, (p, v) in enumerate(zip(params, args)):
            if j in dead:
                bound.append(None)
                continue
            if sycl_elem(p.type, "accessor") is not None:
                acc = self.deref(v, "accessor slot")
                if not isinstance(acc, AccessorBinding):
                    raise InterpError("host error", f"scheduling @{kname} before accessor construction")
                bound.append(_object_pointer(acc))
            elif isinstance(p.type, RefType):
                bname = self.deref(v, "buffer slot")
                if not isinstance(bname, str):
                    raise InterpError("host error", f"scheduling @{kname} before buffer construction")
                bound.append(Pointer(self.image.buffers[bname], 0, p.type.shape))
            else:
                bound.append(v)
        nd = NDRangeSpec(tuple(_int(x) for x in rng), tuple(_int(x) for x in wg) if wg else None)
        self.launch(kernel, nd, bound, dead)
        return None

    # -- kernel launch --------------------------------------------------------------------
    def launch(self, kernel: Operation, nd: NDRangeSpec, explicit: list, dead: set) -> None:
        params = kernel.arguments
        self.stats.launches += 1
        group_ranges = [range(g) for g in nd.groups]
        local_ranges = [range(w) for w in nd.local_size]
        for gid in itertools.product(*group_ranges):
            self.arena = {}
            items = list(itertools.product(*local_ranges))
            if self.reverse_items:
                items.reverse()
            gens = []
            for lid in items:
                glob = tuple(g * w + l for g, w, l in zip(gid, nd.local_size, lid))
                st = WorkItemState(glob, lid, gid, nd.global_size, nd.local_size)
                env, j = {}, 0
                for p in params:
                    if is_item_param(p):
                        env[p.id] = _object_pointer(st)
                        continue
                    a = explicit[j]
                    env[p.id] = _Unbound(p, j in dead) if a is None else a
                    j += 1
                gens.append((glob, self.run_block(kernel.body, env, st)))
                self.stats.items += 1
            self._run_group(gens)

    def _run_group(self, gens: list) -> None:
        live = gens
        while live:
            arrived, finished = [], []
            for glob, g in live:
                try:
                    arrived.append((glob, g, next(g)))
                except StopIteration:
                    finished.append(glob)
            if not arrived:
                return
            if finished:
                raise InterpError(
                    "barrier divergence",
                    f"work-item {finished[0]} finished while work-item {arrived[0][0]} waits at a barrier",
                )
            keys = {ev for _, _, ev in arrived}
            if len(keys) > 1:
                a, b = arrived[0], next(x for x in arrived if x[2] != arrived[0][2])
                raise InterpError(
                    "barrier divergence", f"work-items {a[0]} and {b[0]} wait at different barrier instances"
                )
            self.stats.barrier_waits += len(arrived)
            live = [(glob, g) for glob, g, _ in arrived]


class _Unbound:
    """Placeholder for an argument the launch did not bind; any use is an error."""

    def __init__(self, param: Value, dead: bool):
        self.param = param
        self.dead = dead


def _object_pointer(obj) -> Pointer:
    st = Storage("object", "private", None, 1)
    st.cells[0] = obj
    return Pointer(st, 0, (DYNAMIC,))


# -- entry points -----------------------------------------------------------------------


def _param_key(p: Value, j: int, bindings: dict):
    for key in (p.name_hint, str(j), j):
        if key is not None and key in bindings:
            return key
    return None


def _convert_binding(p: Value, b, image: MemoryImage):
    if isinstance(b, AccessorBinding):
        if sycl_elem(p.type, "accessor") is None:
            raise InterpError("binding arity mismatch", f"accessor bound to non-accessor parameter %{p.name_hint}")
        if b.buffer not in image.buffers:
            raise InterpError("unbound argument", f"buffer {b.buffer} does not exist")
        return _object_pointer(b)
    if isinstance(b, RefBinding):
        if not isinstance(p.type, RefType):
            raise InterpError("binding arity mismatch", f"buffer bound to scalar parameter %{p.name_hint}")
        return Pointer(image.buffers[b.buffer], b.offset, p.type.shape)
    if isinstance(p.type, RefType):
        raise InterpError("unbound argument", f"parameter %{p.name_hint} needs a buffer binding")
    if p.type == I1:
        return bool(b)
    if isinstance(p.type, FloatType):
        return (np.float32 if p.type.width == 32 else np.float64)(b)
    return wrap_int(int(b), p.type)


def run_kernel(
    m: ModuleIR,
    kernel: str,
    nd: NDRangeSpec,
    bindings: MemoryImage,
    *,
    trace: Optional[Trace] = None,
    reverse_items: bool = False,
) -> tuple[MemoryImage, ExecStats]:
    """Execute ``kernel`` over ``nd`` on a copy of ``bindings``."""
    f = m.lookup(kernel)
    if f is None:
        raise InterpError("unresolved kernel", f"@{kernel}")
    image = bindings.copy()
    stats = ExecStats()
    machine = _Machine(m, image, stats, trace, reverse_items)
    params = explicit_kernel_params(f)
    dead = set(f.attributes.get("sycl.kernel_arg_unused", ()))
    explicit = []
    for j, p in enumerate(params):
        key = _param_key(p, j, image.bindings)
        if key is None:
            explicit.append(None)
            if j not in dead:
                raise InterpError("unbound argument", f"%{p.name_hint or j} of @{kernel} has no binding")
            continue
        explicit.append(_convert_binding(p, image.bindings[key], image))
    machine.launch(f, nd, explicit, dead)
    return image, stats


def run_host_program(m: ModuleIR, entry: str, *, trace: Optional[Trace] = None) -> tuple[MemoryImage, ExecStats]:
    """Execute host function ``entry``; kernels launch at their schedule operations."""
    f = m.lookup(entry)
    if f is None or in_device_module(f):
        raise InterpError("unresolved symbol", f"@{entry} is not a host function")
    if f.arguments:
        raise InterpError("binding arity mismatch", f"host entry @{entry} must take no arguments")
    image = MemoryImage()
    stats = ExecStats()
    machine = _Machine(m, image, stats, trace)
    gen = machine.run_block(f.body, {}, WorkItemState())
    for _ in gen:
        raise InterpError("barrier divergence", "barrier executed in host code")
    return image, stats


def _bits(st: Storage) -> np.ndarray:
    arr = st.snapshot()
    if arr.dtype.kind == "f":
        return arr.view(np.uint32 if arr.dtype.itemsize == 4 else np.uint64)
    return arr


def diff_state(a: MemoryImage, b: MemoryImage) -> str:
    """Empty string iff both images hold bit-identical buffers; else the first difference."""
    if set(a.buffers) != set(b.buffers):
        raise ValueError(f"buffer sets differ: {sorted(a.buffers)} vs {sorted(b.buffers)}")
    for name in sorted(a.buffers):
        x, y = a.buffers[name], b.buffers[name]
        if x.shape != y.shape:
            return f"{name}: shape {x.shape} vs {y.shape}"
        bx, by = _bits(x), _bits(y)
        if bx.dtype != by.dtype:
            return f"{name}: element type {x.elem} vs {y.elem}"
        bad = np.nonzero(bx != by)[0]
        if bad.size:
            i = int(bad[0])
            idx = np.unravel_index(i, x.shape)
            return f"{name}[{', '.join(str(int(k)) for k in idx)}]: {format_scalar(x.get(i))} vs {format_scalar(y.get(i))}"
    return ""


def format_buffers(image: MemoryImage) -> list[str]:
    out = []
    for name in sorted(image.buffers):
        st = image.buffers[name]
        out.append(f"{name} = [{', '.join(format_scalar(st.get(i)) for i in range(len(st)))}]")
    return out


__all__ = [
    "InterpError",
    "Storage",
    "Pointer",
    "AccessorBinding",
    "RefBinding",
    "NDRangeSpec",
    "MemoryImage",
    "ExecStats",
    "WorkItemState",
    "run_kernel",
    "run_host_program",
    "diff_state",
    "format_buffers",
]
