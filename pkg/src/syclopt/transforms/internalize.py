"""Loop internalization: prefetch reused global tiles into local memory.

For a 2-D ND-range kernel with a square constant work-group size ``M`` the
innermost loop ``for k in [lb, ub)`` is tiled by ``M``. Every candidate load
``X[.. gid_d ..][.. k ..]`` gets an ``M x M`` local tile that each work-item
fills with one element per outer iteration, bracketed by two group barriers:

    for t in [lb, ub) step M:
        tile[lid_d][lid_e] = X[.. gid_d ..][.. t + lid_e ..]
        barrier
        for kk in [0, M): ... tile[lid_d][kk] ...
        barrier
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..analyses.alias import constant_value
from ..analyses.memaccess import IV, THREAD, AffineAccess, classify_access, extract_access, Placement
from ..analyses.reachdef import ReachingDefs
from ..analyses.uniformity import compute_uniformity
from ..dialects import READ, effects_of, is_pure
from ..ir.core import Operation, Value, clone_op, erase_op, insert_before, replace_all_uses
from ..ir.types import I32, I64, INDEX, RefType, SyclType, sycl_elem
from .licm import VERSIONED
from .report import ChangeReport


@dataclass
class Candidate:
    load: Operation
    subscript: Operation
    access: AffineAccess
    gid_row: int
    iv_row: int
    dim: int  # thread dimension of the gid row


@dataclass
class TilingPlan:
    loop: Operation
    tile: int
    candidates: list = field(default_factory=list)

    @property
    def tile_shape(self) -> tuple:
        return (self.tile, self.tile)


def _nd_item(f: Operation) -> Value | None:
    for a in f.arguments:
        t = sycl_elem(a.type, "nd_item")
        if t is not None and t.dim == 2:
            return a
    return None


def _candidate(loop: Operation, load: Operation, rd: ReachingDefs) -> Candidate | None:
    body = loop.regions[0].block
    sub = load.operands[0].defining_op
    if sub is None or sub.name != "sycl.accessor.subscript" or sub.parent is not body:
        return None
    if len(load.operands) != 2 or constant_value(load.operands[1]) != 0:
        return None
    acc = sycl_elem(sub.operands[0].type, "accessor")
    if acc is None or acc.dim != 2 or acc.mode != "read":
        return None
    a = extract_access(sub, rd)
    if not a.is_affine or classify_access(a).placement is not Placement.Local:
        return None
    cols = [j for j, b in enumerate(a.basis) if b.kind == IV and b.loop is loop]
    if len(cols) != 1:
        return None
    jiv = cols[0]
    iv_row = gid_row = None
    for r, row in enumerate(a.matrix):
        nz = [j for j, c in enumerate(row) if c != 0]
        if nz == [jiv] and row[jiv] == 1:
            iv_row = r
        elif len(nz) == 1 and a.basis[nz[0]].kind == THREAD and row[nz[0]] == 1:
            gid_row = r
    if iv_row is None or gid_row is None or iv_row == gid_row:
        return None
    return Candidate(load, sub, a, gid_row, iv_row, a.basis[a.matrix[gid_row].index(1)].dim)


def _slice(body, roots: list[Operation], loop: Operation, ctor: Operation) -> list[Operation]:
    """Ops of ``body`` that ``roots`` depend on (through operands or the id constructor)."""
    need: dict[int, Operation] = {}
    work = list(roots) + [ctor]
    while work:
        op = work.pop()
        if op.id in need:
            continue
        need[op.id] = op
        for v in op.operands:
            d = v.defining_op
            if d is not None and d.parent is body:
                work.append(d)
    return [op for op in body.ops if op.id in need]


def _const(value, t, anchor: Operation) -> Value:
    return insert_before(anchor, Operation("arith.constant", (), (t,), {"value": value})).result


def _plan_loop(f, loop, rd, uni, report) -> TilingPlan | None:
    body = loop.regions[0].block
    if any(op.name == "loop.for" for op in loop.walk() if op is not loop):
        return None
    if any(o.attributes.get(VERSIONED) for o in (loop, *loop.ancestors())):
        return None
    cands = [c for op in body.ops if op.name == "mem.load" for c in [_candidate(loop, op, rd)] if c]
    if not cands:
        return None
    name = f.sym_name
    if uni.is_divergent(loop):
        report.remark(name, "skipped: divergent region")
        return None
    wg = f.attributes.get("sycl.wg_size")
    if not (isinstance(wg, tuple) and len(wg) == 2 and wg[0] == wg[1] and isinstance(wg[0], int) and wg[0] > 0):
        report.remark(name, "skipped: no constant square work-group size")
        return None
    m = wg[0]
    lb, ub, step = (constant_value(v) for v in loop.operands[:3])
    if None in (lb, ub, step) or step != 1 or ub <= lb or (ub - lb) % m:
        report.remark(name, "skipped: trip count not divisible by tile size")
        return None
    for c in cands:
        if c.dim not in (0, 1):
            return None
    return TilingPlan(loop, m, cands)


def _apply(f: Operation, plan: TilingPlan) -> None:
    loop, m = plan.loop, plan.tile
    body = loop.regions[0].block
    iv = body.args[0]
    nd = _nd_item(f)
    loc = loop.location

    def new(name, operands, types=(), attrs=None, anchor=loop):
        return insert_before(anchor, Operation(name, operands, types, attrs, location=loc))

    lids = []
    for d in range(2):
        dim = _const(d, I32, loop)
        raw = new("sycl.nd_item.get_local_id", (nd, dim), (I64,)).result
        lids.append(new("arith.index_cast", (raw,), (INDEX,)).result)
    group = new("sycl.nd_item.get_group", (nd,), (SyclType("group", (2,)),)).result
    c_m = _const(m, INDEX, loop)
    c0 = _const(0, INDEX, loop)
    c1 = _const(1, INDEX, loop)
    tiles = []
    for c in plan.candidates:
        elem = c.load.result.type
        tiles.append(new("mem.local_alloc", (), (RefType((m, m), elem, "local"),)).result)

    inits = loop.operands[3:]
    outer = Operation("loop.for", (loop.operands[0], loop.operands[1], c_m, *inits), [r.type for r in loop.results], regions=1, location=loc)
    obody = outer.regions[0].block
    t = obody.add_arg(INDEX, "t")
    oargs = [obody.add_arg(v.type) for v in inits]
    insert_before(loop, outer)

    def emit(block, op):
        block.append(op)
        return op

    rd = ReachingDefs(f)
    # Prefetch: each work-item copies one element of every tile.
    for c, tile in zip(plan.candidates, tiles):
        other = lids[1 - c.dim]
        kf = emit(obody, Operation("arith.addi", (t, other), (INDEX,), location=loc)).result
        ctor = next(iter(rd.before(c.subscript, c.subscript.operands[1]).mods))
        mapping = {iv.id: kf}
        for op in _slice(body, [c.load], loop, ctor):
            emit(obody, clone_op(op, mapping))
        val = mapping[c.load.result.id]
        idx = [None, None]
        idx[c.gid_row], idx[c.iv_row] = lids[c.dim], other
        emit(obody, Operation("mem.store", (val, tile, *idx), location=loc))
    emit(obody, Operation("sycl.work_group_barrier", (group,), location=loc))

    inner = Operation("loop.for", (c0, c_m, c1, *oargs), [r.type for r in loop.results], regions=1, location=loc)
    emit(obody, inner)
    ibody = inner.regions[0].block
    kk = ibody.add_arg(INDEX, "kk")
    iargs = [ibody.add_arg(v.type) for v in inits]
    k = emit(ibody, Operation("arith.addi", (t, kk), (INDEX,), location=loc)).result
    mapping = {iv.id: k}
    for old, a in zip(body.args[1:], iargs):
        mapping[old.id] = a
    by_load = {c.load.id: (c, tile) for c, tile in zip(plan.candidates, tiles)}
    for op in body.ops:
        if op.id in by_load:
            c, tile = by_load[op.id]
            idx = [None, None]
            idx[c.gid_row], idx[c.iv_row] = lids[c.dim], kk
            ld = emit(ibody, Operation("mem.load", (tile, *idx), (op.result.type,), location=op.location))
            mapping[op.result.id] = ld.result
        else:
            emit(ibody, clone_op(op, mapping))
    inner_results = list(inner.results)
    emit(obody, Operation("sycl.work_group_barrier", (group,), location=loc))
    if inner_results:
        emit(obody, Operation("loop.yield", tuple(inner_results), location=loc))

    for old, r in zip(loop.results, outer.results):
        replace_all_uses(old, r)
    erase_op(loop)
    _cleanup(ibody, obody)


def _cleanup(ibody, obody) -> None:
    """Drop subscripts, constructors and index arithmetic left dead in the inner body."""
    changed = True
    while changed:
        changed = False
        for op in reversed(list(ibody.ops)):
            if op.name == "sycl.accessor.subscript" and not op.result.uses:
                erase_op(op)
                changed = True
            elif op.name == "sycl.constructor":
                ref = op.operands[0]
                readers = [
                    u
                    for u, _ in ref.uses
                    if u is not op and any(e.kind == READ and e.value is ref for e in effects_of(u))
                ]
                if all(r.parent is obody for r in readers):
                    erase_op(op)
                    changed = True
            elif op.results and is_pure(op) and not any(r.uses for r in op.results):
                erase_op(op)
                changed = True


def loop_internalize_function(f: Operation, m, report: ChangeReport, uni=None) -> None:
    if not f.is_kernel or _nd_item(f) is None:
        return
    uni = uni or compute_uniformity(m)
    rd = ReachingDefs(f)
    plans = []
    for loop in [op for op in f.walk() if op.name == "loop.for"]:
        plan = _plan_loop(f, loop, rd, uni, report)
        if plan is not None:
            plans.append(plan)
    for plan in plans:
        _apply(f, plan)
        report.add(f.sym_name, "internalized")
        report.add(f.sym_name, "localized", len(plan.candidates))
        report.remark(
            f.sym_name,
            f"internalized loop with {len(plan.candidates)} local tile(s) of {plan.tile}x{plan.tile}",
        )


def loop_internalize(m) -> ChangeReport:
    report = ChangeReport("loop-internalize")
    uni = compute_uniformity(m)
    for f in m.kernels():
        loop_internalize_function(f, m, report, uni)
    return report
