"""Array reduction detection.

A loop that loads ``p[i]``, combines it through a single-use chain of
``addf``/``mulf``/``addi``/``muli`` and stores the result back to the same
invariant ``p[i]`` is rewritten to carry the running value in an
``iter_args`` slot: one load before the loop, one store after it.
"""

from __future__ import annotations

from typing import Optional

from ..analyses.alias import AliasResult, alias
from ..dialects import BARRIER, UNKNOWN, effects_of
from ..ir.core import Operation, defined_outside, erase_op, insert_after, insert_before, replace_all_uses
from .report import ChangeReport

CHAIN_OPS = frozenset({"arith.addf", "arith.mulf", "arith.addi", "arith.muli"})


def _single_user(v) -> Optional[tuple]:
    if len(v.uses) != 1:
        return None
    return v.uses[0]


def _match(loop: Operation, load: Operation) -> Optional[Operation]:
    """The store closing a reduction chain that starts at ``load``, if any."""
    body = loop.regions[0].block
    ref, idx = load.operands[0], load.operands[1:]
    if not defined_outside(ref, loop) or not all(defined_outside(v, loop) for v in idx):
        return None
    cur = load.result
    while True:
        use = _single_user(cur)
        if use is None:
            return None
        user, slot = use
        if user.parent is not body:
            return None
        if user.name in CHAIN_OPS:
            other = user.operands[1 - slot]
            if other is cur:
                return None
            cur = user.result
            continue
        if user.name == "mem.store" and slot == 0 and user.operands[1] is ref and tuple(user.operands[2:]) == tuple(idx):
            return user if cur is not load.result else None
        return None


def _const_index(values) -> Optional[tuple]:
    out = []
    for v in values:
        d = v.defining_op
        if d is None or d.name != "arith.constant":
            return None
        out.append(d.attributes["value"])
    return tuple(out)


def _other_cell(op: Operation, ref, idx: Optional[tuple]) -> bool:
    """True for a load/store on ``ref`` itself at a different constant index."""
    if idx is None or op.name not in ("mem.load", "mem.store"):
        return False
    r = 0 if op.name == "mem.load" else 1
    if op.operands[r] is not ref:
        return False
    other = _const_index(op.operands[r + 1 :])
    return other is not None and len(other) == len(idx) and other != idx


def _legal(loop: Operation, load: Operation, store: Operation) -> bool:
    ref = load.operands[0]
    idx = _const_index(load.operands[1:])
    for op in loop.walk():
        if op is loop or op is load or op is store or op.regions:
            continue
        for e in effects_of(op):
            if e.kind in (UNKNOWN, BARRIER):
                return False
            if e.value is None or _other_cell(op, ref, idx):
                continue
            if alias(e.value, ref) is not AliasResult.NoAlias:
                return False
    return True


def _rewrite(loop: Operation, load: Operation, store: Operation) -> Operation:
    body = loop.regions[0].block
    elem = load.result.type
    ref, idx = load.operands[0], load.operands[1:]
    init = insert_before(loop, Operation("mem.load", (ref, *idx), (elem,), location=load.location))

    new = Operation(
        "loop.for",
        (*loop.operands, init.result),
        [r.type for r in loop.results] + [elem],
        dict(loop.attributes),
        location=loop.location,
    )
    region = loop.regions.pop()
    region.parent = new
    new.regions.append(region)
    acc = body.add_arg(elem, "red")
    replace_all_uses(load.result, acc)
    erase_op(load)
    value = store.operands[0]
    erase_op(store)
    term = body.terminator
    if term is not None and term.name == "loop.yield":
        term.set_operands((*term.operands, value))
    else:
        body.append(Operation("loop.yield", (value,), location=loop.location))

    insert_before(loop, new)
    for old, r in zip(loop.results, new.results):
        replace_all_uses(old, r)
    erase_op(loop)
    insert_after(new, Operation("mem.store", (new.results[-1], ref, *idx), location=store.location))
    return new


def _find(loop: Operation):
    for op in loop.regions[0].block.ops:
        if op.name != "mem.load":
            continue
        store = _match(loop, op)
        if store is not None and _legal(loop, op, store):
            return op, store
    return None


def detect_reduction_function(f: Operation, report: ChangeReport) -> None:
    loops = [op for op in f.walk() if op.name == "loop.for"]
    for loop in loops:
        while True:
            found = _find(loop)
            if found is None:
                break
            loop = _rewrite(loop, *found)
            report.add(f.sym_name, "reductions")
            report.remark(f.sym_name, "rewrote array reduction into a loop-carried value")


def detect_reduction(m) -> ChangeReport:
    report = ChangeReport("detect-reduction")
    for f in m.functions():
        detect_reduction_function(f, report)
    return report
