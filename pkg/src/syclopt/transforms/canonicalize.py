"""Constant folding, constant-branch elimination and dead pure-op removal."""

from __future__ import annotations

from ..dialects import effects_of
from ..ir.core import ModuleIR, Operation, detach, erase_op, insert_before, replace_all_uses
from ..semantics import FOLDABLE, ArithError, evaluate, from_attr, to_attr
from .report import ChangeReport


def _const(v):
    d = v.defining_op
    if d is not None and d.name == "arith.constant":
        return from_attr(d.attributes["value"], v.type)
    return None


def make_constant(value, t, location=None) -> Operation:
    return Operation("arith.constant", (), (t,), {"value": to_attr(value, t)}, location=location)


def _fold(op: Operation) -> bool:
    vals = [_const(v) for v in op.operands]
    if any(v is None for v in vals):
        return False
    try:
        r = evaluate(op.name, vals, op.result.type, op.attributes)
    except ArithError:
        return False
    c = insert_before(op, make_constant(r, op.result.type, op.location))
    replace_all_uses(op.result, c.result)
    erase_op(op)
    return True


def _inline_if(op: Operation) -> bool:
    cond = _const(op.operands[0])
    if cond is None:
        return False
    taken = op.regions[0] if cond else (op.regions[1] if len(op.regions) > 1 else None)
    if taken is not None:
        blk = taken.block
        term = blk.terminator
        yields = list(term.operands) if term is not None and term.name == "loop.yield" else []
        for o in list(blk.ops):
            if o.name == "loop.yield":
                continue
            insert_before(op, detach(o))
        for r, y in zip(op.results, yields):
            replace_all_uses(r, y)
    erase_op(op)
    return True


def _is_dead(op: Operation) -> bool:
    if op.name in ("func.return", "loop.yield", "func.func", "module"):
        return False
    if any(r.uses for r in op.results):
        return False
    return not effects_of(op)


def _attached(op: Operation, f: Operation) -> bool:
    return any(a is f for a in op.ancestors())


def canonicalize_function(f: Operation, report: ChangeReport) -> None:
    name = f.sym_name
    while True:
        changed = False
        for op in list(f.walk()):
            if op is f or not _attached(op, f):
                continue
            if op.name in FOLDABLE and _fold(op):
                report.add(name, "folded")
                changed = True
            elif op.name == "loop.if" and _inline_if(op):
                report.add(name, "folded")
                changed = True
        for op in reversed(list(f.walk())):
            if op is f or not _attached(op, f):
                continue
            if _is_dead(op):
                erase_op(op)
                report.add(name, "erased")
                changed = True
        if not changed:
            return


def canonicalize(m: ModuleIR) -> ChangeReport:
    report = ChangeReport("canonicalize")
    for f in m.functions():
        canonicalize_function(f, report)
    return report
