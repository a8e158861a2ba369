"""Loop-invariant code motion that also moves memory operations.

Pure operations are hoisted freely (except integer division, which may
trap). Reads and writes are hoisted under alias-based legality rules; a
loop from which any memory operation is hoisted is versioned so that the
hoisted code only runs when the loop executes at least once, and, when
needed, only when the refs that blocked hoisting are disjoint at run time:

    if (lb < ub && disjoint(p, q) ...) { hoisted; loop' } else { loop }
"""

from __future__ import annotations

from ..analyses.alias import AliasResult, alias
from ..dialects import BARRIER, READ, UNKNOWN, WRITE, effects_of
from ..ir.core import (
    Operation,
    Value,
    clone_op,
    defined_outside,
    detach,
    insert_before,
    replace_all_uses,
)
from ..ir.types import I1
from .report import ChangeReport

VERSIONED = "licm.versioned"

_NEVER_HOIST = frozenset({"arith.divsi", "loop.yield", "func.return", "func.call", "sycl.work_group_barrier"})


def _loops_innermost_first(f: Operation) -> list[Operation]:
    out = []

    def visit(op: Operation) -> None:
        for r in op.regions:
            for b in r.blocks:
                for inner in b.ops:
                    visit(inner)
        if op.name == "loop.for":
            out.append(op)

    visit(f)
    return out


def _ops_under(op: Operation) -> list[Operation]:
    return [o for o in op.walk() if o is not op and not o.regions]


class _Plan:
    def __init__(self, loop: Operation):
        self.loop = loop
        self.body = loop.regions[0].block
        self.hoisted: list[Operation] = []
        self.hoisted_ids: set[int] = set()
        self.pairs: list[tuple[Value, Value]] = []
        inner = _ops_under(loop)
        self.blocked = any(e.kind in (UNKNOWN, BARRIER) for o in inner for e in effects_of(o))
        self.writes = [(o, e.value) for o in inner for e in effects_of(o) if e.kind == WRITE]
        self.reads = [(o, e.value) for o in inner for e in effects_of(o) if e.kind == READ]

    def invariant(self, v: Value) -> bool:
        if defined_outside(v, self.loop):
            return True
        d = v.defining_op
        return d is not None and d.id in self.hoisted_ids

    def available(self, v: Value) -> bool:
        """Usable in the guard, i.e. defined before the loop."""
        return defined_outside(v, self.loop)

    def position(self, op: Operation) -> int:
        cur = op
        while cur.parent is not self.body:
            cur = cur.parent_op
        return self.body.index_of(cur)

    def conflicts(self, target: Value, others, candidate: Operation, allow_before_hoisted: bool):
        """MayAlias pairs that must be proven disjoint, or None if hoisting is illegal."""
        pairs = []
        for o, v in others:
            if o is candidate or v is None:
                continue
            if allow_before_hoisted and o.id in self.hoisted_ids and self.position(o) < self.position(candidate):
                continue
            res = alias(target, v)
            if res is AliasResult.NoAlias:
                continue
            if res is AliasResult.MayAlias and self.available(target) and self.available(v):
                pairs.append((target, v))
                continue
            return None
        return pairs

    def try_hoist(self, op: Operation) -> bool:
        if op.regions or op.name in _NEVER_HOIST or op.id in self.hoisted_ids:
            return False
        if not all(self.invariant(v) for v in op.operands):
            return False
        effs = effects_of(op)
        kinds = {e.kind for e in effs}
        if not effs:
            return self.admit(op, [])
        if self.blocked or kinds - {READ, WRITE}:
            return False
        pairs: list = []
        pos = self.position(op)
        for e in effs:
            if e.value is None:
                return False
            if e.kind == READ:
                found = self.conflicts(e.value, self.writes, op, allow_before_hoisted=True)
            else:
                found = self.conflicts(e.value, [w for w in self.writes if w[0] is not op], op, False)
                if found is not None:
                    earlier = [(o, v) for o, v in self.reads if o is not op and self.position(o) < pos]
                    more = self.conflicts(e.value, earlier, op, False)
                    found = None if more is None else found + more
            if found is None:
                return False
            pairs.extend(found)
        return self.admit(op, pairs)

    def admit(self, op: Operation, pairs) -> bool:
        self.hoisted.append(op)
        self.hoisted_ids.add(op.id)
        for p in pairs:
            if not any((p[0] is a and p[1] is b) or (p[0] is b and p[1] is a) for a, b in self.pairs):
                self.pairs.append(p)
        return True

    def compute(self) -> None:
        changed = True
        while changed:
            changed = False
            for op in self.body.ops:
                if self.try_hoist(op):
                    changed = True
        self.hoisted.sort(key=self.body.index_of)


def _hoist_pure(plan: _Plan) -> None:
    for op in plan.hoisted:
        insert_before(plan.loop, detach(op))


def _version(plan: _Plan) -> None:
    loop = plan.loop
    loc = loop.location
    original = clone_op(loop)
    original.attributes[VERSIONED] = True

    lb, ub = loop.operands[0], loop.operands[1]
    guard_ops = [Operation("arith.cmpi", (lb, ub), (I1,), {"pred": "slt"}, location=loc)]
    cond = guard_ops[0].result
    for p, q in plan.pairs:
        d = Operation("mem.disjoint", (p, q), (I1,), location=loc)
        a = Operation("arith.andi", (cond, d.result), (I1,), location=loc)
        guard_ops += [d, a]
        cond = a.result

    # Pure ops that only depend on pre-loop values go in front of the guard.
    early_ids: set[int] = set()
    for op in plan.hoisted:
        if not effects_of(op) and all(
            plan.available(v) or (v.defining_op is not None and v.defining_op.id in early_ids)
            for v in op.operands
        ):
            early_ids.add(op.id)
            insert_before(loop, detach(op))
    for g in guard_ops:
        insert_before(loop, g)

    rtypes = [r.type for r in loop.results]
    guard = Operation("loop.if", (cond,), rtypes, regions=2, location=loc)
    insert_before(loop, guard)
    then_blk, else_blk = guard.regions[0].block, guard.regions[1].block
    for op in plan.hoisted:
        if op.id not in early_ids:
            then_blk.append(detach(op))
    old_results = list(loop.results)
    new_results = list(guard.results)
    then_blk.append(detach(loop))
    else_blk.append(original)
    if rtypes:
        # Route results through the guard: yield inner values, then redirect outer uses.
        for old, new in zip(old_results, new_results):
            replace_all_uses(old, new)
        then_blk.append(Operation("loop.yield", tuple(old_results), location=loc))
        else_blk.append(Operation("loop.yield", tuple(original.results), location=loc))


def licm_function(f: Operation, report: ChangeReport) -> None:
    for loop in _loops_innermost_first(f):
        if any(o.attributes.get(VERSIONED) for o in (loop, *loop.ancestors())):
            continue
        plan = _Plan(loop)
        plan.compute()
        if not plan.hoisted:
            continue
        report.add(f.sym_name, "hoisted", len(plan.hoisted))
        if any(effects_of(op) for op in plan.hoisted):
            _version(plan)
            report.add(f.sym_name, "versioned")
            extra = f" with {len(plan.pairs)} disjointness check(s)" if plan.pairs else ""
            report.remark(f.sym_name, f"versioned loop, hoisted {len(plan.hoisted)} op(s){extra}")
        else:
            _hoist_pure(plan)
            report.remark(f.sym_name, f"hoisted {len(plan.hoisted)} pure op(s)")


def licm(m) -> ChangeReport:
    report = ChangeReport("licm")
    for f in m.functions():
        licm_function(f, report)
    return report
