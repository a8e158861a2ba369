"""Inter-procedural uniformity (divergence) analysis.

Each SSA value gets a point of the chain ``Uniform < Unknown < NonUniform``.
Kernel parameters are Uniform; parameters of functions whose call sites
are all visible join the actual arguments; everything else starts Unknown.
Loads additionally inherit the uniformity of the values stored by their
reaching definitions and of the branch conditions controlling those stores.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..dataflow import build_call_graph
from ..dialects import READ, UNKNOWN, effects_of, is_nonuniform_source
from ..ir.core import ModuleIR, Operation, Value
from .reachdef import ReachingDefs


class Uniformity(enum.IntEnum):
    Uniform = 0
    Unknown = 1
    NonUniform = 2

    def join(self, other: "Uniformity") -> "Uniformity":
        return max(self, other)

    def __str__(self) -> str:
        return self.name


class UniformityLattice:
    bottom = Uniformity.Uniform

    @staticmethod
    def join(a: Uniformity, b: Uniformity) -> Uniformity:
        return max(a, b)

    @staticmethod
    def leq(a: Uniformity, b: Uniformity) -> bool:
        return a <= b


U, UNK, NU = Uniformity.Uniform, Uniformity.Unknown, Uniformity.NonUniform


@dataclass
class UniformityResult:
    values: dict = field(default_factory=dict)  # value id -> Uniformity
    divergent: dict = field(default_factory=dict)  # op id -> bool
    divergent_functions: set = field(default_factory=set)

    def of(self, v: Value) -> Uniformity:
        return self.values.get(v.id, U)

    def is_divergent(self, op: Operation) -> bool:
        return self.divergent.get(op.id, False)


def _control(op: Operation, func: Operation) -> list[Value]:
    """Values that decide whether ``op`` executes within ``func``."""
    out = []
    for anc in op.ancestors():
        if anc is func:
            break
        if anc.name == "loop.if":
            out.append(anc.operands[0])
        elif anc.name == "loop.for":
            out.extend(anc.operands[:3])
    return out


class _Analysis:
    def __init__(self, m: ModuleIR):
        self.m = m
        self.cg = build_call_graph(m)
        self.res = UniformityResult()
        self.rd: dict[int, ReachingDefs] = {}
        self.changed = False

    def get(self, v: Value) -> Uniformity:
        return self.res.values.get(v.id, U)

    def set(self, v: Value, u: Uniformity) -> None:
        old = self.res.values.get(v.id, U)
        if u > old:
            self.res.values[v.id] = u
            self.changed = True

    def join_of(self, values) -> Uniformity:
        return max((self.get(v) for v in values), default=U)

    def run(self) -> UniformityResult:
        funcs = self.m.functions()
        while True:
            self.changed = False
            for f in funcs:
                self.function(f)
            if not self.changed:
                break
        return self.res

    def param_uniformity(self, f: Operation) -> list[Uniformity]:
        n = len(f.arguments)
        if f.is_kernel:
            return [U] * n
        if self.cg.has_external_callers(f.sym_name):
            return [UNK] * n
        out = [U] * n
        for site in self.cg.call_sites(f.sym_name):
            if site.name != "func.call":
                continue
            extra = UNK if self.res.divergent.get(site.id, False) else U
            for i, v in enumerate(site.operands[:n]):
                out[i] = max(out[i], self.get(v), extra)
        return out

    def function(self, f: Operation) -> None:
        for a, u in zip(f.arguments, self.param_uniformity(f)):
            self.set(a, u)
        fdiv = any(
            self.res.divergent.get(site.id, False)
            for site in self.cg.call_sites(f.sym_name)
            if site.name == "func.call"
        )
        if fdiv:
            self.res.divergent_functions.add(f.sym_name)
        for op in f.walk():
            if op is f:
                continue
            self.op(op, f)
            div = fdiv or any(self.get(c) >= UNK for c in _control(op, f))
            if div != self.res.divergent.get(op.id, False):
                self.changed = True
            self.res.divergent[op.id] = div

    def reaching(self, f: Operation) -> ReachingDefs:
        rd = self.rd.get(f.id)
        if rd is None:
            rd = self.rd[f.id] = ReachingDefs(f)
        return rd

    def stored(self, mod: Operation, f: Operation) -> Uniformity:
        effs = effects_of(mod)
        if any(e.kind == UNKNOWN for e in effs):
            return UNK
        if mod.name in ("mem.store", "llv.store"):
            u = self.get(mod.operands[0])
        elif mod.name == "sycl.constructor":
            u = self.join_of(mod.operands[1:])
        elif mod.name.startswith("llv.") or mod.name.startswith("sycl.host."):
            u = UNK
        else:
            u = self.join_of(mod.operands)
        return max(u, self.join_of(_control(mod, f)))

    def op(self, op: Operation, f: Operation) -> None:
        name = op.name
        if name == "loop.for":
            body = op.regions[0].block
            lb, ub, st = op.operands[:3]
            inits = op.operands[3:]
            term = body.terminator
            yields = term.operands if term is not None and term.name == "loop.yield" else ()
            self.set(body.args[0], self.join_of((lb, st)))
            bounds = self.join_of((lb, ub, st))
            for j, init in enumerate(inits):
                u = self.get(init)
                if j < len(yields):
                    u = max(u, self.get(yields[j]))
                self.set(body.args[j + 1], u)
                self.set(op.results[j], max(u, bounds))
            return
        if name == "loop.if":
            u = self.get(op.operands[0])
            for reg in op.regions:
                term = reg.block.terminator
                if term is not None and term.name == "loop.yield":
                    for j, v in enumerate(term.operands):
                        if j < len(op.results):
                            self.set(op.results[j], max(u, self.get(v)))
            for r in op.results:
                self.set(r, u)
            return
        if not op.results:
            return
        if is_nonuniform_source(op):
            for r in op.results:
                self.set(r, NU)
            return
        u = self.join_of(op.operands)
        effs = effects_of(op)
        if any(e.kind == UNKNOWN for e in effs):
            u = max(u, UNK)
        else:
            rd = None
            for e in effs:
                if e.kind != READ or e.value is None:
                    continue
                rd = rd or self.reaching(f)
                for mod in rd.before(op, e.value).all:
                    u = max(u, self.stored(mod, f))
        for r in op.results:
            self.set(r, u)


def compute_uniformity(m: ModuleIR) -> UniformityResult:
    """Uniformity of every value and the divergence flag of every operation."""
    return _Analysis(m).run()
