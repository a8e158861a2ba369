"""Forward dataflow over structured regions, plus call-graph construction.

The IR only has structured control flow, so the solver walks regions
directly instead of building a CFG: the state after ``loop.if`` is the join
of both branch exits, and a ``loop.for`` body is iterated until its entry
state (join of the pre-loop state and the back edge) stops changing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Generic, Hashable, Protocol, TypeVar

import networkx as nx

from .ir.core import ModuleIR, Operation

S = TypeVar("S")

DEFAULT_CAP = 10_000


class Lattice(Protocol[S]):
    bottom: S

    def join(self, a: S, b: S) -> S: ...

    def leq(self, a: S, b: S) -> bool: ...


class FixpointCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ProgramPoint:
    """The position immediately before (``after=False``) or after an operation."""

    op: Operation
    after: bool = False

    def __str__(self) -> str:
        return f"{'after' if self.after else 'before'} {self.op.name}#{self.op.id}"


@dataclass
class FixpointResult(Generic[S]):
    before: dict = field(default_factory=dict)
    after: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False
    exit: Any = None

    def at(self, point: ProgramPoint) -> S:
        table = self.after if point.after else self.before
        return table[point.op.id]

    def state_before(self, op: Operation) -> S:
        return self.before[op.id]

    def state_after(self, op: Operation) -> S:
        return self.after[op.id]


class _Solver:
    def __init__(self, transfer, lattice, cap: int):
        self.transfer = transfer
        self.lattice = lattice
        self.cap = cap
        self.visits: dict[int, int] = {}
        self.result = FixpointResult()

    def _visit(self, op: Operation) -> None:
        n = self.visits.get(op.id, 0) + 1
        if n > self.cap:
            raise FixpointCapExceeded(f"fixpoint cap exceeded at {op.name} ({self.cap} visits)")
        self.visits[op.id] = n
        self.result.iterations += 1

    def block(self, block, state):
        for op in block.ops:
            state = self.op(op, state)
        return state

    def op(self, op: Operation, state):
        self._visit(op)
        self.result.before[op.id] = state
        lat = self.lattice
        if op.name == "loop.if":
            then_out = self.block(op.regions[0].block, state)
            else_out = self.block(op.regions[1].block, state) if len(op.regions) > 1 else state
            out = lat.join(then_out, else_out)
        elif op.name == "loop.for":
            head = state
            while True:
                body_out = self.block(op.regions[0].block, head)
                new_head = lat.join(state, body_out)
                if lat.leq(new_head, head):
                    break
                head = new_head
                self._visit(op)
            out = head
        elif op.regions:
            out = state
            for r in op.regions:
                out = self.block(r.block, out)
        else:
            out = self.transfer(state, op)
        self.result.after[op.id] = out
        return out


def solve_forward(
    root: Operation,
    transfer: Callable[[Any, Operation], Any],
    lattice,
    entry=None,
    cap: int = DEFAULT_CAP,
) -> FixpointResult:
    """Run a forward analysis over the body of ``root`` (typically a function).

    ``transfer`` is applied to every non-region operation. ``entry`` defaults
    to the lattice bottom.
    """
    solver = _Solver(transfer, lattice, cap)
    state = lattice.bottom if entry is None else entry
    out = state
    for r in root.regions:
        out = solver.block(r.block, out)
    solver.result.exit = out
    solver.result.converged = True
    return solver.result


# -- call graph ----------------------------------------------------------------


@dataclass
class CallGraph:
    graph: nx.MultiDiGraph
    functions: dict[str, Operation]
    external: dict[str, bool]

    def call_sites(self, callee: str) -> list[Operation]:
        if callee not in self.graph:
            return []
        return [d["site"] for _, _, d in self.graph.in_edges(callee, data=True)]

    def callees(self, caller: str) -> set[str]:
        return set(self.graph.successors(caller)) if caller in self.graph else set()

    def has_external_callers(self, name: str) -> bool:
        return self.external.get(name, True)

    def cycles(self) -> list[list[str]]:
        return [sorted(c) for c in nx.simple_cycles(nx.DiGraph(self.graph))]

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(a, b) for a, b, _ in self.graph.edges(keys=True)]


def _call_target(op: Operation) -> str | None:
    if op.name in ("func.call", "sycl.host.schedule_kernel"):
        return op.symbol
    if op.name == "llv.call" and op.symbol == "sycl_schedule_kernel":
        k = op.attributes.get("kernel")
        return getattr(k, "name", None)
    return None


def build_call_graph(m: ModuleIR) -> CallGraph:
    """Call graph over functions; schedule sites add host-to-kernel edges.

    A function has external callers unless it is marked ``linkage = internal``.
    Kernels are treated as having no external callers when the module holds
    host code, since every launch is then visible.
    """
    g = nx.MultiDiGraph()
    funcs: dict[str, Operation] = {}
    for f in m.functions():
        funcs[f.sym_name] = f
        g.add_node(f.sym_name)
    for f in m.functions():
        for op in f.walk():
            target = _call_target(op)
            if target is not None and target in funcs:
                g.add_edge(f.sym_name, target, site=op)
    joint = bool(m.host_functions())
    external = {}
    for name, f in funcs.items():
        if f.attributes.get("linkage") == "internal":
            external[name] = False
        elif f.is_kernel:
            external[name] = not joint
        else:
            external[name] = True
    return CallGraph(g, funcs, external)


# -- small reusable lattices -------------------------------------------------------


class SetUnionLattice:
    """Powerset lattice with union as join."""

    bottom: frozenset = frozenset()

    def join(self, a: frozenset, b: frozenset) -> frozenset:
        return a | b

    def leq(self, a: frozenset, b: frozenset) -> bool:
        return a <= b


__all__ = [
    "Lattice",
    "ProgramPoint",
    "FixpointResult",
    "FixpointCapExceeded",
    "solve_forward",
    "CallGraph",
    "build_call_graph",
    "SetUnionLattice",
    "Hashable",
]
