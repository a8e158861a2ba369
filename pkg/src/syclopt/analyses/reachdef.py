"""Reaching definitions split into must-modifiers (MODS) and may-modifiers (PMODS).

The analysis is computed per queried ref value. A write whose target
MustAliases the value joins MODS; when that target is a single-cell ref
(subscript results, scalar allocas, ids) the write covers the whole location
and replaces both sets on its path. A store into one element of a larger
ref keeps the earlier modifiers, which may still own other elements.
A MayAlias write, or an operation with unknown effects, is added to PMODS.
Paths are merged by component-wise union.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataflow import FixpointResult, ProgramPoint, solve_forward
from ..dialects import UNKNOWN, WRITE, effects_of
from ..ir.core import Operation, Value, enclosing_function
from ..ir.types import DYNAMIC
from .alias import AliasResult, alias


@dataclass(frozen=True)
class DefSet:
    mods: frozenset = field(default_factory=frozenset)
    pmods: frozenset = field(default_factory=frozenset)

    def join(self, other: "DefSet") -> "DefSet":
        return DefSet(self.mods | other.mods, self.pmods | other.pmods)

    def leq(self, other: "DefSet") -> bool:
        return self.mods <= other.mods and self.pmods <= other.pmods

    @property
    def all(self) -> frozenset:
        return self.mods | self.pmods

    def __bool__(self) -> bool:
        return bool(self.mods or self.pmods)


class DefSetLattice:
    bottom = DefSet()

    @staticmethod
    def join(a: DefSet, b: DefSet) -> DefSet:
        return a.join(b)

    @staticmethod
    def leq(a: DefSet, b: DefSet) -> bool:
        return a.leq(b)


def write_targets(op: Operation) -> list[Value]:
    return [e.value for e in effects_of(op) if e.kind == WRITE and e.value is not None]


def covers_whole(ref: Value) -> bool:
    """True when any write through ``ref`` overwrites everything it designates."""
    shape = getattr(ref.type, "shape", None)
    return shape is not None and DYNAMIC not in shape and int(np.prod(shape)) == 1


def defset_transfer(v: Value, alias_fn=alias):
    """Transfer function tracking the modifiers of ``v``."""

    def transfer(state: DefSet, op: Operation) -> DefSet:
        effs = effects_of(op)
        if not effs:
            return state
        if any(e.kind == UNKNOWN for e in effs):
            if op in state.mods:
                return state
            return DefSet(state.mods, state.pmods | {op})
        for e in effs:
            if e.kind != WRITE or e.value is None:
                continue
            res = alias_fn(e.value, v)
            if res is AliasResult.MustAlias and covers_whole(e.value):
                state = DefSet(frozenset({op}), frozenset())
            elif res is AliasResult.MustAlias:
                state = DefSet(state.mods | {op}, state.pmods)
            elif res is AliasResult.MayAlias and op not in state.mods:
                state = DefSet(state.mods, state.pmods | {op})
        return state

    return transfer


class ReachingDefs:
    """Per-function cache of solved reaching-definition problems, keyed by value."""

    def __init__(self, func: Operation):
        self.func = func
        self._solved: dict[int, FixpointResult] = {}

    def solve(self, v: Value) -> FixpointResult:
        res = self._solved.get(v.id)
        if res is None:
            res = solve_forward(self.func, defset_transfer(v), DefSetLattice())
            self._solved[v.id] = res
        return res

    def at(self, point: ProgramPoint, v: Value) -> DefSet:
        return self.solve(v).at(point)

    def before(self, op: Operation, v: Value) -> DefSet:
        return self.at(ProgramPoint(op, False), v)


def reaching_defs(point: ProgramPoint, v: Value) -> DefSet:
    """Operations that may have last written the memory of ``v`` at ``point``."""
    f = enclosing_function(point.op)
    if f is None:
        raise ValueError("program point is not inside a function")
    return ReachingDefs(f).at(point, v)
