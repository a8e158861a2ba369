"""Affine memory-access analysis for accessor subscripts.

An access is described by an integer matrix ``A`` and offset vector ``b``
such that the subscript index equals ``A @ x + b``, where ``x`` stacks the
work-item global ids (dimension order) followed by the enclosing loop
induction variables (outer to inner).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

from ..dialects import is_nonuniform_source
from ..ir.core import Operation, Value, enclosing_function
from ..ir.types import sycl_elem
from .alias import constant_value
from .reachdef import ReachingDefs

THREAD = "thread"
IV = "iv"
_AXES = "xyz"


@dataclass(frozen=True, eq=False)
class BasisVar:
    kind: str  # THREAD or IV
    name: str
    dim: Optional[int] = None
    loop: Optional[Operation] = None

    def __repr__(self) -> str:
        return self.name


@dataclass
class AffineAccess:
    op: Operation
    basis: list
    matrix: list
    offsets: list
    is_affine: bool = field(default=True, init=False)

    @property
    def thread_columns(self) -> list[int]:
        return [j for j, b in enumerate(self.basis) if b.kind == THREAD]

    @property
    def iv_columns(self) -> list[int]:
        return [j for j, b in enumerate(self.basis) if b.kind == IV]

    def columns(self, cols) -> list[list[int]]:
        return [[row[j] for j in cols] for row in self.matrix]

    def inter(self) -> list[list[int]]:
        """Inter-work-item submatrix: loop induction columns removed."""
        return self.columns(self.thread_columns)

    def intra(self) -> list[list[int]]:
        """Intra-work-item submatrix: thread columns removed."""
        return self.columns(self.iv_columns)

    def evaluate(self, x) -> list[int]:
        return [sum(c * xi for c, xi in zip(row, x)) + b for row, b in zip(self.matrix, self.offsets)]

    def basis_names(self) -> list[str]:
        return [b.name for b in self.basis]


@dataclass
class NotAffine:
    op: Operation
    reason: str
    is_affine: bool = field(default=False, init=False)


class Placement(enum.Enum):
    Global = "Global"
    Local = "Local"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class AccessClassification:
    coalescable: bool
    temporal_reuse: bool
    placement: Placement


def _item_dims(func: Operation) -> int:
    for op in func.walk():
        if op.name.startswith("sycl.nd_item.") or op.name.startswith("sycl.item."):
            t = sycl_elem(op.operands[0].type)
            if t is not None:
                return t.dim
    for a in func.arguments:
        t = sycl_elem(a.type, "nd_item") or sycl_elem(a.type, "item")
        if t is not None:
            return t.dim
    return 0


def enclosing_loops(op: Operation, func: Operation) -> list[Operation]:
    loops = []
    for anc in op.ancestors():
        if anc is func:
            break
        if anc.name == "loop.for":
            loops.append(anc)
    return loops[::-1]


def make_basis(op: Operation, func: Operation) -> list[BasisVar]:
    n = _item_dims(func)
    basis = [BasisVar(THREAD, f"gid_{_AXES[d]}", dim=d) for d in range(n)]
    for k, loop in enumerate(enclosing_loops(op, func)):
        iv = loop.regions[0].block.args[0]
        hint = iv.name_hint if iv.name_hint and not iv.name_hint.isdigit() else f"iv{k}"
        basis.append(BasisVar(IV, hint, loop=loop))
    return basis


class _NotAffine(Exception):
    pass


def linear_form(v: Value, basis: list[BasisVar]) -> tuple[list[int], int]:
    """Express ``v`` as coefficients over ``basis`` plus a constant."""
    n = len(basis)
    c = constant_value(v)
    if isinstance(c, int) and not isinstance(c, bool):
        return [0] * n, c
    if v.is_block_arg:
        for j, b in enumerate(basis):
            if b.kind == IV and b.loop.regions[0].block.args[0] is v:
                coeffs = [0] * n
                coeffs[j] = 1
                return coeffs, 0
        raise _NotAffine("value is not a basis variable")
    d = v.defining_op
    name = d.name
    if name == "arith.index_cast":
        return linear_form(d.operands[0], basis)
    if name in ("sycl.nd_item.get_global_id", "sycl.item.get_id"):
        dim = constant_value(d.operands[1])
        for j, b in enumerate(basis):
            if b.kind == THREAD and b.dim == dim:
                coeffs = [0] * n
                coeffs[j] = 1
                return coeffs, 0
        raise _NotAffine("thread index outside the item dimensionality")
    if name in ("arith.addi", "arith.subi"):
        (ca, ka), (cb, kb) = linear_form(d.operands[0], basis), linear_form(d.operands[1], basis)
        s = 1 if name == "arith.addi" else -1
        return [x + s * y for x, y in zip(ca, cb)], ka + s * kb
    if name == "arith.muli":
        (ca, ka), (cb, kb) = linear_form(d.operands[0], basis), linear_form(d.operands[1], basis)
        if not any(ca):
            return [ka * y for y in cb], ka * kb
        if not any(cb):
            return [kb * x for x in ca], ka * kb
        raise _NotAffine("product of two variables")
    if is_nonuniform_source(d):
        raise _NotAffine(f"non-basis work-item index '{name}'")
    raise _NotAffine(f"non-affine operation '{name}'")


def extract_access(acc_op: Operation, rd: ReachingDefs | None = None) -> Union[AffineAccess, NotAffine]:
    """Access matrix of a ``sycl.accessor.subscript``; NotAffine when not expressible."""
    if acc_op.name != "sycl.accessor.subscript":
        raise ValueError(f"extract_access expects sycl.accessor.subscript, got {acc_op.name}")
    func = enclosing_function(acc_op)
    rd = rd or ReachingDefs(func)
    id_ref = acc_op.operands[1]
    defs = rd.before(acc_op, id_ref)
    if defs.pmods or len(defs.mods) != 1:
        return NotAffine(acc_op, "id is not defined by a unique constructor")
    ctor = next(iter(defs.mods))
    if ctor.name != "sycl.constructor" or ctor.operands[0] is not id_ref:
        return NotAffine(acc_op, "id is not defined by a unique constructor")
    basis = make_basis(acc_op, func)
    matrix, offsets = [], []
    try:
        for idx in ctor.operands[1:]:
            row, k = linear_form(idx, basis)
            matrix.append(row)
            offsets.append(k)
    except _NotAffine as e:
        return NotAffine(acc_op, str(e))
    return AffineAccess(acc_op, basis, matrix, offsets)


def _is_linear(a: AffineAccess, sign: int) -> bool:
    threads = [j for j, b in enumerate(a.basis) if b.kind == THREAD]
    if not threads or not a.matrix:
        return False
    fastest = max(threads, key=lambda j: a.basis[j].dim)
    last = len(a.matrix) - 1
    for i, row in enumerate(a.matrix):
        want = sign if i == last else 0
        if row[fastest] != want:
            return False
    return all(a.matrix[last][j] == 0 for j in threads if j != fastest)


def classify_access(a: AffineAccess) -> AccessClassification:
    coalescable = _is_linear(a, 1) or _is_linear(a, -1)
    reuse = any(x != 0 for row in a.intra() for x in row)
    placement = Placement.Local if (reuse or not coalescable) else Placement.Global
    return AccessClassification(coalescable, reuse, placement)
