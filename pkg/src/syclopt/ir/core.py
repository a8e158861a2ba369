"""SSA data model: values, operations, blocks, regions and modules."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from .types import TypeDesc

_ids = itertools.count()


class IRError(Exception):
    """Raised by rewrite primitives and queries on malformed input."""


@dataclass(frozen=True)
class Symbol:
    """A symbol reference attribute, printed as ``@name``."""

    name: str

    def __str__(self) -> str:
        return f"@{self.name}"


@dataclass(frozen=True)
class Location:
    file: str
    line: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}"


@dataclass
class Diagnostic:
    severity: str  # error | warning | remark
    message: str
    location: Location | None = None

    def __str__(self) -> str:
        where = f"{self.location}: " if self.location else ""
        return f"{where}{self.severity}: {self.message}"


class Value:
    """An SSA value: either an operation result or a block argument."""

    __slots__ = ("id", "type", "owner", "index", "uses", "name_hint")

    def __init__(self, type: TypeDesc, owner, index: int, name_hint: str | None = None):
        self.id = next(_ids)
        self.type = type
        self.owner = owner
        self.index = index
        self.uses: list[tuple[Operation, int]] = []
        self.name_hint = name_hint

    @property
    def is_block_arg(self) -> bool:
        return isinstance(self.owner, Block)

    @property
    def defining_op(self) -> Optional["Operation"]:
        return None if self.is_block_arg else self.owner

    @property
    def parent_block(self) -> Optional["Block"]:
        return self.owner if self.is_block_arg else self.owner.parent

    @property
    def users(self) -> list["Operation"]:
        seen: dict[int, Operation] = {}
        for op, _ in self.uses:
            seen.setdefault(op.id, op)
        return list(seen.values())

    def has_uses(self) -> bool:
        return bool(self.uses)

    def __repr__(self) -> str:
        hint = self.name_hint or f"v{self.id}"
        return f"<Value %{hint}: {self.type}>"


class Operation:
    """A generic operation.

    ``segments`` optionally splits the leading operands into labelled groups,
    printed as ``[label %a, %b]`` ahead of the parenthesised operand list.
    """

    def __init__(
        self,
        name: str,
        operands=(),
        result_types=(),
        attributes: dict | None = None,
        regions: int = 0,
        segments: tuple = (),
        location: Location | None = None,
        result_names=None,
    ):
        self.id = next(_ids)
        self.name = name
        self._operands: list[Value] = []
        self.results = [
            Value(t, self, i, result_names[i] if result_names else None)
            for i, t in enumerate(result_types)
        ]
        self.attributes: dict = dict(attributes or {})
        self.regions: list[Region] = []
        for _ in range(regions):
            self.add_region()
        self.segments: tuple = tuple(segments)
        self.location = location
        self.parent: Optional[Block] = None
        for v in operands:
            self._add_operand(v)

    # -- operands -----------------------------------------------------------
    @property
    def operands(self) -> tuple:
        return tuple(self._operands)

    def _add_operand(self, v: Value) -> None:
        if not isinstance(v, Value):
            raise IRError(f"operand of {self.name} is not a value: {v!r}")
        v.uses.append((self, len(self._operands)))
        self._operands.append(v)

    def set_operand(self, i: int, v: Value) -> None:
        old = self._operands[i]
        old.uses.remove((self, i))
        v.uses.append((self, i))
        self._operands[i] = v

    def set_operands(self, values) -> None:
        self.drop_operands()
        for v in values:
            self._add_operand(v)

    def drop_operands(self) -> None:
        for i, v in enumerate(self._operands):
            v.uses.remove((self, i))
        self._operands = []

    def segment(self, label: str) -> tuple:
        """Operands belonging to the labelled segment (or the trailing main group for '')."""
        start = 0
        for lab, count in self.segments:
            if lab == label:
                return tuple(self._operands[start:start + count])
            start += count
        if label == "":
            return tuple(self._operands[start:])
        return ()

    @property
    def main_operands(self) -> tuple:
        return self.segment("")

    # -- results / structure -------------------------------------------------
    @property
    def result(self) -> Value:
        if len(self.results) != 1:
            raise IRError(f"{self.name} has {len(self.results)} results")
        return self.results[0]

    def add_region(self) -> "Region":
        r = Region(self)
        self.regions.append(r)
        return r

    @property
    def parent_op(self) -> Optional["Operation"]:
        if self.parent is None or self.parent.parent is None:
            return None
        return self.parent.parent.parent

    def ancestors(self) -> Iterator["Operation"]:
        op = self.parent_op
        while op is not None:
            yield op
            op = op.parent_op

    def is_ancestor_of(self, other: "Operation") -> bool:
        return any(a is self for a in other.ancestors())

    def enclosing(self, name: str) -> Optional["Operation"]:
        for a in self.ancestors():
            if a.name == name:
                return a
        return None

    def walk(self) -> Iterator["Operation"]:
        """Pre-order walk over this op and everything nested inside it."""
        yield self
        for r in self.regions:
            for b in r.blocks:
                for op in list(b.ops):
                    yield from op.walk()

    @property
    def symbol(self) -> Optional[str]:
        s = self.attributes.get("callee")
        return s.name if isinstance(s, Symbol) else None

    @property
    def spec(self):
        from ..dialects import lookup

        return lookup(self.name)

    # -- function helpers ----------------------------------------------------
    @property
    def sym_name(self) -> Optional[str]:
        s = self.attributes.get("sym_name")
        return s.name if isinstance(s, Symbol) else None

    @property
    def body(self) -> "Block":
        return self.regions[0].block

    @property
    def arguments(self) -> list[Value]:
        return self.body.args

    @property
    def is_kernel(self) -> bool:
        return self.name == "func.func" and self.attributes.get("sycl.kernel") is True

    def __repr__(self) -> str:
        return f"<Operation {self.name} #{self.id}>"


class Block:
    def __init__(self, parent: Optional["Region"] = None):
        self.id = next(_ids)
        self.args: list[Value] = []
        self.ops: list[Operation] = []
        self.parent = parent

    def add_arg(self, type: TypeDesc, name_hint: str | None = None) -> Value:
        v = Value(type, self, len(self.args), name_hint)
        self.args.append(v)
        return v

    def append(self, op: Operation) -> Operation:
        if op.parent is not None:
            raise IRError(f"{op.name} is already attached to a block")
        op.parent = self
        self.ops.append(op)
        return op

    def index_of(self, op: Operation) -> int:
        for i, o in enumerate(self.ops):
            if o is op:
                return i
        raise IRError(f"{op.name} is not in this block")

    @property
    def terminator(self) -> Optional[Operation]:
        if self.ops and self.ops[-1].name in ("func.return", "loop.yield"):
            return self.ops[-1]
        return None

    @property
    def parent_op(self) -> Optional[Operation]:
        return self.parent.parent if self.parent else None


class Region:
    def __init__(self, parent: Optional[Operation] = None):
        self.parent = parent
        self.blocks: list[Block] = [Block(self)]

    @property
    def block(self) -> Block:
        return self.blocks[0]


class ModuleIR:
    """A top-level module holding host functions and at most one device module."""

    def __init__(self, op: Operation | None = None):
        if op is None:
            op = Operation("module", regions=1)
        self.op = op

    @property
    def body(self) -> Block:
        return self.op.body

    def walk(self) -> Iterator[Operation]:
        return self.op.walk()

    def functions(self) -> list[Operation]:
        return [op for op in self.walk() if op.name == "func.func"]

    def host_functions(self) -> list[Operation]:
        return [f for f in self.functions() if not in_device_module(f)]

    def kernels(self) -> list[Operation]:
        return [f for f in self.functions() if f.is_kernel]

    @property
    def device_module(self) -> Optional[Operation]:
        for op in self.body.ops:
            if op.name == "module" and op.attributes.get("sycl.device") is True:
                return op
        return None

    def lookup(self, name: str) -> Optional[Operation]:
        for f in self.functions():
            if f.sym_name == name:
                return f
        return None

    def __repr__(self) -> str:
        return f"<ModuleIR with {len(self.functions())} functions>"


def in_device_module(op: Operation) -> bool:
    return any(
        a.name == "module" and a.attributes.get("sycl.device") is True for a in op.ancestors()
    )


def enclosing_function(op: Operation) -> Optional[Operation]:
    return op.enclosing("func.func")


def value_function(v: Value) -> Optional[Operation]:
    if v.is_block_arg:
        owner = v.owner.parent_op
        return owner if owner is not None and owner.name == "func.func" else enclosing_function(owner)
    return enclosing_function(v.owner)


# -- dominance -----------------------------------------------------------------


def _ancestor_in(block: Block, op: Operation) -> Optional[Operation]:
    """The op in ``block`` that is ``op`` or encloses it, if any."""
    cur: Optional[Operation] = op
    while cur is not None:
        if cur.parent is block:
            return cur
        cur = cur.parent_op
    return None


def dominates(a: Operation, b: Operation) -> bool:
    """True iff every execution path reaching ``b`` passes through ``a``.

    Structured control flow makes this a lexical question: ``a`` dominates
    ``b`` when ``b`` is ``a``, is nested in ``a``, or sits (possibly nested)
    after ``a`` in ``a``'s block.
    """
    fa, fb = enclosing_function(a), enclosing_function(b)
    if fa is None or fb is None or fa is not fb:
        raise IRError("dominance queried across different functions")
    if a is b or a.is_ancestor_of(b):
        return True
    anc = _ancestor_in(a.parent, b)
    if anc is None:
        return False
    blk = a.parent
    return blk.index_of(a) < blk.index_of(anc)


def properly_dominates_use(v: Value, user: Operation) -> bool:
    """SSA visibility of ``v`` at ``user``."""
    if v.is_block_arg:
        blk = v.owner
        return _ancestor_in(blk, user) is not None
    d = v.owner
    if d is user or d.is_ancestor_of(user) or d.parent is None:
        return False
    anc = _ancestor_in(d.parent, user)
    if anc is None:
        return False
    return d.parent.index_of(d) < d.parent.index_of(anc)


def defined_outside(v: Value, op: Operation) -> bool:
    """True if ``v`` is defined outside the regions of ``op``."""
    if v.is_block_arg:
        owner = v.owner.parent_op
        return not (owner is op or (owner is not None and op.is_ancestor_of(owner)))
    d = v.owner
    return not (d is op or op.is_ancestor_of(d))


# -- rewrite primitives ------------------------------------------------------


def insert_before(anchor: Operation, op: Operation) -> Operation:
    blk = anchor.parent
    if blk is None:
        raise IRError("anchor is detached")
    if op.parent is not None:
        raise IRError(f"{op.name} is already attached")
    op.parent = blk
    blk.ops.insert(blk.index_of(anchor), op)
    return op


def insert_after(anchor: Operation, op: Operation) -> Operation:
    blk = anchor.parent
    if blk is None:
        raise IRError("anchor is detached")
    if op.parent is not None:
        raise IRError(f"{op.name} is already attached")
    op.parent = blk
    blk.ops.insert(blk.index_of(anchor) + 1, op)
    return op


def detach(op: Operation) -> Operation:
    """Unlink ``op`` from its block, keeping its operands and uses intact."""
    blk = op.parent
    if blk is not None:
        del blk.ops[blk.index_of(op)]
        op.parent = None
    return op


def move_before(anchor: Operation, op: Operation) -> None:
    insert_before(anchor, detach(op))


def _drop_all(op: Operation) -> None:
    for r in op.regions:
        for b in r.blocks:
            for inner in b.ops:
                _drop_all(inner)
    op.drop_operands()


def erase_op(op: Operation) -> None:
    """Remove ``op`` (and its nested ops); its results must be unused."""
    nested = {o.id for o in op.walk()}
    for o in op.walk():
        for r in o.results:
            if any(u.id not in nested for u, _ in r.uses):
                raise IRError(f"cannot erase {op.name}: result still has uses")
        for r in o.regions:
            for b in r.blocks:
                for a in b.args:
                    if any(u.id not in nested for u, _ in a.uses):
                        raise IRError(f"cannot erase {op.name}: region argument still has uses")
    detach(op)
    _drop_all(op)


def replace_all_uses(old: Value, new: Value) -> int:
    if old.type != new.type:
        raise IRError(f"type mismatch replacing {old.type} with {new.type}")
    uses = list(old.uses)
    for op, i in uses:
        op.set_operand(i, new)
    return len(uses)


def clone_op(op: Operation, mapping: dict | None = None) -> Operation:
    """Deep-copy ``op``; operands are remapped through ``mapping`` (which is updated)."""
    mapping = {} if mapping is None else mapping
    new = Operation(
        op.name,
        [mapping.get(v.id, v) for v in op.operands],
        [r.type for r in op.results],
        dict(op.attributes),
        0,
        op.segments,
        op.location,
        [r.name_hint for r in op.results],
    )
    for old_r, new_r in zip(op.results, new.results):
        mapping[old_r.id] = new_r
    for r in op.regions:
        new.regions.append(clone_region(r, mapping, new))
    return new


def clone_region(region: Region, mapping: dict | None = None, parent: Operation | None = None) -> Region:
    mapping = {} if mapping is None else mapping
    new = Region(parent)
    new.blocks = []
    for b in region.blocks:
        nb = Block(new)
        for a in b.args:
            mapping[a.id] = nb.add_arg(a.type, a.name_hint)
        for op in b.ops:
            nb.append(clone_op(op, mapping))
        new.blocks.append(nb)
    return new


def structurally_equal(a, b) -> bool:
    """Compare two modules or operations up to value identities."""
    if isinstance(a, ModuleIR):
        a = a.op
    if isinstance(b, ModuleIR):
        b = b.op
    env: dict[int, int] = {}

    def same_value(x: Value, y: Value) -> bool:
        return env.get(x.id) == y.id

    def bind(x: Value, y: Value) -> bool:
        if x.type != y.type:
            return False
        env[x.id] = y.id
        return True

    def eq_op(x: Operation, y: Operation) -> bool:
        if (x.name, x.attributes, x.segments) != (y.name, y.attributes, y.segments):
            return False
        if len(x.operands) != len(y.operands) or len(x.results) != len(y.results):
            return False
        if not all(same_value(p, q) for p, q in zip(x.operands, y.operands)):
            return False
        if len(x.regions) != len(y.regions):
            return False
        for rx, ry in zip(x.regions, y.regions):
            if len(rx.blocks) != len(ry.blocks):
                return False
            for bx, by in zip(rx.blocks, ry.blocks):
                if len(bx.args) != len(by.args) or len(bx.ops) != len(by.ops):
                    return False
                if not all(bind(p, q) for p, q in zip(bx.args, by.args)):
                    return False
                if not all(eq_op(p, q) for p, q in zip(bx.ops, by.ops)):
                    return False
        return all(bind(p, q) for p, q in zip(x.results, y.results))

    return eq_op(a, b)
