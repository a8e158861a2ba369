"""Deterministic textual printer.

Values are renumbered ``%0, %1, ...`` per function in definition order, so
two modules that differ only in value identities print identically.
"""

from __future__ import annotations

from .core import ModuleIR, Operation, Symbol, Value

INDENT = "  "

# Attributes rendered by the custom syntax instead of the attribute dictionary.
_HIDDEN = {"func.func": ("sym_name", "result_types")}


def format_attr_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(format_attr_value(x) for x in v) + "]"
    return str(v)


def format_attr_dict(attrs: dict, skip=()) -> str:
    keys = sorted(k for k in attrs if k not in skip)
    if not keys:
        return ""
    return "{" + ", ".join(f"{k} = {format_attr_value(attrs[k])}" for k in keys) + "}"


def format_types(types, bare_single: bool = True) -> str:
    types = list(types)
    if len(types) == 1 and bare_single:
        return str(types[0])
    return "(" + ", ".join(str(t) for t in types) + ")"


class Namer:
    """Assigns ``%N`` names to values, restarting at 0 for each function."""

    def __init__(self):
        self.names: dict[int, str] = {}
        self.counter = 0

    def reset(self) -> None:
        self.counter = 0

    def define(self, v: Value) -> str:
        name = f"%{self.counter}"
        self.counter += 1
        self.names[v.id] = name
        return name

    def __call__(self, v: Value) -> str:
        return self.names.get(v.id, f"%<unnamed:{v.id}>")

    def number_function(self, func: Operation) -> None:
        self.reset()
        for a in func.arguments:
            self.define(a)
        for op in func.body.ops:
            self._number_op(op)

    def _number_op(self, op: Operation) -> None:
        for r in op.results:
            self.define(r)
        for region in op.regions:
            for b in region.blocks:
                for a in b.args:
                    self.define(a)
                for inner in b.ops:
                    self._number_op(inner)


class Printer:
    def __init__(self, locations: bool = False):
        self.locations = locations
        self.namer = Namer()
        self.lines: list[str] = []

    def emit(self, depth: int, text: str, op: Operation | None = None) -> None:
        if self.locations and op is not None and op.location is not None:
            text = f"{text}  // loc: {op.location}"
        self.lines.append(INDENT * depth + text)

    def print_module_op(self, op: Operation, depth: int = 0) -> None:
        attrs = format_attr_dict(op.attributes)
        self.emit(depth, "module " + (attrs + " " if attrs else "") + "{", op)
        for inner in op.body.ops:
            if inner.name == "module":
                self.print_module_op(inner, depth + 1)
            else:
                self.print_func(inner, depth + 1)
        self.emit(depth, "}")

    def print_func(self, f: Operation, depth: int) -> None:
        self.namer.number_function(f)
        n = self.namer
        args = ", ".join(f"{n(a)}: {a.type}" for a in f.arguments)
        head = f"func @{f.sym_name}({args})"
        rtypes = f.attributes.get("result_types") or ()
        if rtypes:
            head += " -> " + format_types(rtypes)
        attrs = format_attr_dict(f.attributes, _HIDDEN["func.func"])
        if attrs:
            head += " " + attrs
        self.emit(depth, head + " {", f)
        self.print_block_ops(f.body, depth + 1)
        self.emit(depth, "}")

    def print_block_ops(self, block, depth: int) -> None:
        for op in block.ops:
            if op.name == "loop.yield" and not op.operands:
                continue
            self.print_op(op, depth)

    def _results_prefix(self, op: Operation) -> str:
        if not op.results:
            return ""
        return ", ".join(self.namer(r) for r in op.results) + " = "

    def print_op(self, op: Operation, depth: int) -> None:
        n = self.namer
        if op.name == "loop.for":
            body = op.regions[0].block
            lb, ub, st = op.operands[:3]
            text = (
                f"{self._results_prefix(op)}loop.for {n(body.args[0])} = {n(lb)} to {n(ub)} step {n(st)}"
            )
            inits = op.operands[3:]
            if inits:
                pairs = ", ".join(f"{n(a)} = {n(i)}" for a, i in zip(body.args[1:], inits))
                text += f" iter_args({pairs})"
            attrs = format_attr_dict(op.attributes)
            if attrs:
                text += " " + attrs
            self.emit(depth, text + " {", op)
            self.print_block_ops(body, depth + 1)
            self.emit(depth, "}")
            return
        if op.name == "loop.if":
            text = f"{self._results_prefix(op)}loop.if {n(op.operands[0])}"
            if op.results:
                text += " -> " + format_types(r.type for r in op.results)
            attrs = format_attr_dict(op.attributes)
            if attrs:
                text += " " + attrs
            self.emit(depth, text + " {", op)
            self.print_block_ops(op.regions[0].block, depth + 1)
            if len(op.regions) > 1:
                self.emit(depth, "} else {")
                self.print_block_ops(op.regions[1].block, depth + 1)
            self.emit(depth, "}")
            return
        text = self._results_prefix(op) + op.name
        callee = op.attributes.get("callee")
        skip = ()
        if isinstance(callee, Symbol):
            text += f" {callee}"
            skip = ("callee",)
        start = 0
        for label, count in op.segments:
            vals = ", ".join(n(v) for v in op.operands[start:start + count])
            text += f" [{label} {vals}]"
            start += count
        if op.segments:
            text += " "
        text += "(" + ", ".join(n(v) for v in op.operands[start:]) + ")"
        attrs = format_attr_dict(op.attributes, skip)
        if attrs:
            text += " " + attrs
        text += " : " + format_types((v.type for v in op.operands), bare_single=False)
        text += " -> " + format_types(r.type for r in op.results)
        self.emit(depth, text, op)


def print_module(m: ModuleIR, locations: bool = False) -> str:
    p = Printer(locations)
    p.print_module_op(m.op)
    return "\n".join(p.lines) + "\n"


def print_op(op: Operation) -> str:
    """Print one operation, naming values as the enclosing function's printout would."""
    p = Printer()
    if op.name == "func.func":
        p.print_func(op, 0)
    else:
        f = op.enclosing("func.func")
        if f is not None:
            p.namer.number_function(f)
        p.print_op(op, 0)
    return "\n".join(p.lines)


def function_namer(func: Operation) -> Namer:
    n = Namer()
    n.number_function(func)
    return n
