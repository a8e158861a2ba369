"""Recursive-descent parser for the textual IR.

The parser scans the raw text directly (no separate token stream) because
type syntax such as ``ref<4x?xf32, local>`` does not split cleanly into
tokens.
"""

from __future__ import annotations

import re

from .core import Block, Diagnostic, Location, ModuleIR, Operation, Symbol, Value, replace_all_uses
from .types import (
    ACCESS_MODES,
    DYNAMIC,
    INDEX,
    FloatType,
    IndexType,
    IntType,
    InvalidType,
    RefType,
    SyclType,
)

_WS = re.compile(r"(?:\s+|//[^\n]*)*")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
_VALNAME = re.compile(r"%[A-Za-z0-9_.$\-]+")
_SYMBOL = re.compile(r"@[A-Za-z_][A-Za-z0-9_.$]*")
_NUMBER = re.compile(r"-?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+|inf|nan)")
_ATTR_KEY_AHEAD = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*\s*=")
_SCALAR_TYPE = re.compile(r"(i\d+|f32|f64|index)\b")


class ParseError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic

    @property
    def diagnostics(self) -> list[Diagnostic]:
        return [self.diagnostic]


class _FuncScope:
    def __init__(self):
        self.values: dict[str, Value] = {}
        self.pending: dict[str, list[tuple[Value, int]]] = {}


class Parser:
    def __init__(self, text: str, filename: str = "<input>"):
        self.text = text
        self.filename = filename
        self.pos = 0
        self.scope: _FuncScope | None = None
        self._placeholder_block = Block()

    # -- low-level scanning -------------------------------------------------
    def _line_col(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def loc(self) -> Location:
        return Location(self.filename, self._line_col()[0])

    def error(self, msg: str, pos: int | None = None):
        line, col = self._line_col(pos)
        raise ParseError(Diagnostic("error", f"{msg} (line {line}, col {col})", Location(self.filename, line)))

    def skip_ws(self) -> None:
        self.pos = _WS.match(self.text, self.pos).end()

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self, s: str) -> bool:
        self.skip_ws()
        return self.text.startswith(s, self.pos)

    def accept(self, s: str) -> bool:
        if self.peek(s):
            self.pos += len(s)
            return True
        return False

    def expect(self, s: str) -> None:
        if not self.accept(s):
            found = self.text[self.pos:self.pos + 12].split("\n")[0] or "end of input"
            self.error(f"syntax error: expected '{s}' but found '{found}'")

    def match(self, rx: re.Pattern) -> str | None:
        self.skip_ws()
        m = rx.match(self.text, self.pos)
        if m is None:
            return None
        self.pos = m.end()
        return m.group(0)

    def expect_re(self, rx: re.Pattern, what: str) -> str:
        s = self.match(rx)
        if s is None:
            found = self.text[self.pos:self.pos + 12].split("\n")[0] or "end of input"
            self.error(f"syntax error: expected {what} but found '{found}'")
        return s

    def keyword_ahead(self, word: str) -> bool:
        self.skip_ws()
        m = _IDENT.match(self.text, self.pos)
        return m is not None and m.group(0) == word

    # -- types -------------------------------------------------------------------
    def parse_type(self):
        self.skip_ws()
        start = self.pos
        try:
            if self.accept("ref<"):
                return self._parse_ref_body()
            if self.accept("!sycl."):
                return self._parse_sycl_body()
            s = self.match(_SCALAR_TYPE)
            if s is None:
                self.error("syntax error: expected a type")
            return _scalar_type(s)
        except InvalidType as e:
            self.error(f"type mismatch: {e}", start)

    def _parse_ref_body(self) -> RefType:
        shape = []
        while True:
            self.skip_ws()
            if self.text.startswith("?x", self.pos):
                shape.append(DYNAMIC)
                self.pos += 2
                continue
            m = re.compile(r"(\d+)x").match(self.text, self.pos)
            if m:
                shape.append(int(m.group(1)))
                self.pos = m.end()
                continue
            break
        if not shape:
            self.error("syntax error: ref type needs at least one extent")
        elem = self.parse_type()
        space = "global"
        if self.accept(","):
            space = self.expect_re(_IDENT, "memory space")
        self.expect(">")
        return RefType(tuple(shape), elem, space)

    def _parse_sycl_body(self) -> SyclType:
        name = self.expect_re(_IDENT, "sycl type name")
        self.expect("<")
        n = int(self.expect_re(re.compile(r"\d+"), "dimensionality"))
        params: list = [n]
        if name in ("accessor", "buffer"):
            self.expect("x")
            params.append(self.parse_type())
            if name == "accessor":
                self.expect(",")
                mode = self.expect_re(_IDENT, "access mode")
                if mode not in ACCESS_MODES:
                    self.error(f"type mismatch: invalid accessor mode '{mode}'")
                self.expect(",")
                params.append(mode)
                params.append(self.expect_re(_IDENT, "address space"))
        self.expect(">")
        return SyclType(name, tuple(params))

    def parse_type_list(self) -> list:
        """``()`` | ``type`` | ``(type, ...)``"""
        if self.accept("("):
            out = []
            if not self.accept(")"):
                out.append(self.parse_type())
                while self.accept(","):
                    out.append(self.parse_type())
                self.expect(")")
            return out
        return [self.parse_type()]

    # -- attributes ----------------------------------------------------------
    def attr_dict_ahead(self) -> bool:
        self.skip_ws()
        if not self.text.startswith("{", self.pos):
            return False
        save = self.pos
        self.pos += 1
        self.skip_ws()
        ok = _ATTR_KEY_AHEAD.match(self.text, self.pos) is not None
        self.pos = save
        return ok

    def parse_attr_dict(self) -> dict:
        attrs: dict = {}
        if not self.attr_dict_ahead():
            return attrs
        self.expect("{")
        while True:
            key = self.expect_re(_IDENT, "attribute name")
            if key in attrs:
                self.error(f"duplicate attribute '{key}'")
            self.expect("=")
            attrs[key] = self.parse_attr_value()
            if not self.accept(","):
                break
        self.expect("}")
        return attrs

    def parse_attr_value(self):
        self.skip_ws()
        if self.accept("["):
            items = []
            if not self.accept("]"):
                items.append(self.parse_attr_value())
                while self.accept(","):
                    items.append(self.parse_attr_value())
                self.expect("]")
            return tuple(items)
        sym = self.match(_SYMBOL)
        if sym:
            return Symbol(sym[1:])
        if self.peek("ref<") or self.peek("!sycl."):
            return self.parse_type()
        num = self.match(_NUMBER)
        if num is not None:
            if re.fullmatch(r"-?\d+", num):
                return int(num)
            return float(num)
        word = self.expect_re(_IDENT, "attribute value")
        if word in ("true", "false"):
            return word == "true"
        if _SCALAR_TYPE.fullmatch(word):
            return _scalar_type(word)
        return word

    # -- values ------------------------------------------------------------------
    def define(self, name: str, v: Value) -> None:
        assert self.scope is not None
        if name in self.scope.values:
            self.error(f"redefinition of value '{name}'")
        v.name_hint = name[1:]
        self.scope.values[name] = v

    def use(self, name: str, type_=None) -> Value:
        assert self.scope is not None
        v = self.scope.values.get(name)
        if v is not None:
            return v
        if type_ is None:
            self.error(f"unresolved value name '{name}'")
        ph = Value(type_, self._placeholder_block, -1, name[1:])
        self.scope.pending.setdefault(name, []).append((ph, self.pos))
        return ph

    def parse_valname(self) -> str:
        return self.expect_re(_VALNAME, "value name")

    # -- structure -----------------------------------------------------------
    def parse_module(self) -> ModuleIR:
        op = self.parse_module_op()
        if not self.at_end():
            self.error("syntax error: trailing input after module")
        return ModuleIR(op)

    def parse_module_op(self) -> Operation:
        loc = self.loc()
        if not self.keyword_ahead("module"):
            self.error("syntax error: expected 'module'")
        self.match(_IDENT)
        op = Operation("module", attributes=self.parse_attr_dict(), regions=1, location=loc)
        self.expect("{")
        while not self.accept("}"):
            if self.at_end():
                self.error("syntax error: unexpected end of input in module")
            if self.keyword_ahead("module"):
                op.body.append(self.parse_module_op())
            elif self.keyword_ahead("func"):
                start = self.pos
                f = self.parse_func()
                if any(o.sym_name == f.sym_name for o in op.body.ops):
                    self.error(f"duplicate symbol '@{f.sym_name}'", start)
                op.body.append(f)
            else:
                self.error("syntax error: expected 'func' or 'module'")
        return op

    def parse_func(self) -> Operation:
        loc = self.loc()
        self.match(_IDENT)
        name = self.expect_re(_SYMBOL, "function symbol")[1:]
        f = Operation("func.func", attributes={"sym_name": Symbol(name)}, regions=1, location=loc)
        self.scope = _FuncScope()
        self.expect("(")
        if not self.accept(")"):
            while True:
                vn = self.parse_valname()
                self.expect(":")
                self.define(vn, f.body.add_arg(self.parse_type()))
                if not self.accept(","):
                    break
            self.expect(")")
        if self.accept("->"):
            f.attributes["result_types"] = tuple(self.parse_type_list())
        for k, v in self.parse_attr_dict().items():
            if k in f.attributes:
                self.error(f"duplicate attribute '{k}'")
            f.attributes[k] = v
        self.expect("{")
        self.parse_ops_until_brace(f.body)
        self._resolve_pending()
        self.scope = None
        return f

    def _resolve_pending(self) -> None:
        assert self.scope is not None
        for name, uses in self.scope.pending.items():
            target = self.scope.values.get(name)
            for ph, pos in uses:
                if target is None:
                    self.error(f"unresolved value name '{name}'", pos)
                if target.type != ph.type:
                    self.error(f"type mismatch: '{name}' used as {ph.type} but defined as {target.type}", pos)
                replace_all_uses(ph, target)

    def parse_ops_until_brace(self, block: Block) -> None:
        while not self.accept("}"):
            if self.at_end():
                self.error("syntax error: unexpected end of input, expected '}'")
            op = self.parse_op()
            if op is not None:
                block.append(op)

    def parse_op(self) -> Operation | None:
        loc = self.loc()
        result_names: list[str] = []
        self.skip_ws()
        if self.text.startswith("%", self.pos):
            result_names.append(self.parse_valname())
            while self.accept(","):
                result_names.append(self.parse_valname())
            self.expect("=")
        name = self.expect_re(_IDENT, "operation name")
        if name == "loop.for":
            return self.parse_for(result_names, loc)
        if name == "loop.if":
            return self.parse_if(result_names, loc)
        from ..dialects import is_registered

        if not is_registered(name):
            self.error(f"unknown operation '{name}'")
        attrs: dict = {}
        sym = self.match(_SYMBOL)
        if sym:
            attrs["callee"] = Symbol(sym[1:])
        operand_names: list[tuple[str, int]] = []
        segments = []
        while self.accept("["):
            label = self.expect_re(_IDENT, "segment label")
            count = 0
            if not self.peek("]"):
                while True:
                    operand_names.append((self.parse_valname(), self.pos))
                    count += 1
                    if not self.accept(","):
                        break
            self.expect("]")
            segments.append((label, count))
        self.expect("(")
        if not self.accept(")"):
            while True:
                operand_names.append((self.parse_valname(), self.pos))
                if not self.accept(","):
                    break
            self.expect(")")
        for k, v in self.parse_attr_dict().items():
            if k in attrs:
                self.error(f"duplicate attribute '{k}'")
            attrs[k] = v
        self.expect(":")
        self.expect("(")
        operand_types = []
        if not self.accept(")"):
            operand_types.append(self.parse_type())
            while self.accept(","):
                operand_types.append(self.parse_type())
            self.expect(")")
        self.expect("->")
        result_types = self.parse_type_list()
        if len(operand_types) != len(operand_names):
            self.error(
                f"type mismatch: '{name}' has {len(operand_names)} operands but {len(operand_types)} types"
            )
        if len(result_types) != len(result_names):
            self.error(f"type mismatch: '{name}' has {len(result_types)} results but {len(result_names)} names")
        operands = []
        for (vn, pos), t in zip(operand_names, operand_types):
            v = self.use(vn, t)
            if v.type != t:
                self.error(f"type mismatch: '{vn}' has type {v.type}, expected {t}", pos)
            operands.append(v)
        op = Operation(name, operands, result_types, attrs, segments=segments, location=loc)
        for vn, r in zip(result_names, op.results):
            self.define(vn, r)
        if name == "loop.yield" and not operands:
            return None
        return op

    def parse_for(self, result_names: list[str], loc: Location) -> Operation:
        iv = self.parse_valname()
        self.expect("=")
        lb = self.use(self.parse_valname(), INDEX)
        if not self.keyword_ahead("to"):
            self.error("syntax error: expected 'to'")
        self.match(_IDENT)
        ub = self.use(self.parse_valname(), INDEX)
        if not self.keyword_ahead("step"):
            self.error("syntax error: expected 'step'")
        self.match(_IDENT)
        step = self.use(self.parse_valname(), INDEX)
        iter_names, inits = [], []
        if self.keyword_ahead("iter_args"):
            self.match(_IDENT)
            self.expect("(")
            while True:
                iter_names.append(self.parse_valname())
                self.expect("=")
                inits.append(self.use(self.parse_valname()))
                if not self.accept(","):
                    break
            self.expect(")")
        for v in (lb, ub, step):
            if v.type != INDEX:
                self.error(f"type mismatch: loop bounds must be index, got {v.type}")
        if len(result_names) not in (0, len(inits)):
            self.error("type mismatch: loop.for result count must equal iter_args count")
        attrs = self.parse_attr_dict()
        op = Operation(
            "loop.for", [lb, ub, step, *inits], [v.type for v in inits] if result_names else [], attrs, 1,
            location=loc,
        )
        if inits and not result_names:
            self.error("loop.for with iter_args must name its results")
        body = op.regions[0].block
        self.define(iv, body.add_arg(INDEX))
        for n, v in zip(iter_names, inits):
            self.define(n, body.add_arg(v.type))
        for n, r in zip(result_names, op.results):
            self.define(n, r)
        self.expect("{")
        self.parse_ops_until_brace(body)
        return op

    def parse_if(self, result_names: list[str], loc: Location) -> Operation:
        cond = self.use(self.parse_valname())
        rtypes = []
        if self.accept("->"):
            rtypes = self.parse_type_list()
        if len(rtypes) != len(result_names):
            self.error("type mismatch: loop.if result names and types differ")
        attrs = self.parse_attr_dict()
        op = Operation("loop.if", [cond], rtypes, attrs, 1, location=loc)
        for n, r in zip(result_names, op.results):
            self.define(n, r)
        self.expect("{")
        self.parse_ops_until_brace(op.regions[0].block)
        if self.keyword_ahead("else"):
            self.match(_IDENT)
            self.expect("{")
            op.add_region()
            self.parse_ops_until_brace(op.regions[1].block)
        return op


def _scalar_type(s: str):
    if s == "index":
        return IndexType()
    if s.startswith("f"):
        return FloatType(int(s[1:]))
    return IntType(int(s[1:]))


def parse_module(text: str, filename: str = "<input>") -> ModuleIR:
    """Parse a module; raises :class:`ParseError` with a diagnostic on failure."""
    return Parser(text, filename).parse_module()


def parse_type(text: str):
    p = Parser(text)
    t = p.parse_type()
    if not p.at_end():
        p.error("syntax error: trailing input after type")
    return t
