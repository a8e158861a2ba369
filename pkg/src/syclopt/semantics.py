"""Scalar arithmetic semantics shared by constant folding and the interpreter.

Integers are Python ints wrapped to their bit width (``index`` is 64-bit
signed), ``i1`` is ``bool`` and floats are numpy scalars of the declared
width, so folding and execution agree bit for bit.
"""

from __future__ import annotations

import numpy as np

from .ir.types import I1, FloatType, IndexType, IntType


class ArithError(ArithmeticError):
    pass


def _width(t) -> int:
    if isinstance(t, IndexType):
        return 64
    return t.width


def wrap_int(x: int, t) -> int:
    w = _width(t)
    x &= (1 << w) - 1
    if x >= 1 << (w - 1):
        x -= 1 << w
    return x


def _np_float(t):
    return np.float32 if t.width == 32 else np.float64


def from_attr(value, t):
    """Runtime value of a constant attribute of type ``t``."""
    if t == I1:
        return bool(value)
    if isinstance(t, FloatType):
        return _np_float(t)(value)
    return wrap_int(int(value), t)


def to_attr(value, t):
    """Attribute value for a runtime scalar of type ``t``."""
    if t == I1:
        return bool(value)
    if isinstance(t, FloatType):
        return float(value)
    return int(value)


_CMP = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "slt": lambda a, b: a < b,
    "sle": lambda a, b: a <= b,
    "sgt": lambda a, b: a > b,
    "sge": lambda a, b: a >= b,
}

FOLDABLE = frozenset(
    {
        "arith.addi",
        "arith.subi",
        "arith.muli",
        "arith.divsi",
        "arith.andi",
        "arith.addf",
        "arith.subf",
        "arith.mulf",
        "arith.cmpi",
        "arith.index_cast",
    }
)


def evaluate(name: str, operands: list, result_type, attributes: dict | None = None):
    """Evaluate a pure arith operation on runtime scalars."""
    if name == "arith.index_cast":
        return wrap_int(int(operands[0]), result_type)
    if name == "arith.cmpi":
        return bool(_CMP[attributes["pred"]](int(operands[0]), int(operands[1])))
    a, b = operands
    if name == "arith.andi":
        return bool(a) and bool(b)
    if name in ("arith.addf", "arith.subf", "arith.mulf"):
        f = _np_float(result_type)
        a, b = f(a), f(b)
        with np.errstate(all="ignore"):
            if name == "arith.addf":
                return f(a + b)
            if name == "arith.subf":
                return f(a - b)
            return f(a * b)
    a, b = int(a), int(b)
    if name == "arith.addi":
        r = a + b
    elif name == "arith.subi":
        r = a - b
    elif name == "arith.muli":
        r = a * b
    elif name == "arith.divsi":
        if b == 0:
            raise ArithError("division by zero")
        q = abs(a) // abs(b)
        r = q if (a >= 0) == (b >= 0) else -q
    else:
        raise ArithError(f"cannot evaluate '{name}'")
    return wrap_int(r, result_type)


def format_scalar(value) -> str:
    """Shortest round-tripping decimal text of a runtime scalar."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, np.floating):
        return np.format_float_positional(value, unique=True, trim="0")
    return str(int(value))


def parse_scalar(text: str, t):
    text = text.strip()
    if t == I1:
        return text in ("1", "true")
    if isinstance(t, FloatType):
        return _np_float(t)(float(text))
    if isinstance(t, (IntType, IndexType)):
        return wrap_int(int(text), t)
    raise ValueError(f"cannot parse a scalar of type {t}")
