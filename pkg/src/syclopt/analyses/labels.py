"""Human-readable names for values and operations in analysis remarks."""

from __future__ import annotations

from ..ir.core import Operation, Value, enclosing_function, value_function
from ..ir.printer import function_namer


class Labeler:
    """Prefers source name hints (``%ptr1``); falls back to printer numbering."""

    def __init__(self):
        self._namers: dict[int, object] = {}

    def _number(self, v: Value) -> str:
        f = value_function(v)
        if f is None:
            return f"%v{v.id}"
        namer = self._namers.get(f.id)
        if namer is None:
            namer = self._namers[f.id] = function_namer(f)
        return namer(v)

    def value(self, v: Value) -> str:
        hint = v.name_hint
        if hint and not hint.isdigit():
            return f"%{hint}"
        return self._number(v)

    def op(self, op: Operation) -> str:
        if op.results:
            return ", ".join(self.value(r) for r in op.results) + " = " + op.name
        return op.name + "(" + ", ".join(self.value(v) for v in op.operands) + ")"


def function_label(op: Operation) -> str:
    f = op if op.name == "func.func" else enclosing_function(op)
    return f"@{f.sym_name}" if f is not None else "<module>"
