"""Per-pass change accounting and remark collection."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field


@dataclass
class ChangeReport:
    pass_name: str
    counts: dict = field(default_factory=dict)  # function name -> Counter
    remarks: list = field(default_factory=list)  # (function name, message)

    def add(self, func: str, key: str, n: int = 1) -> None:
        if n:
            self.counts.setdefault(func, Counter())[key] += n

    def remark(self, func: str, message: str) -> None:
        self.remarks.append((func, message))

    def total(self, key: str | None = None) -> int:
        if key is None:
            return sum(sum(c.values()) for c in self.counts.values())
        return sum(c[key] for c in self.counts.values())

    def count(self, func: str, key: str) -> int:
        return self.counts.get(func, Counter())[key]

    @property
    def changed(self) -> bool:
        return self.total() > 0

    def merge(self, other: "ChangeReport") -> None:
        for func, c in other.counts.items():
            self.counts.setdefault(func, Counter()).update(c)
        self.remarks.extend(other.remarks)

    def render_remarks(self) -> list[str]:
        return [f"// remark({self.pass_name}): @{f}: {msg}" for f, msg in self.remarks]
