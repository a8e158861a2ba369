"""Type descriptors for the IR.

Types are immutable and hashable so they can be compared structurally and
used as dictionary keys.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

MEM_SPACES = ("global", "local", "private", "host")
ACCESS_MODES = ("read", "write", "read_write")

DYNAMIC = -1


class InvalidType(Exception):
    """Raised when a type is malformed."""


@dataclass(frozen=True)
class IntType:
    width: int

    def __str__(self) -> str:
        return f"i{self.width}"


@dataclass(frozen=True)
class FloatType:
    width: int

    def __str__(self) -> str:
        return f"f{self.width}"


@dataclass(frozen=True)
class IndexType:
    def __str__(self) -> str:
        return "index"


# Dimensionality-only sycl types.
_DIM_ONLY = ("id", "range", "item", "nd_item", "group", "nd_range")


@dataclass(frozen=True)
class SyclType:
    """A type from the sycl dialect, e.g. ``!sycl.accessor<2 x f32, read, global>``.

    ``params`` holds the dimensionality first; accessors additionally carry
    element type, access mode and target space, buffers carry the element type.
    """

    name: str
    params: tuple

    def __post_init__(self) -> None:
        if self.name in _DIM_ONLY:
            if len(self.params) != 1:
                raise InvalidType(f"!sycl.{self.name} expects 1 parameter")
        elif self.name == "accessor":
            if len(self.params) != 4:
                raise InvalidType("!sycl.accessor expects <n x elem, mode, space>")
            _, elem, mode, space = self.params
            if mode not in ACCESS_MODES:
                raise InvalidType(f"invalid accessor mode '{mode}'")
            if space not in ("global", "local"):
                raise InvalidType(f"invalid accessor space '{space}'")
            if not is_scalar(elem):
                raise InvalidType("accessor element must be a scalar type")
        elif self.name == "buffer":
            if len(self.params) != 2:
                raise InvalidType("!sycl.buffer expects <n x elem>")
            if not is_scalar(self.params[1]):
                raise InvalidType("buffer element must be a scalar type")
        else:
            raise InvalidType(f"unknown sycl type '!sycl.{self.name}'")
        dim = self.params[0]
        if not isinstance(dim, int) or dim not in (1, 2, 3):
            raise InvalidType(f"sycl type dimensionality must be 1, 2 or 3, got {dim}")

    @property
    def dim(self) -> int:
        return self.params[0]

    @property
    def elem(self) -> "TypeDesc":
        return self.params[1]

    @property
    def mode(self) -> str:
        return self.params[2]

    def __str__(self) -> str:
        if self.name == "accessor":
            n, elem, mode, space = self.params
            return f"!sycl.accessor<{n} x {elem}, {mode}, {space}>"
        if self.name == "buffer":
            n, elem = self.params
            return f"!sycl.buffer<{n} x {elem}>"
        return f"!sycl.{self.name}<{self.params[0]}>"


@dataclass(frozen=True)
class RefType:
    shape: tuple
    elem: "TypeDesc"
    space: str = "global"

    def __post_init__(self) -> None:
        if isinstance(self.elem, RefType):
            raise InvalidType("nested ref types are not allowed")
        if self.space not in MEM_SPACES:
            raise InvalidType(f"unknown memory space '{self.space}'")
        if not self.shape:
            raise InvalidType("ref type needs at least one extent")
        for e in self.shape:
            if e != DYNAMIC and e <= 0:
                raise InvalidType(f"invalid extent {e}")

    @property
    def rank(self) -> int:
        return len(self.shape)

    def __str__(self) -> str:
        dims = "x".join("?" if e == DYNAMIC else str(e) for e in self.shape)
        return f"ref<{dims}x{self.elem}, {self.space}>"


TypeDesc = Union[IntType, FloatType, IndexType, SyclType, RefType]

I1 = IntType(1)
I32 = IntType(32)
I64 = IntType(64)
F32 = FloatType(32)
F64 = FloatType(64)
INDEX = IndexType()


def is_scalar(t) -> bool:
    return isinstance(t, (IntType, FloatType, IndexType))


def is_integer_like(t) -> bool:
    return isinstance(t, (IntType, IndexType))


def is_ref(t) -> bool:
    return isinstance(t, RefType)


def sycl_elem(t, name: str | None = None) -> SyclType | None:
    """Return the sycl type held by ``ref<...x!sycl.name<..>>`` (or a bare sycl type)."""
    if isinstance(t, RefType):
        t = t.elem
    if isinstance(t, SyclType) and (name is None or t.name == name):
        return t
    return None
