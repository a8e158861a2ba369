from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from syclopt.interp import MemoryImage, NDRangeSpec, RefBinding
from syclopt.ir import parse_module
from syclopt.ir.types import F32, I32, I64

TESTS = Path(__file__).resolve().parent
CORPUS = TESTS.parent / "corpus"
sys.path.insert(0, str(TESTS))


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text()


def load(name: str):
    return parse_module(corpus_text(name), filename=name)


@dataclass
class KernelCase:
    """A corpus function plus the launches used by equivalence tests."""

    file: str
    func: str
    nd: NDRangeSpec
    images: list  # (label, factory(seed) -> MemoryImage)

    @property
    def id(self) -> str:
        return f"{self.func}"


def _vals(rng, n, elem):
    if elem is F32:
        return rng.integers(-8, 9, n).astype(np.float32) / 4
    return rng.integers(-50, 50, n)


def _gemm(rng, n=8):
    im = MemoryImage()
    for name, mode in (("A", "read"), ("B", "read"), ("C", "read_write")):
        im.add_buffer(name, _vals(rng, n * n, F32), F32, (n, n))
        im.bind_accessor(name, name, mode)
    return im


def _vadd(rng):
    im = MemoryImage()
    for name, mode in (("a", "read"), ("b", "read"), ("c", "write")):
        im.add_buffer(name, _vals(rng, 4, F32), F32)
        im.bind_accessor(name, name, mode)
    return im


def _licm(rng, aliased: bool, offset: int = 0):
    im = MemoryImage()
    im.add_buffer("p", _vals(rng, 16, F32), F32)
    if aliased:
        im.bind("p", RefBinding("p"))
        im.bind("q", RefBinding("p", offset))
    else:
        im.add_buffer("q", _vals(rng, 16, F32), F32)
        im.bind("p", RefBinding("p"))
        im.bind("q", RefBinding("q"))
    im.bind("n", 8)
    return im


def _scale(rng):
    im = MemoryImage()
    im.add_buffer("p", _vals(rng, 8, I32), I32)
    im.bind("p", RefBinding("p"))
    im.bind("n", int(rng.integers(0, 9)))
    im.bind("a", int(rng.integers(-5, 5)))
    im.bind("b", int(rng.integers(-5, 5)))
    return im


def _reduce(rng):
    im = MemoryImage()
    im.add_buffer("ptr", _vals(rng, 4, F32), F32)
    im.add_buffer("src", _vals(rng, 64, F32), F32)
    im.bind("ptr", RefBinding("ptr"))
    im.bind("src", RefBinding("src"))
    return im


def _foo(rng, aliased: bool):
    im = MemoryImage()
    im.add_buffer("x", _vals(rng, 4, I32), I32)
    im.bind("ptr1", RefBinding("x"))
    if aliased:
        im.bind("ptr2", RefBinding("x"))
    else:
        im.add_buffer("y", _vals(rng, 4, I32), I32)
        im.bind("ptr2", RefBinding("y"))
    im.bind("cond", bool(rng.integers(0, 2)))
    im.bind("a", int(rng.integers(-9, 9)))
    im.bind("b", int(rng.integers(-9, 9)))
    return im


def _fold(rng):
    im = MemoryImage()
    im.add_buffer("out", _vals(rng, 2, I32), I32)
    im.bind("out", RefBinding("out"))
    return im


def _mem_acc(rng):
    im = MemoryImage()
    im.add_buffer("acc", _vals(rng, 3 * 3 * 6, F32), F32, (3, 3, 6))
    im.bind_accessor("acc", "acc", "read")
    im.bind("n", 2)
    return im


def _out_i64(rng, size, **scalars):
    im = MemoryImage()
    im.add_buffer("out", _vals(rng, size, I64), I64)
    im.bind("out", RefBinding("out"))
    for k, v in scalars.items():
        im.bind(k, v)
    return im


def _seeds(factory, *args, **kw) -> list:
    return [(f"seed{s}", (lambda s: lambda: factory(np.random.default_rng(s), *args, **kw))(s)) for s in range(3)]


KERNEL_CASES = [
    KernelCase("gemm.sir", "gemm", NDRangeSpec((8, 8), (2, 2)), _seeds(_gemm)),
    KernelCase("gemm_divergent.sir", "gemm_divergent", NDRangeSpec((8, 8), (2, 2)), _seeds(_gemm)),
    KernelCase("vector_add.sir", "vadd", NDRangeSpec((4,)), _seeds(_vadd)),
    KernelCase(
        "licm_mayalias.sir",
        "licm_may_alias",
        NDRangeSpec((1,)),
        [
            ("disjoint", lambda: _licm(np.random.default_rng(0), False)),
            ("aliased", lambda: _licm(np.random.default_rng(1), True)),
            ("aliased+3", lambda: _licm(np.random.default_rng(2), True, 3)),
            ("disjoint2", lambda: _licm(np.random.default_rng(3), False)),
        ],
    ),
    KernelCase("licm_pure.sir", "scale", NDRangeSpec((1,)), _seeds(_scale)),
    KernelCase("reduction.sir", "reduce", NDRangeSpec((1,)), _seeds(_reduce)),
    KernelCase(
        "reaching_defs.sir",
        "foo",
        NDRangeSpec((1,)),
        _seeds(_foo, False) + [("aliased", lambda: _foo(np.random.default_rng(7), True))],
    ),
    KernelCase("canonicalize.sir", "fold", NDRangeSpec((1,)), _seeds(_fold)),
    KernelCase("access_matrix.sir", "mem_acc", NDRangeSpec((2, 2)), _seeds(_mem_acc)),
    KernelCase("uniformity_branches.sir", "non_uniform", NDRangeSpec((4, 2), (2, 2)), _seeds(_out_i64, 2)),
    KernelCase(
        "uniformity_call.sir",
        "caller",
        NDRangeSpec((8,), (4,)),
        [(f"n={n}", (lambda n: lambda: _out_i64(np.random.default_rng(abs(n)), 8, n=n))(n)) for n in (0, 3, -7)],
    ),
]

HOST_ENTRIES = [("command_group.sir", "cgf"), ("launch_sites.sir", "host"), ("range_branch.sir", "host")]


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture
def reaching_defs_mod():
    return load("reaching_defs.sir")


@pytest.fixture
def access_matrix_mod():
    return load("access_matrix.sir")


@pytest.fixture
def uniformity_branches_mod():
    return load("uniformity_branches.sir")


@pytest.fixture
def command_group_mod():
    return load("command_group.sir")


@pytest.fixture
def gemm():
    return load("gemm.sir")
