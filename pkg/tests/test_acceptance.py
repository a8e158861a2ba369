"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import CORPUS, KERNEL_CASES, load  # noqa: E402
from syclopt.analyses.memaccess import AffineAccess, extract_access  # noqa: E402
from syclopt.analyses.reachdef import ReachingDefs  # noqa: E402
from syclopt.analyses.uniformity import Uniformity, compute_uniformity  # noqa: E402
from syclopt.host import KERNEL_ARG_UNUSED, propagate_host_to_device, raise_host  # noqa: E402
from syclopt.interp import MemoryImage, NDRangeSpec, RefBinding, diff_state, run_host_program, run_kernel  # noqa: E402
from syclopt.ir import parse_module, print_module, structurally_equal, verify_module  # noqa: E402
from syclopt.ir.types import F32  # noqa: E402
from syclopt.pipeline import PASSES  # noqa: E402
from syclopt.transforms import canonicalize, detect_reduction, licm, loop_internalize  # noqa: E402

DEVICE_PASSES = ["canonicalize", "licm", "detect-reduction", "loop-internalize"]


def _ops(root, name):
    return [op for op in root.walk() if op.name == name]


def reaching_defs_fidelity():
    m = load("reaching_defs.sir")
    f = m.lookup("foo")
    ptr1 = f.arguments[0]
    store_a, store_b = _ops(f, "mem.store")
    assert store_a.operands[0].name_hint == "a" and store_b.operands[0].name_hint == "b"
    d = ReachingDefs(f).before(_ops(f, "mem.load")[0], ptr1)
    assert d.mods == {store_a}, d
    assert d.pmods == {store_b}, d


def uniformity_fidelity():
    m = load("uniformity_branches.sir")
    f = m.lookup("non_uniform")
    u = compute_uniformity(m)
    named = {r.name_hint: r for op in f.walk() for r in op.results}
    assert u.of(named["cond"]) is Uniformity.NonUniform
    assert u.of(named["cond1"]) is Uniformity.NonUniform
    for op in _ops(f, "arith.constant"):
        assert u.of(op.result) is Uniformity.Uniform
    last_if = _ops(f, "loop.if")[-1]
    assert last_if.operands[0] is named["cond1"]
    body = last_if.regions[0].block.ops
    assert body and all(u.is_divergent(op) for op in body)


def access_matrix_fidelity():
    m = load("access_matrix.sir")
    a = extract_access(_ops(m.lookup("mem_acc"), "sycl.accessor.subscript")[0])
    assert isinstance(a, AffineAccess)
    assert a.basis_names() == ["gid_x", "gid_y", "i"]
    assert a.matrix == [[1, 0, 0], [0, 0, 2], [0, 1, 2]]
    assert a.offsets == [1, 0, 2]
    assert a.inter() == [row[:2] for row in a.matrix]


def reduction_traffic():
    rng = np.random.default_rng(0)
    image = MemoryImage()
    image.add_buffer("ptr", rng.integers(-8, 8, 4) / 4, F32)
    image.add_buffer("src", rng.integers(-8, 8, 64) / 4, F32)
    image.bind("ptr", RefBinding("ptr"))
    image.bind("src", RefBinding("src"))
    base, s0 = run_kernel(load("reduction.sir"), "reduce", NDRangeSpec((1,)), image)
    m = load("reduction.sir")
    assert detect_reduction(m).total() == 1
    after, s1 = run_kernel(m, "reduce", NDRangeSpec((1,)), image)
    assert s0.cell("ptr", 0) == 128, s0.cell("ptr", 0)
    assert s1.cell("ptr", 0) == 2, s1.cell("ptr", 0)
    assert diff_state(base, after) == ""


def internalization():
    m = load("gemm.sir")
    loop_internalize(m)
    assert verify_module(m) == []
    assert len(_ops(m, "mem.local_alloc")) == 2
    assert len(_ops(m, "sycl.work_group_barrier")) == 2
    nd = NDRangeSpec((8, 8), (2, 2))
    image = KERNEL_CASES[0].images[0][1]()
    base, s0 = run_kernel(load("gemm.sir"), "gemm", nd, image)
    after, s1 = run_kernel(m, "gemm", nd, image)
    assert diff_state(base, after) == ""
    items = nd.items

    def loads(s):
        return (s.buffer("A", "global_loads") + s.buffer("B", "global_loads")) / items

    assert loads(s0) == 16, loads(s0)
    assert loads(s1) == 8, loads(s1)
    assert s1.barrier_waits / items == 8, s1.barrier_waits


def divergence_guard():
    m = load("gemm_divergent.sir")
    before = print_module(m)
    report = loop_internalize(m)
    assert print_module(m) == before
    assert ("gemm_divergent", "skipped: divergent region") in report.remarks


def licm_versioning():
    m = load("licm_mayalias.sir")
    licm(m)
    assert len(_ops(m, "mem.disjoint")) == 1
    for label, factory in KERNEL_CASES[3].images:
        image = factory()
        base, s0 = run_kernel(load("licm_mayalias.sir"), "licm_may_alias", NDRangeSpec((1,)), image)
        after, s1 = run_kernel(m, "licm_may_alias", NDRangeSpec((1,)), image)
        assert diff_state(base, after) == "", label
        if label.startswith("disjoint"):
            assert s0.buffer("p", "global_loads") == 8
            assert s1.buffer("p", "global_loads") == 1, (label, s1.buffer("p", "global_loads"))


def raising_fidelity():
    m = load("command_group.sir")
    raise_host(m)
    assert verify_module(m) == []
    text = print_module(m)
    assert "llv.call" not in text
    assert "{type = !sycl.buffer<1 x i32>}" in text
    assert "type = !sycl.accessor<1 x i32, read, global>}" in text
    assert "type = !sycl.accessor<1 x i32, write, global>}" in text
    assert text.count("sycl.host.schedule_kernel @K [range %") == 1


def constant_propagation():
    base, _ = run_host_program(load("command_group.sir"), "cgf")
    m = load("command_group.sir")
    raise_host(m)
    propagate_host_to_device(m)
    canonicalize(m)
    assert verify_module(m) == []
    k = m.lookup("K")
    assert not _ops(k, "sycl.accessor.get_access_range")
    assert any(op.attributes.get("value") == 1024 for op in _ops(k, "arith.constant"))
    assert 3 in tuple(k.attributes.get(KERNEL_ARG_UNUSED, ()))
    after, _ = run_host_program(m, "cgf")
    assert diff_state(base, after) == ""


def property_suites():
    import test_analyses as ta

    # (a) round trip on the whole corpus
    files = sorted(CORPUS.glob("*.sir"))
    assert files
    for path in files:
        m = load(path.name)
        once = print_module(m)
        again = parse_module(once)
        assert print_module(again) == once and structurally_equal(m, again), path.name
    # (b) lattice laws, 1000 random triples each
    ta.test_defset_lattice_laws()
    ta.test_uniformity_lattice_laws()
    # (c) alias results against interpreter addresses on 100 programs
    assert sum(ta._alias_oracle_one(seed) for seed in range(100)) > 1000
    # (d) uniformity against cross-item equality on 50 kernels
    assert sum(ta._check_uniformity_kernel(seed) for seed in range(50)) > 500
    # (e) every pass on every corpus kernel, at least three bindings each
    for case in KERNEL_CASES:
        assert len(case.images) >= 3, case.id
        for name in DEVICE_PASSES:
            m = load(case.file)
            PASSES[name](m)
            assert verify_module(m) == [], (case.id, name)
            for label, factory in case.images:
                image = factory()
                base, _ = run_kernel(load(case.file), case.func, case.nd, image)
                after, _ = run_kernel(m, case.func, case.nd, image)
                assert diff_state(base, after) == "", (case.id, name, label)
            # (f) idempotence
            once = print_module(m)
            assert PASSES[name](m).total() == 0, (case.id, name)
            assert print_module(m) == once, (case.id, name)


CRITERIA = [
    ("1 Reaching definitions", reaching_defs_fidelity),
    ("2 Uniformity", uniformity_fidelity),
    ("3 Access matrix", access_matrix_fidelity),
    ("4 Reduction traffic", reduction_traffic),
    ("5 Internalization", internalization),
    ("6 Divergence guard", divergence_guard),
    ("7 LICM versioning", licm_versioning),
    ("8 Raising fidelity", raising_fidelity),
    ("9 Constant propagation", constant_propagation),
    ("10 Property suites", property_suites),
]


def _report(label: str, fn) -> BaseException | None:
    try:
        fn()
    except BaseException as e:  # noqa: BLE001 - reported, then re-raised by the caller
        print(f"FAIL criterion {label}: {type(e).__name__}: {e}", flush=True)
        return e
    print(f"PASS criterion {label}", flush=True)
    return None


@pytest.mark.parametrize("label, fn", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(label, fn, capsys):
    with capsys.disabled():
        print()
        err = _report(label, fn)
    if err is not None:
        raise err


if __name__ == "__main__":
    failures = sum(_report(label, fn) is not None for label, fn in CRITERIA)
    print(f"{len(CRITERIA) - failures} passed, {failures} failed")
    sys.exit(1 if failures else 0)
