from __future__ import annotations

import numpy as np
import pytest

from conftest import KERNEL_CASES, corpus_text, load
from syclopt.interp import (
    InterpError,
    MemoryImage,
    NDRangeSpec,
    RefBinding,
    diff_state,
    format_buffers,
    run_host_program,
    run_kernel,
)
from syclopt.ir import parse_module
from syclopt.ir.types import F32, I32, I64
from syclopt.transforms import loop_internalize


def _vadd_image(a, b):
    im = MemoryImage()
    im.add_buffer("a", a, F32)
    im.add_buffer("b", b, F32)
    im.add_buffer("c", np.zeros(len(a)), F32)
    for name, mode in (("a", "read"), ("b", "read"), ("c", "write")):
        im.bind_accessor(name, name, mode)
    return im


def test_vector_add():
    image = _vadd_image([1, 2, 3, 4], [10, 20, 30, 40])
    out, stats = run_kernel(load("vector_add.sir"), "vadd", NDRangeSpec((4,)), image)
    assert out.array("c").tolist() == [11, 22, 33, 44]
    assert stats.global_loads == 8
    assert stats.global_stores == 4
    assert stats.items == 4 and stats.launches == 1
    # the input image is not modified
    assert image.array("c").tolist() == [0, 0, 0, 0]


def test_internalized_gemm_barrier_count():
    image = KERNEL_CASES[0].images[0][1]()
    nd = NDRangeSpec((8, 8), (2, 2))
    base, s0 = run_kernel(load("gemm.sir"), "gemm", nd, image)
    m = load("gemm.sir")
    loop_internalize(m)
    after, s1 = run_kernel(m, "gemm", nd, image)
    assert diff_state(base, after) == ""
    assert s0.barrier_waits == 0
    assert s1.barrier_waits / 64 == 2 * (8 // 2)


def test_barrier_under_divergent_condition_is_detected():
    image = MemoryImage()
    image.add_buffer("out", np.zeros(4), I64)
    image.bind("out", RefBinding("out"))
    with pytest.raises(InterpError) as info:
        run_kernel(load("barrier_divergent.sir"), "halves", NDRangeSpec((4,), (4,)), image)
    assert info.value.kind == "barrier divergence"


def test_out_of_bounds_names_buffer_and_index():
    image = _vadd_image([1, 2, 3], [1, 2, 3])
    with pytest.raises(InterpError) as info:
        run_kernel(load("vector_add.sir"), "vadd", NDRangeSpec((4,)), image)
    assert info.value.kind == "out-of-bounds access"
    assert "a" in str(info.value) and "3" in str(info.value)


def test_ref_out_of_bounds():
    image = MemoryImage()
    image.add_buffer("p", np.zeros(4), I32)
    image.bind("p", RefBinding("p"))
    image.bind("n", 6)
    image.bind("a", 1)
    image.bind("b", 1)
    with pytest.raises(InterpError, match="out-of-bounds access"):
        run_kernel(load("licm_pure.sir"), "scale", NDRangeSpec((1,)), image)


def test_store_through_read_only_accessor():
    text = corpus_text("vector_add.sir").replace("f32, write, global", "f32, read, global")
    image = _vadd_image([1, 2], [3, 4])
    image.bind_accessor("c", "c", "read")
    with pytest.raises(InterpError) as info:
        run_kernel(parse_module(text), "vadd", NDRangeSpec((2,)), image)
    assert info.value.kind == "read-only store"


def test_read_mode_binding_forbids_stores_even_if_type_allows():
    image = _vadd_image([1, 2], [3, 4])
    image.bind_accessor("c", "c", "read")
    with pytest.raises(InterpError, match="read-only store"):
        run_kernel(load("vector_add.sir"), "vadd", NDRangeSpec((2,)), image)


def test_unbound_argument():
    image = _vadd_image([1, 2], [3, 4])
    del image.bindings["b"]
    with pytest.raises(InterpError) as info:
        run_kernel(load("vector_add.sir"), "vadd", NDRangeSpec((2,)), image)
    assert info.value.kind == "unbound argument"


def test_unknown_kernel():
    with pytest.raises(InterpError, match="unresolved kernel"):
        run_kernel(load("vector_add.sir"), "nope", NDRangeSpec((2,)), MemoryImage())


@pytest.mark.parametrize("case", KERNEL_CASES, ids=lambda c: c.id)
def test_runs_are_deterministic(case):
    image = case.images[0][1]()
    a, sa = run_kernel(load(case.file), case.func, case.nd, image)
    b, sb = run_kernel(load(case.file), case.func, case.nd, image)
    assert diff_state(a, b) == ""
    assert sa.render() == sb.render()
    assert sa.cell_accesses == sb.cell_accesses


RACE_FREE = ["gemm", "gemm_divergent", "vadd", "mem_acc", "non_uniform", "caller"]


@pytest.mark.parametrize("case", [c for c in KERNEL_CASES if c.func in RACE_FREE], ids=lambda c: c.id)
def test_item_order_does_not_matter_for_race_free_kernels(case):
    for _, factory in case.images:
        image = factory()
        a, _ = run_kernel(load(case.file), case.func, case.nd, image)
        b, _ = run_kernel(load(case.file), case.func, case.nd, image, reverse_items=True)
        assert diff_state(a, b) == ""


@pytest.mark.parametrize("case", [c for c in KERNEL_CASES if c.func.startswith("gemm")], ids=lambda c: c.id)
@pytest.mark.parametrize("reverse", [False, True])
def test_internalized_kernels_pass_barriers(case, reverse):
    m = load(case.file)
    loop_internalize(m)
    for _, factory in case.images:
        run_kernel(m, case.func, case.nd, factory(), reverse_items=reverse)


def test_diff_state_reports_the_first_changed_cell():
    a = MemoryImage()
    a.add_buffer("x", np.arange(6), F32, (2, 3))
    b = a.copy()
    assert diff_state(a, b) == ""
    b.buffers["x"].cells[4] = 9
    assert diff_state(a, b) == "x[1, 1]: 4.0 vs 9.0"


def test_diff_state_distinguishes_signed_zero():
    a = MemoryImage()
    a.add_buffer("x", [0.0], F32)
    b = MemoryImage()
    b.add_buffer("x", [-0.0], F32)
    assert diff_state(a, b) != ""


def test_diff_state_requires_same_buffers():
    a = MemoryImage()
    a.add_buffer("x", [0.0], F32)
    with pytest.raises(ValueError):
        diff_state(a, MemoryImage())


@pytest.mark.parametrize(
    "glob, local",
    [((), None), ((1, 1, 1, 1), None), ((0,), None), ((4,), (3,)), ((4, 4), (2,)), ((4,), (0,))],
)
def test_invalid_nd_ranges(glob, local):
    with pytest.raises(ValueError):
        NDRangeSpec(glob, local)


def test_nd_range_defaults_to_one_group():
    nd = NDRangeSpec((4, 2))
    assert nd.local_size == (4, 2)
    assert nd.groups == (1, 1)
    assert nd.items == 8


def test_item_parameter_may_precede_explicit_ones():
    m = parse_module(
        """
module {
  module {sycl.device = true} {
    func @k(%item: ref<?x!sycl.item<1>>, %out: ref<?xi64>) {sycl.kernel = true} {
      %c0_i32 = arith.constant() {value = 0} : () -> i32
      %g = sycl.item.get_id(%item, %c0_i32) : (ref<?x!sycl.item<1>>, i32) -> i64
      %i = arith.index_cast(%g) : (i64) -> index
      mem.store(%g, %out, %i) : (i64, ref<?xi64>, index) -> ()
      func.return() : () -> ()
    }
  }
}
"""
    )
    image = MemoryImage()
    image.add_buffer("out", np.zeros(3), I64)
    image.bind("out", RefBinding("out"))
    out, _ = run_kernel(m, "k", NDRangeSpec((3,)), image)
    assert out.array("out").tolist() == [0, 1, 2]


def test_internalized_gemm_local_traffic():
    m = load("gemm.sir")
    loop_internalize(m)
    image = KERNEL_CASES[0].images[1][1]()
    _, stats = run_kernel(m, "gemm", NDRangeSpec((8, 8), (2, 2)), image)
    # every work-item fills one cell of each tile per tile step
    assert stats.local_stores == 64 * 2 * 4
    assert stats.local_loads == 64 * 2 * 8


# -- host programs ------------------------------------------------------------------


def test_command_group_end_to_end():
    image, stats = run_host_program(load("command_group.sir"), "cgf")
    c = image.array("c")
    assert c.shape == (1024,)
    assert c.tolist() == [3 * i for i in range(1024)]
    assert stats.launches == 2
    # @fill writes a and b, @K writes c
    assert stats.buffer("c", "global_stores") == 1024
    assert stats.global_stores == 3 * 1024


def test_host_without_launches_returns_initial_buffers():
    m = parse_module(
        """
module {
  func @host() {
    %c3 = llv.constant() {value = 3} : () -> i64
    %data = llv.undef() : () -> ref<?xi32, host>
    %buf = llv.alloca() : () -> ref<1x!sycl.buffer<1 x i32>, host>
    sycl.host.constructor(%buf, %data, %c3) {init = [4, 5, 6], type = !sycl.buffer<1 x i32>} : (ref<1x!sycl.buffer<1 x i32>, host>, ref<?xi32, host>, i64) -> ()
    func.return() : () -> ()
  }
}
"""
    )
    image, stats = run_host_program(m, "host")
    assert format_buffers(image) == ["buf = [4, 5, 6]"]
    assert stats.launches == 0


def test_host_entry_must_exist():
    with pytest.raises(InterpError, match="unresolved symbol"):
        run_host_program(load("command_group.sir"), "nope")


def test_schedule_before_accessor_construction_fails():
    text = corpus_text("range_branch.sir")
    ctor = next(line for line in text.splitlines() if "@sycl_accessor_ctor(" in line)
    m = parse_module(text.replace(ctor + "\n", ""))
    with pytest.raises(InterpError, match="before accessor construction"):
        run_host_program(m, "host")
