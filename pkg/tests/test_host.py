from __future__ import annotations

import pytest

from conftest import HOST_ENTRIES, corpus_text, load
from progen import host_program
from syclopt.host import (
    KERNEL_ARG_UNUSED,
    LaunchSummary,
    RaiseError,
    analyze_launch_sites,
    propagate_host_to_device,
    raise_host,
)
from syclopt.interp import diff_state, run_host_program
from syclopt.ir import parse_module, print_module, verify_module
from syclopt.transforms import canonicalize


def _ops(m, name):
    return [op for op in m.walk() if op.name == name]


def _raised(name):
    m = load(name)
    raise_host(m)
    assert verify_module(m) == []
    return m


# -- raising ---------------------------------------------------------------------------


def test_command_group_raises_to_host_ops(command_group_mod):
    report = raise_host(command_group_mod)
    assert verify_module(command_group_mod) == []
    assert [op for op in _ops(command_group_mod, "llv.call")] == []
    ctors = _ops(command_group_mod, "sycl.host.constructor")
    buffers = [op for op in ctors if "buffer" in str(op.attributes["type"])]
    accessors = [op for op in ctors if "accessor" in str(op.attributes["type"])]
    assert len(buffers) == 3 and len(accessors) == 5
    k_sites = [op for op in _ops(command_group_mod, "sycl.host.schedule_kernel") if op.symbol == "K"]
    assert len(k_sites) == 1
    (site,) = k_sites
    assert len(site.segment("range")) == 1
    assert len(site.main_operands) == 4
    assert report.count("cgf", "constructed") == 8
    assert report.count("cgf", "scheduled") == 2
    ranged = [op for op in accessors if op.attributes.get("ranged")]
    assert len(ranged) == 3


def test_module_without_llv_calls_is_unchanged():
    m = load("gemm.sir")
    before = print_module(m)
    assert raise_host(m).total() == 0
    assert print_module(m) == before


def test_unrelated_llv_call_is_left_alone():
    m = parse_module(
        """
module {
  func @host() {
    %c = llv.constant() {value = 3} : () -> i64
    llv.call @unrelated_fn(%c) : (i64) -> ()
    func.return() : () -> ()
  }
}
"""
    )
    before = print_module(m)
    assert raise_host(m).total() == 0
    assert print_module(m) == before


def _with_call(call: str) -> str:
    return corpus_text("command_group.sir").replace(
        "    func.return() : () -> ()\n  }\n  module", f"    {call}\n    func.return() : () -> ()\n  }}\n  module", 1
    )


def test_missing_schedule_target_is_an_error():
    m = parse_module(
        _with_call(
            "llv.call @sycl_schedule_kernel(%cgh, %size, %ra) {kernel = @nope}"
            " : (ref<1xi64, host>, i64, ref<1x!sycl.accessor<1 x i32, read, global>, host>) -> ()"
        )
    )
    with pytest.raises(RaiseError, match="not found"):
        raise_host(m)


def test_schedule_arity_mismatch_is_an_error():
    m = parse_module(
        _with_call(
            "llv.call @sycl_schedule_kernel(%cgh, %size, %ra) {kernel = @K}"
            " : (ref<1xi64, host>, i64, ref<1x!sycl.accessor<1 x i32, read, global>, host>) -> ()"
        )
    )
    with pytest.raises(RaiseError, match="raising pattern arity"):
        raise_host(m)


def test_accessor_ctor_arity_mismatch_is_an_error():
    m = parse_module(
        _with_call(
            "llv.call @sycl_accessor_ctor_ranged(%ra, %a, %cgh, %size)"
            " : (ref<1x!sycl.accessor<1 x i32, read, global>, host>, ref<1x!sycl.buffer<1 x i32>, host>,"
            " ref<1xi64, host>, i64) -> ()"
        )
    )
    with pytest.raises(RaiseError, match="raising pattern arity"):
        raise_host(m)


@pytest.mark.parametrize("name, entry", HOST_ENTRIES)
def test_raising_preserves_host_execution(name, entry):
    base, s0 = run_host_program(load(name), entry)
    after, s1 = run_host_program(_raised(name), entry)
    assert diff_state(base, after) == ""
    assert s0.launches == s1.launches > 0


# -- launch analysis --------------------------------------------------------------------


def test_command_group_launch_facts(command_group_mod):
    raise_host(command_group_mod)
    s = analyze_launch_sites(command_group_mod)["K"]
    assert s.sites == 1
    assert s.global_range == (1024,)
    assert s.scalars == {3: 1024}
    for j in range(3):
        facts = s.accessors[j]
        assert facts.mem_range == (1024,)
        assert facts.access_range == (1024,)
        assert facts.access_is_mem
        assert facts.offset == (0,)
    fill = analyze_launch_sites(command_group_mod)["fill"]
    assert all(not f.ranged and f.access_is_mem and f.offset == (0,) for f in fill.accessors.values())


def test_unequal_ranges_join_to_unknown():
    m = _raised("launch_sites.sir")
    s = analyze_launch_sites(m)["twice"]
    assert s.sites == 2
    assert s.global_range == (None,)
    assert s.scalars[1] == 5


def test_access_range_through_host_memory():
    m = _raised("launch_sites.sir")
    s = analyze_launch_sites(m)["once"]
    assert s.accessors[0].access_range == (16,)
    assert s.accessors[0].mem_range == (128,)
    assert not s.accessors[0].access_is_mem


def test_adding_a_site_never_creates_constants():
    m = _raised("launch_sites.sir")
    s = analyze_launch_sites(m)["twice"]
    empty = LaunchSummary("twice")
    assert empty.join(s) == s
    one = LaunchSummary("twice", 1, (64,), None, {1: 5}, {})
    joined = s.join(one)
    assert joined.global_range == (None,)
    other = LaunchSummary("twice", 1, (64,), None, {1: 6}, {})
    assert s.join(other).scalars[1] is None


def _observed_launches(m):
    """Per schedule site: observed range, scalar and ranged-ctor operand values."""
    values = {}

    def trace(item, op, ctx, vals):
        for r, v in zip(op.results, vals):
            values[r.id] = v

    run_host_program(m, "host", trace=trace)
    out = []
    for site in _ops(m, "sycl.host.schedule_kernel"):
        acc_slot = site.main_operands[0]
        ctor = next(op for op in _ops(m, "sycl.host.constructor") if op.operands[0] is acc_slot)
        obs = {
            "range": int(values[site.segment("range")[0].id]),
            "s": int(values[site.main_operands[1].id]),
            "ranged": bool(ctor.attributes.get("ranged")),
        }
        if obs["ranged"]:
            obs["len"] = int(values[ctor.operands[3].id])
            obs["off"] = int(values[ctor.operands[4].id])
        else:
            obs["len"], obs["off"] = 16, 0
        out.append(obs)
    return out


@pytest.mark.parametrize("seed", range(60))
def test_launch_facts_agree_with_execution(seed):
    m = parse_module(host_program(seed))
    raise_host(m)
    s = analyze_launch_sites(m)["k"]
    obs = _observed_launches(m)
    assert s.sites == len(obs)
    facts = s.accessors[0]
    checks = [
        (s.global_range[0], "range"),
        (s.scalars[1], "s"),
        (facts.access_range[0] if facts.access_range else None, "len"),
        (facts.offset[0] if facts.offset else None, "off"),
    ]
    for claimed, key in checks:
        if claimed is not None:
            assert all(o[key] == claimed for o in obs), (seed, key)
    assert facts.mem_range == (16,)


def test_launch_oracle_sees_constant_and_unknown_facts():
    known = unknown = 0
    for seed in range(60):
        m = parse_module(host_program(seed))
        raise_host(m)
        s = analyze_launch_sites(m)["k"]
        for v in (s.global_range[0], s.scalars[1], s.accessors[0].offset[0]):
            if v is None:
                unknown += 1
            else:
                known += 1
    assert known > 30 and unknown > 10


# -- propagation ------------------------------------------------------------------------


def test_access_range_becomes_constant_and_size_arg_dies(command_group_mod):
    raise_host(command_group_mod)
    report = propagate_host_to_device(command_group_mod)
    assert verify_module(command_group_mod) == []
    k = command_group_mod.lookup("K")
    assert not any(op.name == "sycl.accessor.get_access_range" for op in k.walk())
    assert tuple(k.attributes[KERNEL_ARG_UNUSED]) == (3,)
    site = next(op for op in _ops(command_group_mod, "sycl.host.schedule_kernel") if op.symbol == "K")
    assert tuple(site.attributes["dead_args"]) == (3,)
    assert ("K", "propagated 2 launch fact(s), unused arguments [3]") in report.remarks


def test_unknown_facts_leave_kernel_unchanged():
    text = corpus_text("launch_sites.sir")
    m = parse_module(text)
    raise_host(m)
    before = print_module(m).split("func @twice", 1)[1].split("func @once", 1)[0]
    propagate_host_to_device(m)
    after = print_module(m).split("func @twice", 1)[1].split("func @once", 1)[0]
    # the range getter stays, only the equal scalar is folded in
    assert "sycl.item.get_range" in after
    assert before != after


def test_range_branch_folds_and_result_is_unchanged():
    base, _ = run_host_program(load("range_branch.sir"), "host")
    m = _raised("range_branch.sir")
    propagate_host_to_device(m)
    canonicalize(m)
    assert verify_module(m) == []
    pick = m.lookup("pick")
    assert not any(op.name in ("loop.if", "sycl.nd_item.get_global_range") for op in pick.walk())
    assert pick.attributes["sycl.wg_size"] == (4,)
    after, _ = run_host_program(m, "host")
    assert diff_state(base, after) == ""


@pytest.mark.parametrize("name, entry", HOST_ENTRIES)
def test_propagation_preserves_host_execution(name, entry):
    base, _ = run_host_program(load(name), entry)
    m = _raised(name)
    propagate_host_to_device(m)
    canonicalize(m)
    assert verify_module(m) == []
    after, _ = run_host_program(m, entry)
    assert diff_state(base, after) == ""


@pytest.mark.parametrize("seed", range(60))
def test_propagation_preserves_random_host_programs(seed):
    text = host_program(seed)
    base, _ = run_host_program(parse_module(text), "host")
    m = parse_module(text)
    raise_host(m)
    propagate_host_to_device(m)
    canonicalize(m)
    assert verify_module(m) == []
    after, _ = run_host_program(m, "host")
    assert diff_state(base, after) == ""


@pytest.mark.parametrize("name", ["command_group.sir", "launch_sites.sir", "range_branch.sir"])
def test_unused_args_have_no_uses(name):
    m = _raised(name)
    propagate_host_to_device(m)
    for k in m.kernels():
        params = [p for p in k.arguments if "item" not in str(p.type)]
        for j in k.attributes.get(KERNEL_ARG_UNUSED, ()):
            assert not params[j].uses


@pytest.mark.parametrize("name", ["command_group.sir", "launch_sites.sir", "range_branch.sir"])
def test_host_passes_are_idempotent(name):
    m = _raised(name)
    propagate_host_to_device(m)
    once = print_module(m)
    assert raise_host(m).total() == 0
    assert propagate_host_to_device(m).total() == 0
    assert print_module(m) == once
