from __future__ import annotations

import random

import pytest

from conftest import load
from progen import memory_program
from syclopt.analyses.reachdef import DefSetLattice, defset_transfer
from syclopt.dataflow import (
    FixpointCapExceeded,
    ProgramPoint,
    SetUnionLattice,
    build_call_graph,
    solve_forward,
)
from syclopt.host import raise_host
from syclopt.ir import RefType, parse_module


def _gen_kill(f, seed, universe=8):
    rng = random.Random(seed)
    table = {}
    for op in f.walk():
        gen = frozenset(rng.sample(range(universe), rng.randint(0, 2)))
        kill = frozenset(rng.sample(range(universe), rng.randint(0, 2)))
        table[op.id] = (gen, kill)

    def transfer(state, op):
        gen, kill = table[op.id]
        return (state - kill) | gen

    return transfer


def _round_robin(f, transfer, lat):
    """Naive equation solving: sweep every equation until nothing changes.

    Each op has a ``before`` and ``after`` variable; region entries and
    exits are wired the way structured control flow executes.
    """
    before, after = {}, {}
    ops = [op for op in f.walk() if op is not f]
    for op in ops:
        before[op.id] = lat.bottom
        after[op.id] = lat.bottom

    def block_in(block, entry):
        # state flowing into each op of the block
        out = []
        cur = entry
        for op in block.ops:
            out.append((op, cur))
            cur = after[op.id]
        return out, cur

    changed = True
    while changed:
        changed = False
        updates = {}

        def feed(block, entry):
            pairs, exit_state = block_in(block, entry)
            for op, s in pairs:
                updates[("b", op.id)] = s
            return exit_state

        feed(f.regions[0].block, lat.bottom)
        for op in ops:
            b = before[op.id]
            if op.name == "loop.if":
                t = feed(op.regions[0].block, b)
                e = feed(op.regions[1].block, b) if len(op.regions) > 1 else b
                updates[("a", op.id)] = lat.join(t, e)
            elif op.name == "loop.for":
                head = after[op.id]
                exit_state = feed(op.regions[0].block, head)
                updates[("a", op.id)] = lat.join(b, exit_state)
            else:
                updates[("a", op.id)] = transfer(b, op)
        for (kind, oid), s in updates.items():
            table = before if kind == "b" else after
            if table[oid] != s:
                table[oid] = s
                changed = True
    return before, after


@pytest.mark.parametrize("seed", range(40))
def test_solver_matches_round_robin(seed):
    m = parse_module(memory_program(seed, max_ops=50))
    f = m.lookup("f")
    transfer = _gen_kill(f, seed)
    lat = SetUnionLattice()
    res = solve_forward(f, transfer, lat)
    before, after = _round_robin(f, transfer, lat)
    assert res.converged
    for op in f.walk():
        if op is f:
            continue
        assert res.state_before(op) == before[op.id], (seed, op.name)
        assert res.state_after(op) == after[op.id], (seed, op.name)


def test_random_programs_are_large_enough():
    sizes = [sum(1 for _ in parse_module(memory_program(s, max_ops=50)).lookup("f").walk()) for s in range(40)]
    assert max(sizes) >= 50


def test_identity_transfer_converges_in_one_sweep():
    m = parse_module(memory_program(3, max_ops=30))
    f = m.lookup("f")
    res = solve_forward(f, lambda s, op: s, SetUnionLattice(), entry=frozenset({1}))
    n_ops = sum(1 for op in f.walk() if op is not f)
    assert res.iterations == n_ops
    assert all(s == frozenset({1}) for s in res.before.values())


def test_solver_is_deterministic():
    m = parse_module(memory_program(21, max_ops=40))
    f = m.lookup("f")
    transfer = _gen_kill(f, 21)
    a = solve_forward(f, transfer, SetUnionLattice())
    b = solve_forward(f, transfer, SetUnionLattice())
    assert a.before == b.before and a.after == b.after


def test_reaching_defs_on_small_example(reaching_defs_mod):
    f = reaching_defs_mod.lookup("foo")
    ptr1, ptr2 = f.arguments[:2]
    const, if_op, load_op, _ = f.body.ops
    store_a = if_op.regions[0].block.ops[0]
    store_b = if_op.regions[1].block.ops[0]
    res = solve_forward(f, defset_transfer(ptr1), DefSetLattice())
    state = res.at(ProgramPoint(load_op))
    assert state.mods == {store_a}
    assert state.pmods == {store_b}
    assert res.at(ProgramPoint(const)) == DefSetLattice.bottom


def test_non_monotone_transfer_hits_the_cap():
    m = load("licm_pure.sir")
    f = m.lookup("scale")

    class Counter:
        bottom = 0

        @staticmethod
        def join(a, b):
            return max(a, b)

        @staticmethod
        def leq(a, b):
            return a <= b

    with pytest.raises(FixpointCapExceeded, match="fixpoint cap exceeded"):
        solve_forward(f, lambda s, op: s + 1, Counter(), cap=50)


@pytest.mark.parametrize("name", ["reaching_defs.sir", "gemm.sir", "reduction.sir", "licm_mayalias.sir"])
def test_reaching_defs_converge_on_corpus(name):
    m = load(name)
    for f in m.functions():
        for v in f.arguments:
            if not isinstance(v.type, RefType):
                continue
            assert solve_forward(f, defset_transfer(v), DefSetLattice()).converged


# -- call graph ----------------------------------------------------------------


def test_schedule_site_adds_host_to_kernel_edge(command_group_mod):
    cg = build_call_graph(command_group_mod)
    kernels = [k.sym_name for k in command_group_mod.kernels()]
    assert kernels
    for k in kernels:
        assert ("cgf", k) in cg.edges
        assert not cg.has_external_callers(k)


def test_raised_schedule_keeps_the_edge(command_group_mod):
    raise_host(command_group_mod)
    assert any(op.name == "sycl.host.schedule_kernel" for op in command_group_mod.walk())
    cg = build_call_graph(command_group_mod)
    for k in command_group_mod.kernels():
        assert ("cgf", k.sym_name) in cg.edges


def test_multiple_launch_sites_are_separate_edges():
    m = load("launch_sites.sir")
    cg = build_call_graph(m)
    assert len(cg.call_sites("twice")) == 2
    assert len(cg.call_sites("once")) == 1


def test_module_without_calls_has_no_edges():
    m = load("licm_pure.sir")
    cg = build_call_graph(m)
    assert cg.edges == []
    assert cg.cycles() == []


def test_mutual_recursion_is_a_cycle():
    m = parse_module(
        """
module {
  func @a(%x: i32) {
    func.call @b(%x) : (i32) -> ()
    func.return() : () -> ()
  }
  func @b(%x: i32) {
    func.call @a(%x) : (i32) -> ()
    func.return() : () -> ()
  }
}
"""
    )
    cg = build_call_graph(m)
    assert cg.cycles() == [["a", "b"]]
    assert cg.callees("a") == {"b"}


def test_internal_linkage_hides_external_callers():
    m = load("uniformity_call.sir")
    cg = build_call_graph(m)
    internal = [f.sym_name for f in m.functions() if f.attributes.get("linkage") == "internal"]
    assert internal
    for name in internal:
        assert not cg.has_external_callers(name)


def test_set_union_lattice_laws():
    lat = SetUnionLattice()
    a, b = frozenset({1, 2}), frozenset({2, 3})
    assert lat.join(a, b) == lat.join(b, a) == frozenset({1, 2, 3})
    assert lat.join(a, lat.bottom) == a
    assert lat.leq(a, lat.join(a, b))
    assert not lat.leq(b, a)
