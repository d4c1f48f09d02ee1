import itertools
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cmereduce import fixtures as F
from cmereduce.network import parse_network
from cmereduce.statespace import (
    CapExceeded,
    Generator,
    StateBudgetExceeded,
    UnboundedStateSpace,
    binomial,
    explore,
    explore_fast_component,
    is_provably_bounded,
    propensity,
    reaction_rates,
    state_count_closed,
)

# Accessible states of the seven-species networks from (1,0,0,0,0,2,0), species A..G.
NETWORK1_STATES = """
1000020 0100020 1010000 1000001 0010020 0001020 0110000 0100001 1100000
0000040 0020000 0010001 0000120 0011000 0001001 0200000 1001000 0000021
0010100 0000101 0101000 1000100 0000002 0100100 0002000 0001100 0000200
""".split()


def test_binomial_and_propensity():
    assert binomial(5, 2) == 10
    assert binomial(1, 2) == 0
    net = F.wilhelm()
    # S + 2X at S=1, X=2 -> k1 * 1 * C(2,2)
    assert propensity(net, (1, 2, 0), 0) == 10.0
    assert propensity(net, (1, 2, 0), 1) == 0.0


def test_triangular_six_states():
    space, split = explore(F.triangular(2))
    assert space.size == 6
    assert {space.state(i) for i in range(6)} == {s for s in itertools.product(range(3), repeat=3) if sum(s) == 2}
    assert space.state(0) == (2, 0, 0)


def test_network1_table_states():
    space, _ = explore(F.network1())
    assert space.size == 27
    expected = {tuple(int(c) for c in s) for s in NETWORK1_STATES}
    assert {space.state(i) for i in range(space.size)} == expected


@pytest.mark.parametrize("factory, count", [(F.network2, 27), (F.network3, 18)])
def test_other_networks_counts(factory, count):
    assert explore(factory())[0].size == count


def test_closed_chain_count_and_speed():
    t0 = time.perf_counter()
    space, split = explore(F.closed_chain(50))
    elapsed = time.perf_counter() - t0
    assert space.size == 23_426 == state_count_closed(4, 50)
    assert elapsed < 5.0


@given(n0=st.integers(0, 12), m=st.integers(2, 4))
def test_closed_count_matches_enumeration(n0, m):
    species = [f"X{i}" for i in range(m)]
    lines = ["species: " + ", ".join(species)]
    for i in range(m - 1):
        lines.append(f"r{i}: X{i} <-> X{i + 1} rate=1 rrate=1 slow")
    lines.append(f"init: X0={n0}")
    net = parse_network("\n".join(lines) + "\n")
    assert explore(net)[0].size == state_count_closed(m, n0)


def test_state_count_overflow():
    with pytest.raises(OverflowError):
        state_count_closed(40, 10**6)


@pytest.mark.parametrize("name", ["triangular", "network1", "network2", "network3", "wilhelm", "enzyme", "motor"])
def test_generators_are_markov(name):
    _, split = explore(F.FIXTURES[name]())
    for gen in (split.full, split.fast, split.slow):
        gen.validate()
        assert np.abs(gen.column_sums()).max() <= 1e-12 * max(gen.max_abs(), 1.0)
    assert np.allclose((split.fast + split.slow).toarray(), split.full.toarray(), atol=1e-13)


@pytest.mark.parametrize("n0", [2, 3, 5])
def test_triangular_block_formulas(n0):
    k = dict(k1=1.3, k2=0.7, k3=0.11, k4=0.23, k5=0.37, k6=0.41)
    space, split = explore(F.triangular(n0, rates=k))
    ks = split.slow.toarray()
    kf = split.fast.toarray()
    # component i (1-based) holds C = i-1; its j-th state has B = j
    pos = {}
    for idx in range(space.size):
        a, b, c = space.state(idx)
        pos[(c + 1, b)] = idx
    n_comp = n0 + 1
    for i in range(1, n_comp):
        size_i = n0 - i + 2
        size_up = size_i - 1
        for j in range(size_up):
            src = pos[(i + 1, j)]
            assert ks[pos[(i, j)], src] == pytest.approx(i * k["k5"], rel=1e-14)
            assert ks[pos[(i, j + 1)], src] == pytest.approx(i * k["k4"], rel=1e-14)
        for j in range(size_i):
            src = pos[(i, j)]
            n_a = n0 - i + 1 - j
            if n_a > 0:
                assert ks[pos[(i + 1, j)], src] == pytest.approx(n_a * k["k6"], rel=1e-14)
            if j > 0:
                assert ks[pos[(i + 1, j - 1)], src] == pytest.approx(j * k["k3"], rel=1e-14)
    # fast blocks are tridiagonal in B within each component
    for (i, j), src in pos.items():
        n_a = n0 - i + 1 - j
        expected = {}
        if n_a > 0:
            expected[pos[(i, j + 1)]] = n_a * k["k1"]
        if j > 0:
            expected[pos[(i, j - 1)]] = j * k["k2"]
        off = {t: kf[t, src] for t in np.nonzero(kf[:, src])[0] if t != src}
        assert off == pytest.approx(expected, rel=1e-14)


def test_caps_record_leakage():
    net = F.birthdeath(cap=5)
    space, split = explore(net)
    assert space.size == 6
    assert space.dropped_rate[space.index((5,))] == 2.0
    assert space.dropped_rate.sum() == 2.0
    p = np.zeros(6)
    p[space.index((5,))] = 0.5
    assert space.leakage_rate(p) == 1.0
    with pytest.raises(CapExceeded):
        explore(net, strict_caps=True)


def test_unbounded_error_names_input_reaction():
    net = F.input_ab().with_caps(None)
    assert not is_provably_bounded(net)
    with pytest.raises(UnboundedStateSpace, match="input reaction\\(s\\) k1"):
        explore(net)
    assert is_provably_bounded(F.triangular())


def test_state_budget():
    with pytest.raises(StateBudgetExceeded):
        explore(F.closed_chain(50), max_states=1000)


def test_reaction_rates_zero_when_truncated():
    net = F.birthdeath(cap=3)
    space, _ = explore(net)
    rates = reaction_rates(net, space)
    top = space.index((3,))
    assert rates[top, 0] == 0.0
    assert rates[top, 1] == 3.0


def test_generator_from_columns_diagonal():
    gen = Generator.from_columns([{1: 2.0, 2: 1.0}, {0: 0.5}, {}])
    dense = gen.toarray()
    assert dense[:, 0].tolist() == [-3.0, 2.0, 1.0]
    assert dense[:, 2].tolist() == [0.0, 0.0, 0.0]
    assert gen.diagonal().tolist() == [-3.0, -0.5, 0.0]


def test_explore_fast_component_matches_global_block():
    net = F.enzyme(init=(2, 6, 0, 2, 0, 0))
    space, split = explore(net)
    local_space, local_gen = explore_fast_component(net, net.initial_state)
    assert local_space.state(0) == net.initial_state
    glob = [space.index(local_space.state(i)) for i in range(local_space.size)]
    block = split.fast.toarray()[np.ix_(glob, glob)]
    assert np.allclose(block, local_gen.toarray(), rtol=0, atol=1e-14)
    # fast reactions never leave the block
    outside = np.setdiff1d(np.arange(space.size), glob)
    assert not split.fast.toarray()[np.ix_(outside, glob)].any()
