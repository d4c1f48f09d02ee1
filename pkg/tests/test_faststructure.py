import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cmereduce import fixtures as F
from cmereduce.faststructure import (
    SCCKind,
    analyze,
    condensation_dot,
    tarjan_scc,
)
from cmereduce.network import fast_invariant_matrix
from cmereduce.statespace import Generator, explore

from conftest import SMALL_FIXTURES, reduction_of


def _structure(net):
    space, split = explore(net)
    return space, split, analyze(space, split, fast_invariant_matrix(net))


@st.composite
def digraphs(draw):
    n = draw(st.integers(1, 25))
    edges = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n))
    return n, edges


@given(digraphs())
def test_tarjan_matches_networkx(graph):
    n, edges = graph
    succ = [[] for _ in range(n)]
    for a, b in edges:
        if a != b and b not in succ[a]:
            succ[a].append(b)
    ours = {frozenset(c) for c in tarjan_scc(succ)}
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    g.add_edges_from((a, b) for a, b in edges if a != b)
    assert ours == {frozenset(c) for c in nx.strongly_connected_components(g)}


def test_tarjan_deep_chain_is_iterative():
    n = 20_000
    succ = [[i + 1] for i in range(n - 1)] + [[0]]
    comps = tarjan_scc(succ)
    assert len(comps) == 1 and len(comps[0]) == n


@pytest.mark.parametrize("factory, absorbing", [(F.network1, 3), (F.network2, 6), (F.network3, 5)])
def test_seven_species_components(factory, absorbing):
    _, _, s = _structure(factory())
    assert len(s.components) == 3
    assert s.n_aggregated == absorbing


def test_network3_scc_kinds():
    _, _, s = _structure(F.network3())
    kinds = [[scc.kind for scc in c.sccs] for c in s.components]
    count = lambda ks, k: sum(1 for x in ks if x is k)  # noqa: E731
    summary = sorted(
        (count(ks, SCCKind.ABSORBING), count(ks, SCCKind.INTERNAL), count(ks, SCCKind.SOURCE)) for ks in kinds
    )
    assert summary == [(1, 0, 0), (2, 1, 1), (2, 1, 1)]
    sizes = [[len(scc.member_states) for scc in c.sccs] for c in s.components]
    assert sorted(sizes) == [[1, 2, 1, 1], [2, 4, 2, 2], [3]]


def test_wilhelm_simplexes_overlap_at_the_source():
    space, _, s = _structure(F.wilhelm())
    assert len(s.components) == 1
    absorbing = {space.state(scc.member_states[0]) for scc in s.absorbing}
    assert absorbing == {(1, 0, 2), (0, 0, 3)}
    by_abs = {space.state(s.sccs[x.absorbing_scc].member_states[0]): {space.state(v) for v in x.member_states}
              for x in s.simplexes}
    assert by_abs[(1, 0, 2)] == {(1, 0, 2), (1, 1, 1), (1, 2, 0)}
    assert by_abs[(0, 0, 3)] == {(0, 0, 3), (0, 1, 2), (0, 2, 1), (0, 3, 0), (1, 2, 0)}
    assert all(x.label == (3,) for x in s.simplexes)


def test_input_ab_components_are_labelled_by_total():
    space, _, s = _structure(F.input_ab())
    assert all(c.is_strongly_connected for c in s.components)
    assert len(s.simplexes) == len(s.components) == 13
    for x in s.simplexes:
        totals = {sum(space.state(v)) for v in x.member_states}
        assert totals == {x.label[0]}


@pytest.mark.parametrize("name", sorted(SMALL_FIXTURES))
def test_canonical_order_is_block_upper_triangular(name):
    red = reduction_of(name)
    s, kf = red.structure, red.split.fast
    perm = s.ordering.permutation
    assert sorted(perm.tolist()) == list(range(s.n_states))
    dense = s.ordering.permute(kf)
    scc_pos = np.empty(s.n_states, dtype=np.int64)
    comp_pos = np.empty(s.n_states, dtype=np.int64)
    for scc in s.sccs:
        lo, hi = s.ordering.scc_bounds[scc.id]
        scc_pos[lo:hi] = scc.id
        comp_pos[lo:hi] = scc.component
    rows, cols = np.nonzero(dense)
    assert np.all(comp_pos[rows] == comp_pos[cols])
    # fast flow only moves toward absorbing SCCs, which come first
    assert np.all(scc_pos[rows] <= scc_pos[cols])
    # SCC ids follow the permutation
    assert [scc.id for scc in s.sccs] == list(range(len(s.sccs)))


@pytest.mark.parametrize("name", sorted(SMALL_FIXTURES))
def test_zero_eigenvalue_multiplicity(name):
    red = reduction_of(name)
    kf = red.split.fast.matrix.tocsc()
    nullity = 0
    # K^f is block diagonal over fast components, so check each block densely
    for comp in red.structure.components:
        idx = np.asarray(comp.member_states)
        block = kf[idx][:, idx].toarray()
        rank = np.linalg.matrix_rank(block)
        # semisimple zero eigenvalue: rank(K) == rank(K^2)
        assert np.linalg.matrix_rank(block @ block) == rank
        nullity += idx.size - rank
    assert nullity == red.structure.n_aggregated


def test_component_of_state_and_dot():
    space, split, s = _structure(F.network3())
    comp = s.component_of_state()
    for c in s.components:
        assert set(np.nonzero(comp == c.id)[0]) == set(c.member_states)
    dot = condensation_dot(s, space)
    assert dot.startswith("digraph") and dot.count("subgraph cluster_") == 3
    assert dot.count("doublecircle") == 5


def test_without_fast_edges_every_state_is_absorbing():
    space, split = explore(F.triangular())
    empty = Generator.from_dense(np.zeros((space.size, space.size)))
    s = analyze(space, empty)
    assert len(s.components) == s.n_aggregated == space.size
    assert all(c.is_strongly_connected for c in s.components)
