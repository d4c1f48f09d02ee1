import numpy as np
import pytest
import scipy.linalg
import scipy.stats
from hypothesis import given
from hypothesis import strategies as st

from cmereduce import fixtures as F
from cmereduce.dynamics import (
    NotStationary,
    compare_full_reduced,
    integrate,
    moment_residuals,
    moments,
    stationary,
)
from cmereduce.reduction import reduce_network
from cmereduce.statespace import Generator, explore

from conftest import SMALL_FIXTURES, point_mass, reduction_of

rates_st = st.floats(min_value=0.01, max_value=50.0, allow_nan=False, allow_infinity=False)


@st.composite
def generators(draw):
    n = draw(st.integers(1, 10))
    k = np.zeros((n, n))
    for _ in range(draw(st.integers(0, 3 * n))):
        i, j = draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))
        if i != j:
            k[i, j] = draw(rates_st)
    k -= np.diag(k.sum(axis=0))
    return k


@given(generators(), st.floats(0.01, 5.0))
def test_uniformization_matches_expm(k, t):
    gen = Generator.from_dense(k)
    p0 = np.full(k.shape[0], 1.0 / k.shape[0])
    times = [0.0, t / 2, t]
    uni = integrate(gen, p0, times).distributions
    ref = np.array([scipy.linalg.expm(k * s) @ p0 for s in times])
    assert np.abs(uni - ref).max() <= 1e-10
    assert np.allclose(uni.sum(axis=1), 1.0, atol=1e-12)
    assert uni.min() >= 0.0


@pytest.mark.parametrize("name", ["motor_cw", "network2", "triangular5", "inputAB"])
def test_methods_agree_on_fixtures(name):
    red = reduction_of(name)
    times = np.linspace(0, 20, 9)
    p0 = point_mass(red.space.size)
    a = integrate(red.split.full, p0, times).distributions
    b = integrate(red.split.full, p0, times, method="expm").distributions
    assert np.abs(a - b).max() <= 1e-10


def test_sparse_uniformization_path():
    net = F.closed_chain(20)
    space, split = explore(net)
    assert space.size > 256
    times = [0.0, 0.5, 2.0]
    a = integrate(split.full, point_mass(space.size), times).distributions
    b = integrate(split.full, point_mass(space.size), times, method="expm").distributions
    assert np.abs(a - b).max() <= 1e-10


def test_birthdeath_is_poisson_in_time():
    # from zero molecules, A(t) is Poisson with mean 2 (1 - e^{-t}); the cap at 30 is negligible
    net = F.birthdeath(cap=30, n0=0)
    space, split = explore(net)
    times = np.array([0.0, 0.3, 1.0, 4.0])
    traj = integrate(split.full, point_mass(space.size), times)
    counts = space.states[:, 0]
    for t, p in zip(times, traj.distributions):
        ref = scipy.stats.poisson.pmf(counts, 2.0 * (1 - np.exp(-t)))
        assert np.abs(p - ref).max() <= 1e-10


def test_birthdeath_stationary_truncated_poisson():
    space, split = explore(F.birthdeath())
    (p,) = stationary(split.full)
    counts = space.states[:, 0]
    ref = scipy.stats.poisson.pmf(counts, 2.0)
    ref /= ref.sum()
    assert 0.5 * np.abs(p - ref).sum() <= 1e-6


def test_stationary_per_closed_class():
    red = reduction_of("triangular")
    (p,) = stationary(red.reduced.k_tilde)
    assert np.abs(red.reduced.k_tilde.matrix @ p).max() <= 1e-14
    # two absorbing states give two stationary vectors
    k = Generator.from_dense([[0.0, 1.0, 0.0], [0.0, -2.0, 0.0], [0.0, 1.0, 0.0]])
    out = stationary(k)
    assert [v.tolist() for v in out] == [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]


def test_integrate_validates_input():
    k = Generator.from_dense([[-1.0, 1.0], [1.0, -1.0]])
    with pytest.raises(ValueError):
        integrate(k, [1.0], [0.0])
    with pytest.raises(ValueError):
        integrate(k, [1.0, 0.0], [1.0, 0.5])
    with pytest.raises(ValueError):
        integrate(k, [1.0, 0.0], [0.0], method="rk4")
    with pytest.raises(ValueError):
        integrate(Generator.from_dense([[-1.0, 0.0], [2.0, 0.0]]), [1.0, 0.0], [0.0, 1.0])


def test_zero_generator_is_constant():
    k = Generator.from_dense(np.zeros((3, 3)))
    traj = integrate(k, [0.2, 0.3, 0.5], [0.0, 10.0])
    assert traj.distributions[1].tolist() == [0.2, 0.3, 0.5]


def _stationary_full(red):
    return stationary(red.split.full)[0]


@pytest.mark.parametrize("name", sorted(SMALL_FIXTURES))
def test_moment_identities_at_stationarity(name):
    red = reduction_of(name)
    p = _stationary_full(red)
    res = moment_residuals(red.network, red.space, p)
    assert res.first_order_max <= 1e-8
    assert res.second_order <= 1e-6


@pytest.mark.parametrize("name", ["triangular", "network1", "motor_cw", "enzyme"])
def test_fast_moment_identities_on_fast_invariants(name):
    red = reduction_of(name)
    pi = red.pair.Pi.tocsc()
    for col in range(min(pi.shape[1], 6)):
        p = pi[:, col].toarray().ravel()
        res = moment_residuals(red.network, red.space, p, fast_only=True)
        assert res.first_order_max <= 1e-8
        assert res.second_order <= 1e-6


def test_moment_residual_detects_nonstationary():
    red = reduction_of("birthdeath")
    p = _stationary_full(red)
    q = p.copy()
    q[0] += 0.01
    q /= q.sum()
    with pytest.raises(NotStationary):
        moment_residuals(red.network, red.space, q)
    res = moment_residuals(red.network, red.space, q, check=False)
    assert res.first_order_max > 1e-4


def test_moments_of_point_mass():
    red = reduction_of("network1")
    mean, var = moments(red.space, point_mass(red.space.size))
    assert mean.tolist() == [1, 0, 0, 0, 0, 2, 0]
    assert var.tolist() == [0.0] * 7


def test_compare_identical_trajectories_is_zero():
    red = reduction_of("birthdeath")
    times = np.linspace(0, 5, 6)
    full = integrate(red.split.full, point_mass(red.space.size), times)
    reduced = integrate(red.reduced.k_tilde, red.initial_reduced(), times)
    report = compare_full_reduced(full, red.pair, reduced, red.space)
    assert report.sup_prob_error <= 1e-12
    assert report.sup_mean_error.max() <= 1e-10
    assert report.sup_var_error.max() <= 1e-9


def test_compare_rejects_mismatched_grids():
    red = reduction_of("birthdeath")
    a = integrate(red.split.full, point_mass(red.space.size), [0.0, 1.0])
    b = integrate(red.reduced.k_tilde, red.initial_reduced(), [0.0, 2.0])
    with pytest.raises(ValueError):
        compare_full_reduced(a, red.pair, b)


def _sup_error(net, t_end=50.0, n=201):
    red = reduce_network(net)
    times = np.linspace(0.0, t_end, n)
    full = integrate(red.split.full, point_mass(red.space.size), times)
    reduced = integrate(red.reduced.k_tilde, red.initial_reduced(), times)
    return compare_full_reduced(full, red.pair, reduced).sup_prob_error


def test_error_shrinks_with_scale_separation():
    errs = [_sup_error(F.network1(fast_rate=f)) for f in (10.0, 100.0, 1000.0)]
    assert errs[0] <= 0.05
    assert errs[0] > errs[1] > errs[2]
    order = np.polyfit(np.log([10.0, 100.0, 1000.0]), np.log(errs), 1)[0]
    assert -order >= 0.8
