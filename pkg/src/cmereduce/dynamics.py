"""Time evolution and stationary analysis of master-equation generators.

``integrate`` propagates ``dp/dt = K p`` by uniformization, which stays
stable however stiff ``K`` is.  A dense matrix-exponential path is kept for
small systems and for cross-checking.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.stats import poisson

from .faststructure import adjacency, tarjan_scc
from .network import ReactionNetwork
from .reduction import ProjectionPair, invariant_distribution, reduced_moments
from .statespace import Generator, StateSpace, reaction_rates

__all__ = [
    "DistributionTrajectory",
    "MomentResidual",
    "ComparisonReport",
    "NotStationary",
    "integrate",
    "stationary",
    "moments",
    "compare_full_reduced",
    "moment_residuals",
    "transition_targets",
]

log = logging.getLogger(__name__)

TAIL_TOL = 1e-12
SUM_TOL = 1e-9
DENSE_P_LIMIT = 256
EXPM_LIMIT = 2000


class NotStationary(ValueError):
    pass


@dataclass(frozen=True)
class DistributionTrajectory:
    times: np.ndarray
    distributions: np.ndarray
    basis: str

    @property
    def dim(self) -> int:
        return self.distributions.shape[1]


@dataclass(frozen=True)
class MomentResidual:
    first_order: np.ndarray
    second_order: float

    @property
    def first_order_max(self) -> float:
        return float(np.abs(self.first_order).max(initial=0.0))


@dataclass(frozen=True)
class ComparisonReport:
    times: np.ndarray
    prob_error: np.ndarray
    mean_error: np.ndarray
    var_error: np.ndarray

    @property
    def sup_prob_error(self) -> float:
        return float(self.prob_error.max(initial=0.0))

    @property
    def sup_mean_error(self) -> np.ndarray:
        return self.mean_error.max(axis=0)

    @property
    def sup_var_error(self) -> np.ndarray:
        return self.var_error.max(axis=0)


def _check_generator(k: Generator) -> None:
    try:
        k.validate(1e-9)
    except ValueError as err:
        raise ValueError(f"not a generator: {err}") from None


def _normalise(p: np.ndarray) -> np.ndarray:
    low = p.min(initial=0.0)
    if low < -TAIL_TOL:
        raise ArithmeticError(f"probability entry {low:.3e} below clipping tolerance")
    if low < 0:
        log.debug("clipped negative mass %.3e", low)
        p = np.clip(p, 0.0, None)
    total = math.fsum(p)
    if abs(total - 1.0) > SUM_TOL:
        raise ArithmeticError(f"probability mass drifted to {total!r}")
    return p / total


def _uniformized_step(apply_p, p: np.ndarray, lam_t: float) -> np.ndarray:
    """``exp(lam_t (P - I)) p`` as a truncated Poisson mixture of ``P^k p``."""
    if lam_t == 0.0:
        return p.copy()
    kmax = int(poisson.isf(TAIL_TOL, lam_t)) + 1
    kmin = max(int(poisson.ppf(TAIL_TOL, lam_t)), 0)
    weights = poisson.pmf(np.arange(kmin, kmax + 1), lam_t)
    v = p.copy()
    for _ in range(kmin):
        v = apply_p(v)
    out = weights[0] * v
    for w in weights[1:]:
        v = apply_p(v)
        out += w * v
    return out


def integrate(
    k: Generator,
    p0,
    times: Sequence[float],
    method: str = "uniformization",
) -> DistributionTrajectory:
    """Distributions ``exp(K t) p0`` at every time in ``times`` (increasing, from 0)."""
    p0 = np.asarray(p0, dtype=float)
    times = np.asarray(times, dtype=float)
    if p0.shape != (k.dim,):
        raise ValueError(f"p0 has shape {p0.shape}, generator has dimension {k.dim}")
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be non-negative and strictly increasing")
    _check_generator(k)
    out = np.empty((times.size, k.dim))
    p = p0.copy()
    prev = 0.0
    if method == "expm":
        if k.dim > EXPM_LIMIT:
            raise ValueError(f"dense exponential limited to dimension {EXPM_LIMIT}")
        dense = k.toarray()
        for n, t in enumerate(times):
            if t > prev:
                p = _normalise(la.expm(dense * (t - prev)) @ p)
            out[n] = p
            prev = t
        return DistributionTrajectory(times, out, f"dim{k.dim}")
    if method != "uniformization":
        raise ValueError(f"unknown method {method!r}")
    lam = float(np.abs(k.diagonal()).max(initial=0.0))
    if lam > 0:
        pmat = sp.identity(k.dim, format="csr") + k.matrix.tocsr() / lam
        if k.dim <= DENSE_P_LIMIT:
            dense = pmat.toarray()
            apply_p = dense.__matmul__
        else:
            apply_p = pmat.__matmul__
    for n, t in enumerate(times):
        if t > prev and lam > 0:
            p = _normalise(_uniformized_step(apply_p, p, lam * (t - prev)))
        out[n] = p
        prev = t
    return DistributionTrajectory(times, out, f"dim{k.dim}")


def stationary(k: Generator) -> list[np.ndarray]:
    """One stationary distribution per closed communicating class, ordered by smallest state."""
    succ = adjacency(k)
    sccs = tarjan_scc(succ)
    where = np.empty(k.dim, dtype=np.int64)
    for c, members in enumerate(sccs):
        where[members] = c
    out = []
    mat = k.matrix.tocsc()
    for c, members in sorted(enumerate(sccs), key=lambda cm: cm[1][0]):
        if any(where[w] != c for v in members for w in succ[v]):
            continue
        dist = invariant_distribution(mat[members][:, members], c)
        p = np.zeros(k.dim)
        p[members] = dist.pi
        out.append(p)
    return out


def moments(space: StateSpace, p) -> tuple[np.ndarray, np.ndarray]:
    """Per-species mean and variance of a distribution over ``space``."""
    x = space.states.astype(float)
    p = np.asarray(p, dtype=float)
    mean = p @ x
    var = p @ (x * x) - mean * mean
    return mean, np.clip(var, 0.0, None)


def compare_full_reduced(
    full: DistributionTrajectory,
    pair: ProjectionPair,
    reduced: DistributionTrajectory,
    space: StateSpace | None = None,
) -> ComparisonReport:
    """Error of the reduced evolution against ``L p(t)`` and, with ``space``, species moments."""
    if full.times.shape != reduced.times.shape or np.any(full.times != reduced.times):
        raise ValueError("full and reduced trajectories use different time grids")
    projected = np.asarray((pair.L @ full.distributions.T).T)
    prob_error = np.abs(projected - reduced.distributions).max(axis=1)
    m = 0 if space is None else space.states.shape[1]
    mean_err = np.zeros((full.times.size, m))
    var_err = np.zeros((full.times.size, m))
    if space is not None:
        for n in range(full.times.size):
            mf, vf = moments(space, full.distributions[n])
            mr, vr = reduced_moments(pair, space, reduced.distributions[n])
            mean_err[n] = np.abs(mf - mr)
            var_err[n] = np.abs(vf - vr)
    return ComparisonReport(full.times, prob_error, mean_err, var_err)


def transition_targets(net: ReactionNetwork, space: StateSpace) -> np.ndarray:
    """``n_s x r`` index of the state each reaction leads to, ``-1`` if absent."""
    out = np.full((space.size, net.r), -1, dtype=np.int64)
    for j in range(space.size):
        n = space.states[j]
        for l in range(net.r):
            t = space.index_of.get(tuple(int(x) for x in n + net.change_matrix[l]))
            if t is not None:
                out[j, l] = t
    return out


def moment_residuals(
    net: ReactionNetwork,
    space: StateSpace,
    p,
    fast_only: bool = False,
    check: bool = True,
    tol: float = 1e-10,
) -> MomentResidual:
    """Residuals of the stationary first and second moment identities.

    With ``fast_only`` the sums use fast reactions alone (``p`` should then be
    stationary for ``K^f``).  Rates are the effective ones of the explored
    chain, zero where a reaction would leave the cap box.
    """
    p = np.asarray(p, dtype=float)
    rates = reaction_rates(net, space)
    if fast_only:
        rates = rates * net.fast_mask[None, :]
    if check:
        targets = transition_targets(net, space)
        flux = rates * p[:, None]
        kp = -flux.sum(axis=1)
        for l in range(net.r):
            ok = targets[:, l] >= 0
            np.add.at(kp, targets[ok, l], flux[ok, l])
        scale = max(float(rates.max(initial=0.0)), 1.0)
        if np.abs(kp).max(initial=0.0) > tol * scale:
            raise NotStationary(f"distribution is not stationary: |Kp| = {np.abs(kp).max():.3e}")
    d = net.change_matrix.astype(float)
    x = space.states.astype(float)
    er = p @ rates
    first = d.T @ er
    ern = (rates * p[:, None]).T @ x
    second = ern.T @ d + d.T @ ern + d.T @ (er[:, None] * d)
    return MomentResidual(first, float(np.abs(second).max(initial=0.0)))
