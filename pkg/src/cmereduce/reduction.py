"""Slow-scale reduction of a split generator.

For every absorbing strong component of the fast dynamics there is one
aggregated state.  ``Pi`` carries the fast invariant distributions (zero on
transient states) and ``L`` the absorption probabilities into each absorbing
component, so that ``L Pi = I``, ``K^f Pi = 0`` and ``L K^f = 0``.  The reduced
generator is ``K~ = L K^s Pi``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .faststructure import FastStructure, SCCKind, analyze
from .network import NoFastSubsystem, ReactionNetwork, fast_invariant_matrix
from .statespace import DEFAULT_STATE_BUDGET, Generator, SplitGenerator, StateSpace, explore

__all__ = [
    "NumericalRankDeficiency",
    "SingularInternalBlock",
    "NotMarkov",
    "InvariantDistribution",
    "ProjectionPair",
    "AggregatedState",
    "ReducedSystem",
    "RateCheck",
    "Reduction",
    "invariant_distribution",
    "build_projections",
    "reduced_generator",
    "lift_distribution",
    "conditional_moments",
    "reduced_moments",
    "conditional_rate_check",
    "reduce_network",
]

log = logging.getLogger(__name__)

# Dense LU is used below this block size, sparse LU above.
_DENSE_LIMIT = 600
ALGEBRA_RTOL = 1e-10
CLIP_ATOL = 1e-12


class NumericalRankDeficiency(ArithmeticError):
    pass


class SingularInternalBlock(ArithmeticError):
    pass


class NotMarkov(ArithmeticError):
    pass


@dataclass(frozen=True)
class InvariantDistribution:
    scc_id: int
    pi: np.ndarray


@dataclass(frozen=True)
class ProjectionPair:
    Pi: sp.csc_matrix
    L: sp.csr_matrix
    structure: FastStructure
    distributions: tuple[InvariantDistribution, ...] = field(repr=False)

    @property
    def n_aggregated(self) -> int:
        return self.Pi.shape[1]

    @property
    def n_states(self) -> int:
        return self.Pi.shape[0]

    def identity_errors(self, fast: Generator) -> dict[str, float]:
        """Max-norm residuals of the biorthogonality and null-space identities."""
        Pi, L, Kf = self.Pi, self.L, fast.matrix
        lp = (L @ Pi).toarray() - np.eye(self.n_aggregated)
        return {
            "L_Pi_minus_I": float(np.abs(lp).max(initial=0.0)),
            "Kf_Pi": float(np.abs((Kf @ Pi).toarray()).max(initial=0.0)),
            "L_Kf": float(np.abs((L @ Kf).toarray()).max(initial=0.0)),
            "L_colsum_minus_1": float(np.abs(np.asarray(L.sum(axis=0)).ravel() - 1.0).max(initial=0.0)),
            "Kf_max": fast.max_abs(),
        }


@dataclass(frozen=True)
class AggregatedState:
    index: int
    scc_id: int
    component: int
    representative_state: tuple[int, ...]
    ntilde: tuple[int, ...] | None
    size: int


@dataclass(frozen=True)
class ReducedSystem:
    k_tilde: Generator
    aggregated_states: tuple[AggregatedState, ...]
    slow_stoich: dict[int, tuple[int, ...]]
    raw_column_sums: np.ndarray = field(repr=False)
    raw_min_offdiag: float = 0.0

    @property
    def dim(self) -> int:
        return self.k_tilde.dim


@dataclass(frozen=True)
class RateCheck:
    max_discrepancy: float
    checked_pairs: int
    skipped_pairs: tuple[tuple[int, int], ...]


def _lu_solve(a, b, what: str, exc=NumericalRankDeficiency):
    """Solve ``a x = b`` with LU, raising ``exc`` when ``a`` is numerically singular."""
    if sp.issparse(a) and a.shape[0] > _DENSE_LIMIT:
        try:
            lu = spla.splu(sp.csc_matrix(a))
        except RuntimeError as err:
            raise exc(f"{what}: singular matrix") from err
        diag = np.abs(lu.U.diagonal())
        if diag.min() <= 1e-13 * max(diag.max(), 1e-300):
            raise exc(f"{what}: numerically singular")
        return lu.solve(np.asarray(b, dtype=float))
    dense = a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)
    lu, piv = la.lu_factor(dense, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.size and diag.min() <= 1e-13 * max(diag.max(), 1e-300):
        raise exc(f"{what}: numerically singular")
    return la.lu_solve((lu, piv), np.asarray(b, dtype=float), check_finite=False)


def invariant_distribution(block, scc_id: int = -1) -> InvariantDistribution:
    """Normalized null vector of a generator block (bordered LU solve).

    The last balance row is replaced by the normalization row, which is
    nonsingular exactly when the null space is one-dimensional.
    """
    n = block.shape[0]
    if n == 1:
        return InvariantDistribution(scc_id, np.ones(1))
    if sp.issparse(block):
        a = sp.lil_matrix(block, dtype=float)
        a[n - 1, :] = np.ones(n)
        a = a.tocsc()
    else:
        a = np.array(block, dtype=float)
        a[n - 1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = _lu_solve(a, rhs, f"invariant distribution of SCC {scc_id}")
    if pi.min() < -CLIP_ATOL:
        raise NumericalRankDeficiency(f"SCC {scc_id}: negative invariant probability {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    pi /= math.fsum(pi)
    return InvariantDistribution(scc_id, pi)


def build_projections(structure: FastStructure, split: SplitGenerator | Generator) -> ProjectionPair:
    """Assemble ``Pi`` (n_s x n_f) and ``L`` (n_f x n_s) component by component."""
    fast = split.fast if isinstance(split, SplitGenerator) else split
    kf = fast.matrix.tocsc()
    n = structure.n_states
    pi_rows: list[int] = []
    pi_cols: list[int] = []
    pi_vals: list[float] = []
    l_rows: list[int] = []
    l_cols: list[int] = []
    l_vals: list[float] = []
    dists = []
    agg = 0
    for comp in structure.components:
        absorbing = comp.absorbing
        rows = list(range(agg, agg + len(absorbing)))
        # L restricted to this component's aggregated rows, filled SCC by SCC
        done_states: list[int] = []
        done_vals: list[np.ndarray] = []
        for local, scc in enumerate(absorbing):
            idx = list(scc.member_states)
            dist = invariant_distribution(kf[idx][:, idx], scc.id)
            dists.append(dist)
            pi_rows.extend(idx)
            pi_cols.extend([agg + local] * len(idx))
            pi_vals.extend(dist.pi)
            block = np.zeros((len(absorbing), len(idx)))
            block[local, :] = 1.0
            done_states.extend(idx)
            done_vals.append(block)
        for scc in comp.sccs:
            if scc.kind is SCCKind.ABSORBING:
                continue
            idx = list(scc.member_states)
            l_done = np.hstack(done_vals)
            coupling = kf[done_states][:, idx]
            rhs = -(coupling.T @ l_done.T)
            kcc_t = kf[idx][:, idx].T
            x = _lu_solve(kcc_t, rhs, f"transient SCC {scc.id}", SingularInternalBlock)
            x = np.asarray(x).reshape(len(idx), len(absorbing))
            done_states.extend(idx)
            done_vals.append(x.T)
        l_done = np.hstack(done_vals)
        for local in range(len(absorbing)):
            nz = np.nonzero(l_done[local])[0]
            l_rows.extend([rows[local]] * nz.size)
            l_cols.extend(done_states[k] for k in nz)
            l_vals.extend(l_done[local, nz])
        agg += len(absorbing)
    Pi = sp.csc_matrix((pi_vals, (pi_rows, pi_cols)), shape=(n, agg))
    L = sp.csr_matrix((l_vals, (l_rows, l_cols)), shape=(agg, n))
    return ProjectionPair(Pi, L, structure, tuple(dists))


def _aggregated_states(structure: FastStructure, space: StateSpace | None, a_f: np.ndarray | None):
    out = []
    for i, scc in enumerate(structure.absorbing):
        rep = tuple(int(x) for x in space.states[scc.member_states[0]]) if space is not None else ()
        label = None
        if a_f is not None and a_f.size and space is not None:
            label = tuple(int(x) for x in a_f @ np.asarray(rep))
        out.append(AggregatedState(i, scc.id, scc.component, rep, label, len(scc.member_states)))
    return tuple(out)


def reduced_generator(
    pair: ProjectionPair,
    slow: Generator | SplitGenerator,
    space: StateSpace | None = None,
    a_f: np.ndarray | None = None,
) -> ReducedSystem:
    """``K~ = L K^s Pi`` with the Markov property checked and enforced."""
    ks = slow.slow if isinstance(slow, SplitGenerator) else slow
    kt = np.asarray((pair.L @ (ks.matrix @ pair.Pi)).toarray(), dtype=float)
    colsum = kt.sum(axis=0)
    scale = max(ks.max_abs(), 1.0)
    if np.abs(colsum).max(initial=0.0) > ALGEBRA_RTOL * scale:
        raise NotMarkov(f"reduced generator column sum {np.abs(colsum).max():.3e} exceeds tolerance")
    off = kt - np.diag(np.diag(kt))
    min_off = float(off.min(initial=0.0))
    if min_off < -CLIP_ATOL * scale:
        raise NotMarkov(f"reduced generator has off-diagonal rate {min_off:.3e} < 0")
    off[off < 0] = 0.0
    cols = []
    for j in range(kt.shape[1]):
        nz = np.nonzero(off[:, j])[0]
        cols.append({int(i): float(off[i, j]) for i in nz})
    gen = Generator.from_columns(cols, kt.shape[0])
    stoich = {j: tuple(sorted(c)) for j, c in enumerate(cols)}
    return ReducedSystem(gen, _aggregated_states(pair.structure, space, a_f), stoich, colsum, min_off)


def lift_distribution(pair: ProjectionPair, p_tilde) -> np.ndarray:
    """Full-space distribution ``Pi p~``."""
    return np.asarray(pair.Pi @ np.asarray(p_tilde, dtype=float)).ravel()


def conditional_moments(pair: ProjectionPair, space: StateSpace) -> tuple[np.ndarray, np.ndarray]:
    """Per aggregated state, ``E[n]`` and ``E[n^2]`` under its invariant distribution."""
    x = space.states.astype(float)
    pt = pair.Pi.T
    return np.asarray(pt @ x), np.asarray(pt @ (x * x))


def reduced_moments(pair: ProjectionPair, space: StateSpace, p_tilde) -> tuple[np.ndarray, np.ndarray]:
    """Per-species mean and variance of the lifted distribution."""
    m1, m2 = conditional_moments(pair, space)
    p = np.asarray(p_tilde, dtype=float)
    mean = p @ m1
    var = p @ m2 - mean * mean
    return mean, np.clip(var, 0.0, None)


def conditional_rate_check(
    structure: FastStructure, split: SplitGenerator, pair: ProjectionPair, reduced: ReducedSystem | None = None
) -> RateCheck:
    """Compare ``K~`` with a direct double sum of slow rates against fast invariants.

    Only pairs whose source and target fast components are strongly
    connected are checked; there ``L`` is a plain indicator.  The rest are
    listed in ``skipped_pairs``.
    """
    kt = reduced.k_tilde.toarray() if reduced is not None else (pair.L @ split.slow.matrix @ pair.Pi).toarray()
    comp_of = structure.component_of_state()
    absorbing = structure.absorbing
    agg_of_comp: dict[int, int] = {}
    ok: dict[int, bool] = {}
    for a, scc in enumerate(absorbing):
        comp = structure.components[scc.component]
        ok[a] = comp.is_strongly_connected
        if comp.is_strongly_connected:
            agg_of_comp[comp.id] = a
    pis = {d.scc_id: d.pi for d in pair.distributions}
    ks = split.slow.matrix.tocsc()
    brute = np.zeros_like(kt)
    for j, scc in enumerate(absorbing):
        if not ok[j]:
            continue
        pi = pis[scc.id]
        for q_local, q in enumerate(scc.member_states):
            lo, hi = ks.indptr[q], ks.indptr[q + 1]
            for p, v in zip(ks.indices[lo:hi], ks.data[lo:hi]):
                i = agg_of_comp.get(int(comp_of[p]))
                if i is not None:
                    brute[i, j] += v * pi[q_local]
    worst = 0.0
    checked = 0
    skipped = []
    for j in range(len(absorbing)):
        for i in range(len(absorbing)):
            if not (ok[i] and ok[j]):
                skipped.append((i, j))
                continue
            checked += 1
            worst = max(worst, abs(brute[i, j] - kt[i, j]))
    return RateCheck(worst, checked, tuple(skipped))


@dataclass(frozen=True)
class Reduction:
    """Everything produced by reducing one network."""

    network: ReactionNetwork
    space: StateSpace
    split: SplitGenerator
    structure: FastStructure
    pair: ProjectionPair
    reduced: ReducedSystem

    def initial_reduced(self) -> np.ndarray:
        """``L p0`` for a point mass on the initial state."""
        return np.asarray(self.pair.L[:, 0].toarray()).ravel()


def reduce_network(net: ReactionNetwork, max_states: int = DEFAULT_STATE_BUDGET) -> Reduction:
    """Explore, decompose and reduce ``net`` in one call."""
    space, split = explore(net, max_states=max_states)
    try:
        a_f = fast_invariant_matrix(net)
    except NoFastSubsystem:
        a_f = None
    structure = analyze(space, split, a_f)
    pair = build_projections(structure, split)
    reduced = reduced_generator(pair, split, space, a_f)
    log.debug("reduced %d states to %d", space.size, reduced.dim)
    return Reduction(net, space, split, structure, pair, reduced)
