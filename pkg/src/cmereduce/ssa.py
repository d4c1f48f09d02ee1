"""Stochastic simulation of the full network and of the slow-scale reduced chain.

Every realization draws from its own Philox stream derived from
``SeedSequence(base_seed, spawn_key=(index,))``, so paths depend only on the
seed and the realization index.  The inner loops live in ``_kernels`` (compiled)
or ``_kernels_py`` (fallback); both consume the stream identically.
"""

from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _backend
from .faststructure import analyze
from .network import ReactionNetwork
from .reduction import Reduction, build_projections
from .statespace import DEFAULT_STATE_BUDGET, explore_fast_component, propensity

__all__ = [
    "SamplePath",
    "EnsembleStats",
    "NetworkTables",
    "ReducedChain",
    "PrecomputedChain",
    "OnTheFlyChain",
    "realization_rng",
    "ssa_exact",
    "ssa_slow",
    "ensemble",
]

log = logging.getLogger(__name__)

_NO_CAP = np.iinfo(np.int64).max // 4
_PATH_BUFFER = 4096
CHUNK = 250


def realization_rng(base_seed: int, index: int) -> np.random.Generator:
    """Independent Philox stream for realization ``index``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))))


@dataclass(frozen=True)
class SamplePath:
    """Jump times (``jump_times[0] == 0``) and the state held from each time on."""

    jump_times: np.ndarray
    states: np.ndarray
    seed: int
    truncated: bool = False

    @property
    def n_jumps(self) -> int:
        return self.jump_times.size - 1

    def at(self, times) -> np.ndarray:
        """Cadlag sampling: the state after the last jump at or before each time."""
        idx = np.searchsorted(self.jump_times, np.asarray(times, dtype=float), side="right") - 1
        return self.states[idx]


@dataclass(frozen=True)
class EnsembleStats:
    grid: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    realization_count: int
    species: tuple[str, ...] = ()
    truncated_count: int = 0

    def se_mean(self) -> np.ndarray:
        return self.std / math.sqrt(self.realization_count)

    def se_std(self) -> np.ndarray:
        """Large-sample standard error of the standard deviation estimate."""
        return self.std / math.sqrt(2.0 * max(self.realization_count - 1, 1))


@dataclass(frozen=True)
class NetworkTables:
    """Dense arrays describing the reactions, laid out for the kernels."""

    react_species: np.ndarray
    react_coef: np.ndarray
    change: np.ndarray
    rates: np.ndarray
    caps: np.ndarray

    @classmethod
    def from_network(cls, net: ReactionNetwork) -> "NetworkTables":
        width = max(1, max(int(np.count_nonzero(row)) for row in net.reactant_matrix))
        species = np.full((net.r, width), -1, dtype=np.int64)
        coef = np.zeros((net.r, width), dtype=np.int64)
        for l, row in enumerate(net.reactant_matrix):
            nz = np.nonzero(row)[0]
            species[l, : nz.size] = nz
            coef[l, : nz.size] = row[nz]
        caps = np.full(net.m, _NO_CAP, dtype=np.int64) if net.caps is None else np.array(net.caps, dtype=np.int64)
        return cls(species, coef, np.ascontiguousarray(net.change_matrix, dtype=np.int64),
                   net.rate_constants.astype(float), caps)


def _run_exact(tables: NetworkTables, init, t_end, grid, gen, record, kern):
    state = np.array(init, dtype=np.int64)
    m = state.size
    grid_out = np.full((grid.size, m), -1, dtype=np.int64)
    times = [np.zeros(1)]
    states = [state[None, :].copy()]
    t, gi, status = 0.0, 0, _backend._kernels_py.BUFFER_FULL
    cap = _PATH_BUFFER if record else 1
    while status == _backend._kernels_py.BUFFER_FULL:
        jt = np.empty(cap)
        js = np.empty((cap, m), dtype=np.int64)
        status, t, gi, used = kern.direct_run(
            state, t, float(t_end), tables.react_species, tables.react_coef, tables.change,
            tables.rates, tables.caps, grid, gi, grid_out, jt, js, 0, record, gen,
        )
        if record:
            times.append(jt[:used])
            states.append(js[:used])
    truncated = status == _backend._kernels_py.CAP_EXCEEDED
    return grid_out, np.concatenate(times), np.concatenate(states), truncated


def ssa_exact(
    net: ReactionNetwork,
    init: Sequence[int] | None = None,
    t_end: float = 1.0,
    seed: int = 0,
    index: int = 0,
    backend: str | None = None,
) -> SamplePath:
    """One Gillespie direct-method path of the full network up to ``t_end``."""
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    init = net.initial_state if init is None else init
    kern = _backend.get_kernels(backend)
    _, times, states, truncated = _run_exact(
        NetworkTables.from_network(net), init, t_end, np.empty(0), realization_rng(seed, index), True, kern
    )
    return SamplePath(times, states, int(seed), truncated)


class ReducedChain:
    """Column-wise rates of the aggregated chain, possibly filled lazily.

    ``col_start``/``col_len`` index into ``indices``/``data``; a column with
    ``col_len < 0`` is not known yet and :meth:`ensure` must fill it.
    """

    def __init__(self, m: int, species: Sequence[str] = ()):
        self.species = tuple(species)
        self._m = m
        self.col_start = np.zeros(0, dtype=np.int64)
        self.col_len = np.zeros(0, dtype=np.int64)
        self.exit_rate = np.zeros(0)
        self.indices = np.zeros(0, dtype=np.int64)
        self.data = np.zeros(0)
        self._nnz = 0
        self._n = 0
        self.m1 = np.zeros((0, m))
        self.m2 = np.zeros((0, m))

    @property
    def n_aggregated(self) -> int:
        return self._n

    def _grow(self, n: int) -> None:
        if n <= self.col_len.size:
            return
        size = max(n, 2 * self.col_len.size, 64)
        extra = size - self.col_len.size
        self.col_start = np.concatenate([self.col_start, np.zeros(extra, dtype=np.int64)])
        self.col_len = np.concatenate([self.col_len, np.full(extra, -1, dtype=np.int64)])
        self.exit_rate = np.concatenate([self.exit_rate, np.zeros(extra)])
        self.m1 = np.vstack([self.m1, np.zeros((extra, self._m))])
        self.m2 = np.vstack([self.m2, np.zeros((extra, self._m))])

    def _add_state(self, m1, m2) -> int:
        i = self._n
        self._grow(i + 1)
        self.m1[i] = m1
        self.m2[i] = m2
        self._n += 1
        return i

    def _set_column(self, j: int, targets: Sequence[int], rates: Sequence[float]) -> None:
        k = len(targets)
        if self._nnz + k > self.indices.size:
            size = max(self._nnz + k, 2 * self.indices.size, 256)
            self.indices = np.concatenate([self.indices, np.zeros(size - self.indices.size, dtype=np.int64)])
            self.data = np.concatenate([self.data, np.zeros(size - self.data.size)])
        self.indices[self._nnz : self._nnz + k] = targets
        self.data[self._nnz : self._nnz + k] = rates
        self.col_start[j] = self._nnz
        self.col_len[j] = k
        self.exit_rate[j] = math.fsum(rates)
        self._nnz += k

    def ensure(self, j: int) -> None:
        raise NotImplementedError

    def initial_distribution(self, state) -> list[tuple[int, float]]:
        raise NotImplementedError

    def conditional_variance(self) -> np.ndarray:
        return np.clip(self.m2[: self._n] - self.m1[: self._n] ** 2, 0.0, None)


class PrecomputedChain(ReducedChain):
    """Aggregated chain with all rates taken from an assembled ``K~``."""

    def __init__(self, reduction: Reduction):
        net, space, pair = reduction.network, reduction.space, reduction.pair
        super().__init__(net.m, net.species_names)
        self._reduction = reduction
        x = space.states.astype(float)
        m1 = np.asarray(pair.Pi.T @ x)
        m2 = np.asarray(pair.Pi.T @ (x * x))
        for i in range(pair.n_aggregated):
            self._add_state(m1[i], m2[i])
        kt = reduction.reduced.k_tilde.matrix.tocsc()
        for j in range(kt.shape[1]):
            lo, hi = kt.indptr[j], kt.indptr[j + 1]
            rows, vals = kt.indices[lo:hi], kt.data[lo:hi]
            keep = (rows != j) & (vals > 0)
            self._set_column(j, rows[keep].tolist(), vals[keep].tolist())
        self._L = pair.L.tocsc()

    def ensure(self, j: int) -> None:  # pragma: no cover - every column is known
        raise KeyError(j)

    def initial_distribution(self, state) -> list[tuple[int, float]]:
        j = self._reduction.space.index(state)
        lo, hi = self._L.indptr[j], self._L.indptr[j + 1]
        return [(int(i), float(v)) for i, v in zip(self._L.indices[lo:hi], self._L.data[lo:hi]) if v > 0]


@dataclass
class _LocalComponent:
    space: object
    structure: object
    pair: object
    agg_ids: list[int]
    L: object = field(repr=False)


class OnTheFlyChain(ReducedChain):
    """Aggregated chain whose fast components and rates are built on first visit.

    Each fast component is explored from the state that first reaches it and
    reduced locally; the outgoing rates of an aggregated state average the
    slow propensities over its invariant distribution and split each target
    by the absorption probabilities of the target's component.  The cache is
    never evicted.
    """

    def __init__(self, net: ReactionNetwork, max_component_states: int = DEFAULT_STATE_BUDGET):
        super().__init__(net.m, net.species_names)
        self.net = net
        self._max = max_component_states
        self._slow = [l for l, rx in enumerate(net.reactions) if not rx.is_fast]
        self._changes = [tuple(int(x) for x in row) for row in net.change_matrix]
        self._where: dict[tuple[int, ...], tuple[int, int]] = {}
        self._components: list[_LocalComponent] = []
        self._owner: list[tuple[int, int]] = []
        self._lock = threading.Lock()

    @property
    def n_components(self) -> int:
        return len(self._components)

    def _locate(self, state: tuple[int, ...]) -> tuple[int, int]:
        hit = self._where.get(state)
        if hit is not None:
            return hit
        space, kf = explore_fast_component(self.net, state, self._max)
        structure = analyze(space, kf)
        pair = build_projections(structure, kf)
        ci = len(self._components)
        x = space.states.astype(float)
        m1 = np.asarray(pair.Pi.T @ x)
        m2 = np.asarray(pair.Pi.T @ (x * x))
        agg_ids = []
        for k in range(pair.n_aggregated):
            agg_ids.append(self._add_state(m1[k], m2[k]))
            self._owner.append((ci, k))
        self._components.append(_LocalComponent(space, structure, pair, agg_ids, pair.L.tocsc()))
        for idx in range(space.size):
            self._where[space.state(idx)] = (ci, idx)
        return ci, space.index(state)

    def _split(self, state: tuple[int, ...]) -> list[tuple[int, float]]:
        ci, idx = self._locate(state)
        comp = self._components[ci]
        lo, hi = comp.L.indptr[idx], comp.L.indptr[idx + 1]
        return [(comp.agg_ids[i], float(v)) for i, v in zip(comp.L.indices[lo:hi], comp.L.data[lo:hi]) if v > 0]

    def initial_distribution(self, state) -> list[tuple[int, float]]:
        return self._split(tuple(int(x) for x in state))

    def ensure(self, j: int) -> None:
        ci, k = self._owner[j]
        comp = self._components[ci]
        scc = comp.structure.absorbing[k]
        pi = comp.pair.distributions[k].pi
        caps = self.net.caps
        out: dict[int, float] = {}
        for q_local, idx in enumerate(scc.member_states):
            n = comp.space.state(idx)
            for l in self._slow:
                a = propensity(self.net, n, l)
                if a == 0.0:
                    continue
                d = self._changes[l]
                tgt = tuple(n[i] + d[i] for i in range(len(n)))
                if caps is not None and any(tgt[i] > caps[i] for i in range(len(n))):
                    continue
                w = pi[q_local] * a
                for b, v in self._split(tgt):
                    if b != j:
                        out[b] = out.get(b, 0.0) + w * v
        targets = sorted(out)
        self._set_column(j, targets, [out[b] for b in targets])


def _draw_initial(dist: list[tuple[int, float]], gen: np.random.Generator) -> int:
    """Deterministic for a point mass; otherwise consumes one draw."""
    if len(dist) == 1:
        return dist[0][0]
    target = gen.random() * math.fsum(v for _, v in dist)
    cum = 0.0
    for i, v in dist:
        cum += v
        if cum >= target:
            return i
    return dist[-1][0]


def _run_chain(chain: ReducedChain, init_agg: int, t_end, grid, gen, record, kern):
    grid_out = np.full(grid.size, -1, dtype=np.int64)
    times = [np.zeros(1)]
    states = [np.array([init_agg], dtype=np.int64)]
    t, gi, state = 0.0, 0, int(init_agg)
    cap = _PATH_BUFFER if record else 1
    while True:
        jt = np.empty(cap)
        js = np.empty(cap, dtype=np.int64)
        status, state, t, gi, used = kern.chain_run(
            state, t, float(t_end), chain.col_start, chain.col_len, chain.indices, chain.data,
            chain.exit_rate, grid, gi, grid_out, jt, js, 0, record, gen,
        )
        if record:
            times.append(jt[:used])
            states.append(js[:used])
        if status == _backend._kernels_py.NEED_COLUMN:
            with getattr(chain, "_lock", threading.Lock()):
                chain.ensure(state)
            continue
        if status != _backend._kernels_py.BUFFER_FULL:
            break
    return grid_out, np.concatenate(times), np.concatenate(states)


def ssa_slow(
    chain: ReducedChain | Reduction,
    init: int | Sequence[int] | None = None,
    t_end: float = 1.0,
    seed: int = 0,
    index: int = 0,
    backend: str | None = None,
) -> SamplePath:
    """One path of the aggregated slow chain.

    ``init`` is an aggregated index, or a full state whose absorption
    distribution selects the starting aggregated state.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if isinstance(chain, Reduction):
        red = chain
        chain = PrecomputedChain(red)
        if init is None:
            init = red.network.initial_state
    gen = realization_rng(seed, index)
    if init is None:
        raise ValueError("initial state required")
    if isinstance(init, (int, np.integer)):
        start = int(init)
        if not 0 <= start < chain.n_aggregated:
            raise ValueError(f"aggregated state {start} out of range")
    else:
        start = _draw_initial(chain.initial_distribution(init), gen)
    kern = _backend.get_kernels(backend)
    _, times, states = _run_chain(chain, start, t_end, np.empty(0), gen, True, kern)
    return SamplePath(times, states, int(seed))


class _Moments:
    """Count, mean and sum of squared deviations, merged pairwise (Chan et al.)."""

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    @classmethod
    def of(cls, values: np.ndarray) -> "_Moments":
        out = cls(values.shape[1:])
        out.n = values.shape[0]
        if out.n:
            out.mean = values.mean(axis=0)
            out.m2 = ((values - out.mean) ** 2).sum(axis=0)
        return out

    def merge(self, other: "_Moments") -> "_Moments":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        delta = other.mean - self.mean
        out = _Moments(self.mean.shape)
        out.n = n
        out.mean = self.mean + delta * (other.n / n)
        out.m2 = self.m2 + other.m2 + delta * delta * (self.n * other.n / n)
        return out


def _exact_chunk(net, tables, grid, t_end, base_seed, lo, hi, kern):
    vals = np.empty((hi - lo, grid.size, net.m))
    truncated = 0
    init = np.array(net.initial_state, dtype=np.int64)
    for k, idx in enumerate(range(lo, hi)):
        out, _, _, trunc = _run_exact(tables, init, t_end, grid, realization_rng(base_seed, idx), False, kern)
        truncated += int(trunc)
        vals[k] = out
    valid = np.all(vals >= 0, axis=(1, 2))
    return _Moments.of(vals[valid]), None, truncated


def _slow_chunk(chain, init_state, grid, t_end, base_seed, lo, hi, kern):
    aggs = np.empty((hi - lo, grid.size), dtype=np.int64)
    for k, idx in enumerate(range(lo, hi)):
        gen = realization_rng(base_seed, idx)
        start = _draw_initial(chain.initial_distribution(init_state), gen)
        out, _, _ = _run_chain(chain, start, t_end, grid, gen, False, kern)
        aggs[k] = out
    m1 = chain.m1[aggs]
    cvar = chain.conditional_variance()[aggs]
    return _Moments.of(m1), cvar.sum(axis=0), 0


def ensemble(
    net: ReactionNetwork,
    n: int,
    grid: Sequence[float],
    base_seed: int = 0,
    method: str = "exact",
    chain: ReducedChain | None = None,
    threads: int = 1,
    backend: str | None = None,
) -> EnsembleStats:
    """Per-species mean and standard deviation on ``grid`` over ``n`` realizations.

    ``method`` is ``"exact"`` (full network) or ``"slow"`` (aggregated chain;
    supply ``chain`` or an on-the-fly chain is built).  For slow runs each
    aggregated state contributes its conditional species moments, and the
    variance combines the spread of conditional means with the mean
    conditional variance.  Chunks of realizations are merged in index order,
    so results do not depend on ``threads``.
    """
    if n < 1:
        raise ValueError("need at least one realization")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or grid[0] < 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be non-negative and strictly increasing")
    t_end = float(grid[-1])
    kern = _backend.get_kernels(backend)
    bounds = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
    if method == "exact":
        tables = NetworkTables.from_network(net)

        def work(b):
            return _exact_chunk(net, tables, grid, t_end, base_seed, b[0], b[1], kern)
    elif method == "slow":
        if chain is None:
            chain = OnTheFlyChain(net)
        if isinstance(chain, OnTheFlyChain):
            threads = 1

        def work(b):
            return _slow_chunk(chain, net.initial_state, grid, t_end, base_seed, b[0], b[1], kern)
    else:
        raise ValueError(f"unknown method {method!r}")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    total = _Moments((grid.size, net.m))
    cvar_sum = np.zeros((grid.size, net.m))
    truncated = 0
    for mom, cvar, trunc in parts:
        total = total.merge(mom)
        truncated += trunc
        if cvar is not None:
            cvar_sum += cvar
    if total.n == 0:
        raise RuntimeError("every realization left the cap box")
    var = total.m2 / total.n
    if method == "slow":
        var = var + cvar_sum / total.n
    return EnsembleStats(grid, total.mean, np.sqrt(var), total.n, tuple(net.species_names), truncated)
