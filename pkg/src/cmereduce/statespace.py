"""Accessible state enumeration and the sparse CME generator.

States are discovered breadth first from the initial state.  The generator is
stored column-wise (column = source state), with ``K[i, j]`` the total rate of
moving from state ``j`` to state ``i`` and a diagonal equal to the negative
off-diagonal column sum.  Fast and slow reactions are accumulated separately.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .network import NetworkError, ReactionNetwork

__all__ = [
    "Generator",
    "SplitGenerator",
    "StateSpace",
    "CapExceeded",
    "StateBudgetExceeded",
    "UnboundedStateSpace",
    "binomial",
    "propensity",
    "propensities",
    "explore",
    "explore_fast_component",
    "reaction_rates",
    "state_count_closed",
    "is_provably_bounded",
    "DEFAULT_STATE_BUDGET",
]

log = logging.getLogger(__name__)

DEFAULT_STATE_BUDGET = 5_000_000


class CapExceeded(NetworkError):
    pass


class StateBudgetExceeded(NetworkError):
    pass


class UnboundedStateSpace(NetworkError):
    pass


def binomial(n: int, k: int) -> int:
    """C(n, k) by the multiplicative formula; exact for the small k used here."""
    if k < 0 or n < k:
        return 0
    out = 1
    for j in range(k):
        out = out * (n - j) // (j + 1)
    return out


def propensity(net: ReactionNetwork, n: Sequence[int], reaction: int) -> float:
    """Stochastic rate ``c_l * prod_i C(n_i, nu_i)`` of ``reaction`` in state ``n``."""
    rx = net.reactions[reaction]
    h = 1
    for ni, k in zip(n, net.complexes[rx.reactant].coefficients):
        if k:
            h *= binomial(int(ni), k)
            if h == 0:
                return 0.0
    return rx.rate_constant * float(h)


def propensities(net: ReactionNetwork, n: Sequence[int]) -> list[float]:
    return [propensity(net, n, l) for l in range(net.r)]


def state_count_closed(m: int, total: int) -> int:
    """Number of states of a closed system of ``m`` species holding ``total`` molecules."""
    if m < 1 or total < 0:
        raise ValueError("need m >= 1 and total >= 0")
    count = math.comb(total + m - 1, m - 1)
    if count > np.iinfo(np.int64).max:
        raise OverflowError(f"state count {count} does not fit a 64-bit index")
    return count


@dataclass(frozen=True)
class Generator:
    """Markov generator stored as a CSC matrix (columns are source states)."""

    matrix: sp.csc_matrix

    @classmethod
    def from_columns(cls, columns: Sequence[dict[int, float]], dim: int | None = None) -> "Generator":
        """Assemble from per-source ``{target: rate}`` maps; diagonal set last."""
        dim = len(columns) if dim is None else dim
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for j, col in enumerate(columns):
            entries = {i: v for i, v in col.items() if i != j and v != 0.0}
            if entries:
                entries[j] = -math.fsum(entries.values())
            for i in sorted(entries):
                indices.append(i)
                data.append(entries[i])
            indptr.append(len(indices))
        for _ in range(len(columns), dim):
            indptr.append(len(indices))
        mat = sp.csc_matrix(
            (np.array(data, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
            shape=(dim, dim),
        )
        return cls(mat)

    @classmethod
    def from_dense(cls, array) -> "Generator":
        return cls(sp.csc_matrix(np.asarray(array, dtype=float)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def max_abs(self) -> float:
        return float(np.abs(self.matrix.data).max()) if self.matrix.nnz else 0.0

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Off-diagonal ``(row, col, rate)`` triplets in column-major order."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.row, coo.col))
        row, col, val = coo.row[order], coo.col[order], coo.data[order]
        keep = row != col
        return row[keep], col[keep], val[keep]

    def validate(self, rtol: float = 1e-12) -> None:
        r, c, v = self.triplets()
        if np.any(v < 0):
            raise ValueError("negative off-diagonal rate")
        scale = max(self.max_abs(), 1.0)
        if np.any(np.abs(self.column_sums()) > rtol * scale):
            raise ValueError("generator columns do not sum to zero")

    def __add__(self, other: "Generator") -> "Generator":
        return Generator((self.matrix + other.matrix).tocsc())


@dataclass(frozen=True)
class SplitGenerator:
    full: Generator
    fast: Generator
    slow: Generator


@dataclass(frozen=True)
class StateSpace:
    """Accessible states in discovery order; state 0 is the initial state."""

    states: np.ndarray
    index_of: dict[tuple[int, ...], int] = field(repr=False)
    dropped_rate: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def __len__(self) -> int:
        return self.size

    def index(self, counts: Iterable[int]) -> int:
        return self.index_of[tuple(int(x) for x in counts)]

    def state(self, i: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.states[i])

    def leakage_rate(self, p: np.ndarray) -> float:
        """Probability flux per unit time that the truncation box discards under ``p``."""
        return float(np.dot(self.dropped_rate, p))


def is_provably_bounded(net: ReactionNetwork) -> bool:
    """True when some strictly positive weighting of species never increases.

    This is a sufficient condition: every reachable state then lies in a
    bounded box determined by the initial state.
    """
    change = net.change_matrix.astype(float)
    if not np.any(change > 0):
        return True
    res = linprog(
        c=np.ones(net.m),
        A_ub=change,
        b_ub=np.zeros(net.r),
        bounds=[(1.0, None)] * net.m,
        method="highs",
    )
    return bool(res.status == 0)


def _unbounded_message(net: ReactionNetwork) -> str:
    inputs = [rx.label for rx in net.reactions if net.complexes[rx.reactant].is_null]
    if inputs:
        return f"state space is unbounded without caps: input reaction(s) {', '.join(inputs)}"
    growing = [rx.label for rx, d in zip(net.reactions, net.change_matrix) if d.sum() > 0]
    return "state space is not provably bounded without caps; reactions increasing molecule count: " + ", ".join(
        growing
    )


def _check_bounded(net: ReactionNetwork) -> None:
    if net.caps is None and not is_provably_bounded(net):
        raise UnboundedStateSpace(_unbounded_message(net))


def explore(
    net: ReactionNetwork,
    max_states: int = DEFAULT_STATE_BUDGET,
    strict_caps: bool = False,
) -> tuple[StateSpace, SplitGenerator]:
    """Breadth-first closure of the accessible states and the split generator.

    Transitions leaving the cap box are dropped and their rate recorded per
    source state; with ``strict_caps`` they raise :class:`CapExceeded`.
    """
    _check_bounded(net)
    caps = net.caps
    react = [
        [(i, k) for i, k in enumerate(net.complexes[rx.reactant].coefficients) if k] for rx in net.reactions
    ]
    changes = [tuple(int(x) for x in row) for row in net.change_matrix]
    rates = [rx.rate_constant for rx in net.reactions]
    fast = [rx.is_fast for rx in net.reactions]
    m = net.m

    start = tuple(net.initial_state)
    index_of: dict[tuple[int, ...], int] = {start: 0}
    states: list[tuple[int, ...]] = [start]
    fast_cols: list[dict[int, float]] = []
    slow_cols: list[dict[int, float]] = []
    dropped: list[float] = []
    queue = deque([start])
    while queue:
        src = queue.popleft()
        j = index_of[src]
        fcol: dict[int, float] = {}
        scol: dict[int, float] = {}
        lost = 0.0
        for l in range(len(rates)):
            h = 1
            for i, k in react[l]:
                h *= binomial(src[i], k)
                if h == 0:
                    break
            if h == 0:
                continue
            a = rates[l] * float(h)
            d = changes[l]
            tgt = tuple(src[i] + d[i] for i in range(m))
            if caps is not None and any(tgt[i] > caps[i] for i in range(m)):
                if strict_caps:
                    raise CapExceeded(
                        f"reaction {net.reactions[l].label} leaves the cap box from state {src}"
                    )
                lost += a
                continue
            t = index_of.get(tgt)
            if t is None:
                if len(states) >= max_states:
                    raise StateBudgetExceeded(f"more than {max_states} accessible states")
                t = len(states)
                index_of[tgt] = t
                states.append(tgt)
                queue.append(tgt)
            col = fcol if fast[l] else scol
            col[t] = col.get(t, 0.0) + a
        fast_cols.append(fcol)
        slow_cols.append(scol)
        dropped.append(lost)

    n = len(states)
    kf = Generator.from_columns(fast_cols, n)
    ks = Generator.from_columns(slow_cols, n)
    full_cols = []
    for fc, sc in zip(fast_cols, slow_cols):
        col = dict(fc)
        for t, v in sc.items():
            col[t] = col.get(t, 0.0) + v
        full_cols.append(col)
    k = Generator.from_columns(full_cols, n)
    space = StateSpace(
        np.array(states, dtype=np.int64).reshape(n, m),
        index_of,
        np.array(dropped, dtype=float),
    )
    log.debug("explored %d states", n)
    return space, SplitGenerator(k, kf, ks)


def reaction_rates(net: ReactionNetwork, space: StateSpace) -> np.ndarray:
    """``n_s x r`` propensities as used in the generator (zero where truncated)."""
    out = np.zeros((space.size, net.r))
    caps = None if net.caps is None else np.asarray(net.caps)
    for j in range(space.size):
        n = space.states[j]
        for l in range(net.r):
            a = propensity(net, n, l)
            if a == 0.0:
                continue
            tgt = n + net.change_matrix[l]
            if caps is not None and np.any(tgt > caps):
                continue
            out[j, l] = a
    return out


def explore_fast_component(
    net: ReactionNetwork,
    state: Sequence[int],
    max_states: int = DEFAULT_STATE_BUDGET,
) -> tuple[StateSpace, Generator]:
    """The connected component of ``state`` in the undirected fast state graph.

    Returns the component's states (``state`` first, then breadth-first order of
    the undirected graph) and the fast generator restricted to it.
    """
    caps = net.caps
    m = net.m
    fast = [l for l, rx in enumerate(net.reactions) if rx.is_fast]
    changes = [tuple(int(x) for x in net.change_matrix[l]) for l in range(net.r)]

    def inside(n):
        if any(x < 0 for x in n):
            return False
        return caps is None or all(n[i] <= caps[i] for i in range(m))

    start = tuple(int(x) for x in state)
    index_of = {start: 0}
    states = [start]
    cols: list[dict[int, float]] = []
    queue = deque([start])
    pending: dict[int, dict[int, float]] = {}
    while queue:
        src = queue.popleft()
        for l in fast:
            d = changes[l]
            a = propensity(net, src, l)
            if a > 0.0:
                tgt = tuple(src[i] + d[i] for i in range(m))
                if inside(tgt):
                    t = index_of.get(tgt)
                    if t is None:
                        if len(states) >= max_states:
                            raise StateBudgetExceeded(f"fast component exceeds {max_states} states")
                        t = index_of[tgt] = len(states)
                        states.append(tgt)
                        queue.append(tgt)
                    col = pending.setdefault(index_of[src], {})
                    col[t] = col.get(t, 0.0) + a
            pred = tuple(src[i] - d[i] for i in range(m))
            if pred not in index_of and inside(pred) and propensity(net, pred, l) > 0.0:
                if len(states) >= max_states:
                    raise StateBudgetExceeded(f"fast component exceeds {max_states} states")
                index_of[pred] = len(states)
                states.append(pred)
                queue.append(pred)
    cols = [pending.get(j, {}) for j in range(len(states))]
    space = StateSpace(
        np.array(states, dtype=np.int64).reshape(len(states), m),
        index_of,
        np.zeros(len(states)),
    )
    return space, Generator.from_columns(cols)
