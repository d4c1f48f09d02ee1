"""Fast components, strong components and fast simplexes of the state graph.

The fast state graph has an edge ``j -> i`` whenever a fast reaction moves
state ``j`` to state ``i``.  Its undirected connected components are the
diagonal blocks of ``K^f``; inside each one the strongly connected components
are classified as sources, internal or absorbing from the condensation.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .statespace import Generator, SplitGenerator, StateSpace

__all__ = [
    "SCCKind",
    "SCC",
    "FastComponent",
    "FastSimplex",
    "CanonicalOrdering",
    "FastStructure",
    "StructureError",
    "tarjan_scc",
    "adjacency",
    "fast_components",
    "scc_classify",
    "fast_simplexes",
    "canonical_ordering",
    "analyze",
    "condensation_dot",
]


class StructureError(RuntimeError):
    pass


class SCCKind(enum.Enum):
    SOURCE = "source"
    INTERNAL = "internal"
    ABSORBING = "absorbing"


@dataclass(frozen=True)
class SCC:
    id: int
    component: int
    member_states: tuple[int, ...]
    kind: SCCKind
    successors: tuple[int, ...] = ()


@dataclass(frozen=True)
class FastComponent:
    id: int
    member_states: tuple[int, ...]
    sccs: tuple[SCC, ...] = ()

    @property
    def absorbing(self) -> list[SCC]:
        return [s for s in self.sccs if s.kind is SCCKind.ABSORBING]

    @property
    def is_strongly_connected(self) -> bool:
        return len(self.sccs) == 1


@dataclass(frozen=True)
class FastSimplex:
    id: int
    absorbing_scc: int
    member_states: tuple[int, ...]
    label: tuple[int, ...] | None


@dataclass(frozen=True)
class CanonicalOrdering:
    """State permutation grouping components, then [absorbing | internal | sources]."""

    permutation: np.ndarray
    component_bounds: tuple[tuple[int, int], ...]
    scc_bounds: dict[int, tuple[int, int]] = field(repr=False)

    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(self.permutation.size)
        return inv

    def permute(self, gen: Generator) -> np.ndarray:
        """Dense ``P^T K P`` in canonical order (for inspection and tests)."""
        dense = gen.toarray()
        return dense[np.ix_(self.permutation, self.permutation)]


@dataclass(frozen=True)
class FastStructure:
    components: tuple[FastComponent, ...]
    simplexes: tuple[FastSimplex, ...]
    ordering: CanonicalOrdering
    n_states: int

    @property
    def sccs(self) -> list[SCC]:
        return [s for c in self.components for s in c.sccs]

    @property
    def absorbing(self) -> list[SCC]:
        """Absorbing SCCs in aggregated-state order."""
        return [s for c in self.components for s in c.absorbing]

    @property
    def n_aggregated(self) -> int:
        return len(self.absorbing)

    def component_of_state(self) -> np.ndarray:
        out = np.empty(self.n_states, dtype=np.int64)
        for c in self.components:
            out[list(c.member_states)] = c.id
        return out


def tarjan_scc(succ: Sequence[Sequence[int]], nodes: Sequence[int] | None = None) -> list[list[int]]:
    """Strongly connected components by an iterative lowlink search.

    ``succ[v]`` lists the successors of ``v``; only ``nodes`` (default: all)
    are visited and edges leaving that set are ignored.  Components come out
    in reverse topological order of the condensation (sinks first).
    """
    if nodes is None:
        nodes = range(len(succ))
    allowed = set(nodes)
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in allowed:
                    continue
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ[w])))
                    advanced = True
                    break
                if w in on_stack and index[w] < low[v]:
                    low[v] = index[w]
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


def adjacency(gen: Generator) -> list[list[int]]:
    """Successor lists of the directed graph of positive off-diagonal rates."""
    mat = gen.matrix
    succ: list[list[int]] = []
    for j in range(gen.dim):
        lo, hi = mat.indptr[j], mat.indptr[j + 1]
        rows = mat.indices[lo:hi]
        vals = mat.data[lo:hi]
        succ.append([int(i) for i, v in zip(rows, vals) if i != j and v > 0])
    return succ


def fast_components(space: StateSpace, split: SplitGenerator) -> list[FastComponent]:
    """Connected components of the undirected fast graph, ordered by smallest state."""
    succ = adjacency(split.fast)
    n = len(succ)
    nbrs: list[list[int]] = [list(s) for s in succ]
    for j, s in enumerate(succ):
        for i in s:
            nbrs[i].append(j)
    label = np.full(n, -1, dtype=np.int64)
    comps = []
    for start in range(n):
        if label[start] >= 0:
            continue
        cid = len(comps)
        label[start] = cid
        members = [start]
        frontier = [start]
        while frontier:
            v = frontier.pop()
            for w in nbrs[v]:
                if label[w] < 0:
                    label[w] = cid
                    members.append(w)
                    frontier.append(w)
        comps.append(FastComponent(cid, tuple(sorted(members))))
    return comps


def _reverse_topological(nodes: list[int], succ: dict[int, set[int]], key) -> list[int]:
    """Order ``nodes`` so that every edge goes from a later to an earlier node."""
    node_set = set(nodes)
    pending = {v: len(succ[v] & node_set) for v in nodes}
    preds: dict[int, list[int]] = {v: [] for v in nodes}
    for v in nodes:
        for w in succ[v] & node_set:
            preds[w].append(v)
    heap = [(key(v), v) for v in nodes if pending[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, v = heapq.heappop(heap)
        order.append(v)
        for u in preds[v]:
            pending[u] -= 1
            if pending[u] == 0:
                heapq.heappush(heap, (key(u), u))
    if len(order) != len(nodes):
        raise StructureError("condensation is not acyclic")
    return order


def scc_classify(
    component: FastComponent,
    split: SplitGenerator | Generator,
    first_id: int = 0,
    succ: Sequence[Sequence[int]] | None = None,
) -> list[SCC]:
    """Strong components of one fast component, in canonical order.

    Order: absorbing SCCs (by smallest state), internal SCCs in reverse
    topological order of the condensation, then sources (by smallest state).
    """
    if succ is None:
        fast = split.fast if isinstance(split, SplitGenerator) else split
        succ = adjacency(fast)
    raw = tarjan_scc(succ, component.member_states)
    where = {}
    for k, members in enumerate(raw):
        for v in members:
            where[v] = k
    out_edges: dict[int, set[int]] = {k: set() for k in range(len(raw))}
    has_in = [False] * len(raw)
    for k, members in enumerate(raw):
        for v in members:
            for w in succ[v]:
                kw = where.get(w)
                if kw is not None and kw != k:
                    out_edges[k].add(kw)
                    has_in[kw] = True
    kinds = []
    for k in range(len(raw)):
        if not out_edges[k]:
            kinds.append(SCCKind.ABSORBING)
        elif not has_in[k]:
            kinds.append(SCCKind.SOURCE)
        else:
            kinds.append(SCCKind.INTERNAL)
    first = lambda k: raw[k][0]  # noqa: E731
    absorbing = sorted((k for k in range(len(raw)) if kinds[k] is SCCKind.ABSORBING), key=first)
    if not absorbing:
        raise StructureError(f"fast component {component.id} has no absorbing strong component")
    internal = _reverse_topological(
        [k for k in range(len(raw)) if kinds[k] is SCCKind.INTERNAL], out_edges, first
    )
    sources = sorted((k for k in range(len(raw)) if kinds[k] is SCCKind.SOURCE), key=first)
    order = absorbing + internal + sources
    new_id = {k: first_id + pos for pos, k in enumerate(order)}
    return [
        SCC(
            id=new_id[k],
            component=component.id,
            member_states=tuple(raw[k]),
            kind=kinds[k],
            successors=tuple(sorted(new_id[w] for w in out_edges[k])),
        )
        for k in order
    ]


def fast_simplexes(components: Sequence[FastComponent], a_f: np.ndarray | None, space: StateSpace | None = None):
    """One simplex per absorbing SCC: the SCC plus every SCC that can reach it."""
    simplexes = []
    for comp in components:
        by_id = {s.id: s for s in comp.sccs}
        preds: dict[int, list[int]] = {s.id: [] for s in comp.sccs}
        for s in comp.sccs:
            for w in s.successors:
                preds[w].append(s.id)
        for ab in comp.absorbing:
            seen = {ab.id}
            frontier = [ab.id]
            while frontier:
                v = frontier.pop()
                for u in preds[v]:
                    if u not in seen:
                        seen.add(u)
                        frontier.append(u)
            members = tuple(v for s in comp.sccs if s.id in seen for v in by_id[s.id].member_states)
            label = None
            if a_f is not None and space is not None and a_f.size:
                rep = space.states[ab.member_states[0]]
                label = tuple(int(x) for x in a_f @ rep)
            simplexes.append(FastSimplex(len(simplexes), ab.id, members, label))
    return simplexes


def canonical_ordering(components: Sequence[FastComponent]) -> CanonicalOrdering:
    perm: list[int] = []
    bounds = []
    scc_bounds = {}
    for comp in components:
        start = len(perm)
        for s in comp.sccs:
            scc_bounds[s.id] = (len(perm), len(perm) + len(s.member_states))
            perm.extend(s.member_states)
        bounds.append((start, len(perm)))
    return CanonicalOrdering(np.array(perm, dtype=np.int64), tuple(bounds), scc_bounds)


def analyze(space: StateSpace, split: SplitGenerator | Generator, a_f: np.ndarray | None = None) -> FastStructure:
    """Components, classified SCCs, simplexes and canonical ordering in one pass."""
    fast = split.fast if isinstance(split, SplitGenerator) else split
    succ = adjacency(fast)
    wrapped = split if isinstance(split, SplitGenerator) else SplitGenerator(fast, fast, fast)
    comps = []
    next_id = 0
    for comp in fast_components(space, wrapped):
        sccs = scc_classify(comp, fast, first_id=next_id, succ=succ)
        next_id += len(sccs)
        comps.append(replace(comp, sccs=tuple(sccs)))
    simplexes = fast_simplexes(comps, a_f, space)
    return FastStructure(tuple(comps), tuple(simplexes), canonical_ordering(comps), space.size)


def condensation_dot(structure: FastStructure, space: StateSpace, names: Sequence[str] | None = None) -> str:
    """DOT rendering of the fast-graph condensation, one cluster per component."""
    lines = ["digraph fast_condensation {", "  rankdir=LR;"]
    shape = {SCCKind.ABSORBING: "doublecircle", SCCKind.INTERNAL: "circle", SCCKind.SOURCE: "box"}
    for comp in structure.components:
        lines.append(f"  subgraph cluster_{comp.id} {{")
        lines.append(f'    label="component {comp.id}";')
        for s in comp.sccs:
            rep = space.state(s.member_states[0])
            text = ",".join(str(x) for x in rep)
            lines.append(
                f'    scc{s.id} [shape={shape[s.kind]}, label="{s.id}: ({text}) x{len(s.member_states)}"];'
            )
        lines.append("  }")
    for comp in structure.components:
        for s in comp.sccs:
            for w in s.successors:
                lines.append(f"  scc{s.id} -> scc{w};")
    lines.append("}")
    return "\n".join(lines) + "\n"
