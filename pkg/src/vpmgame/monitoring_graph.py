"""Confusability graphs on a deviator's actions and their minimal colorings."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .game_model import PROB_TOL, MonitoringStructure, ProductDistribution, StageGame, signal_channel

EXACT_VERTEX_LIMIT = 24


@dataclass(frozen=True)
class AuxiliaryGraph:
    """Graph on the actions of player ``deviator``.

    ``witnesses`` maps each edge to one (a_{-i}, k, s_k) that produced it;
    a_{-i} is the full profile of the other players in player order.
    """

    deviator: int
    n_vertices: int
    edges: frozenset[tuple[int, int]]
    witnesses: tuple[tuple[tuple[int, int], tuple[tuple[int, ...], int, int]], ...] = ()

    def __post_init__(self) -> None:
        for u, v in self.edges:
            if u == v:
                raise ValueError("self-loop in auxiliary graph")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ValueError("edge endpoint outside the vertex set")
            if u > v:
                raise ValueError("edges are stored as (low, high) pairs")

    @classmethod
    def from_edges(cls, n_vertices: int, edges, deviator: int = 0) -> "AuxiliaryGraph":
        norm = frozenset((min(u, v), max(u, v)) for u, v in edges)
        return cls(deviator, n_vertices, norm)

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n_vertices)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges


@dataclass(frozen=True)
class Coloring:
    colors: tuple[int, ...]
    n_colors: int
    exact: bool = True

    def __post_init__(self) -> None:
        used = set(self.colors)
        if used != set(range(self.n_colors)):
            raise ValueError("color indices must be 0..chi-1, all used")

    def is_proper(self, graph: AuxiliaryGraph) -> bool:
        return all(self.colors[u] != self.colors[v] for u, v in graph.edges)

    def color_class(self, color: int) -> list[int]:
        return [v for v, c in enumerate(self.colors) if c == color]


def build_auxiliary_graph(game: StageGame, monitoring: MonitoringStructure,
                          dist: ProductDistribution, i: int,
                          support_threshold: float = PROB_TOL) -> AuxiliaryGraph:
    """Edge between a_i and a_i' when, for some opponent profile in the
    support of the prescribed mixed actions, some other player k sees some
    signal with positive probability under both actions.

    Player i itself is not a witness decoder: it already knows its own
    action, so only k != i can confuse a_i with a_i'.
    """
    K = game.n_players
    if not 0 <= i < K:
        raise IndexError(f"player index {i} out of range")
    monitoring.check_against(game)
    supports = [range(m) if k == i else dist.support(k, support_threshold)
                for k, m in enumerate(game.action_counts)]
    n_i = game.action_counts[i]
    edges: set[tuple[int, int]] = set()
    witnesses = []
    for k in range(K):
        if k == i:
            continue
        chan = signal_channel(monitoring, k)
        # move axis i first so chan_i[a_i, a_{-i}..., s_k]
        chan_i = np.moveaxis(chan, i, 0)
        for rest in itertools.product(*(supports[j] for j in range(K) if j != i)):
            rows = chan_i[(slice(None),) + rest]  # shape (A_i, S_k)
            positive = rows > support_threshold
            for u, v in itertools.combinations(range(n_i), 2):
                if (u, v) in edges:
                    continue
                common = np.flatnonzero(positive[u] & positive[v])
                if common.size:
                    edges.add((u, v))
                    witnesses.append(((u, v), (tuple(int(x) for x in rest), k, int(common[0]))))
    return AuxiliaryGraph(i, n_i, frozenset(edges), tuple(sorted(witnesses)))


# ---------------------------------------------------------------------------
# Coloring
# ---------------------------------------------------------------------------


def _normalize(colors: list[int]) -> tuple[int, ...]:
    """Relabel colors in order of first appearance so they are 0..chi-1."""
    remap: dict[int, int] = {}
    return tuple(remap.setdefault(c, len(remap)) for c in colors)


def greedy_coloring(graph: AuxiliaryGraph) -> Coloring:
    """DSATUR greedy; ties go to the lowest-index vertex, colors to the
    lowest available index."""
    n = graph.n_vertices
    if n == 0:
        return Coloring((), 0, exact=True)
    adj = graph.adjacency()
    colors = [-1] * n
    seen: list[set[int]] = [set() for _ in range(n)]
    for _ in range(n):
        v = max((u for u in range(n) if colors[u] < 0),
                key=lambda u: (len(seen[u]), len(adj[u]), -u))
        c = 0
        while c in seen[v]:
            c += 1
        colors[v] = c
        for w in adj[v]:
            seen[w].add(c)
    norm = _normalize(colors)
    return Coloring(norm, max(norm) + 1, exact=False)


def max_clique_size(graph: AuxiliaryGraph) -> int:
    """Exact clique number by simple branch and bound (small graphs)."""
    adj = graph.adjacency()
    best = 1 if graph.n_vertices else 0

    def expand(clique_size: int, candidates: set[int]) -> None:
        nonlocal best
        if clique_size > best:
            best = clique_size
        if clique_size + len(candidates) <= best:
            return
        for v in sorted(candidates):
            expand(clique_size + 1, candidates & adj[v])
            candidates = candidates - {v}
            if clique_size + len(candidates) <= best:
                return

    expand(0, set(range(graph.n_vertices)))
    return best


def minimal_coloring(graph: AuxiliaryGraph, vertex_limit: int = EXACT_VERTEX_LIMIT) -> Coloring:
    """Proper coloring with the minimum number of colors.

    Branch and bound over DSATUR vertex order, seeded with the greedy
    upper bound and stopped as soon as it meets the clique lower bound.
    Graphs above ``vertex_limit`` vertices get the greedy coloring with
    ``exact=False``.
    """
    n = graph.n_vertices
    if n == 0:
        return Coloring((), 0, exact=True)
    greedy = greedy_coloring(graph)
    if n > vertex_limit:
        return greedy
    lower = max_clique_size(graph)
    if greedy.n_colors == lower:
        return Coloring(greedy.colors, greedy.n_colors, exact=True)

    adj = graph.adjacency()
    best_k = greedy.n_colors
    best = list(greedy.colors)
    colors = [-1] * n

    def pick() -> int:
        best_v, best_key = -1, None
        for v in range(n):
            if colors[v] >= 0:
                continue
            sat = len({colors[w] for w in adj[v] if colors[w] >= 0})
            key = (sat, len(adj[v]), -v)
            if best_key is None or key > best_key:
                best_v, best_key = v, key
        return best_v

    def search(n_colored: int, used: int) -> bool:
        nonlocal best_k, best
        if used >= best_k:
            return False
        if n_colored == n:
            best_k, best = used, colors.copy()
            return best_k == lower
        v = pick()
        forbidden = {colors[w] for w in adj[v]}
        # new color index `used` is tried last; symmetric new colors are pruned
        for c in range(min(used + 1, best_k - 1)):
            if c in forbidden:
                continue
            colors[v] = c
            if search(n_colored + 1, max(used, c + 1)):
                return True
            colors[v] = -1
        return False

    search(0, 0)
    norm = _normalize(best)
    return Coloring(norm, max(norm) + 1, exact=True)


def chromatic_number(graph: AuxiliaryGraph) -> int:
    return minimal_coloring(graph).n_colors


__all__ = [
    "EXACT_VERTEX_LIMIT", "AuxiliaryGraph", "Coloring", "build_auxiliary_graph",
    "greedy_coloring", "max_clique_size", "minimal_coloring", "chromatic_number",
]
