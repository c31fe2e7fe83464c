"""Utterance overlap graphs and exhaustive enumeration of their proper colorings.

Vertices are 0-based positions in the utterance list and channels are
0-based colors; user-facing reports add one to both.
"""
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class UtteranceInterval:
    """Half-open sample interval ``[start, end)`` of one utterance."""

    id: int
    speaker: object
    start: int
    end: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ContractError(
                f"utterance {self.id}: start ({self.start}) must be < end ({self.end})")

    @property
    def length(self):
        return self.end - self.start

    def overlaps(self, other):
        return max(self.start, other.start) < min(self.end, other.end)


@dataclass(frozen=True)
class OverlapGraph:
    num_vertices: int
    edges: frozenset

    def __post_init__(self):
        for u, v in self.edges:
            if not (0 <= u < v < self.num_vertices):
                raise ContractError(f"invalid edge {(u, v)} for {self.num_vertices} vertices")

    @classmethod
    def from_edges(cls, num_vertices, edges):
        return cls(num_vertices, frozenset(tuple(sorted(e)) for e in edges))

    def neighbors(self):
        """Adjacency lists indexed by vertex."""
        adjacency = [[] for _ in range(self.num_vertices)]
        for u, v in self.edges:
            adjacency[u].append(v)
            adjacency[v].append(u)
        return [sorted(a) for a in adjacency]

    def is_proper(self, coloring):
        return len(coloring) == self.num_vertices and all(
            coloring[u] != coloring[v] for u, v in self.edges)


def _check_unique_ids(utterances):
    seen = set()
    for utt in utterances:
        if utt.id in seen:
            raise ContractError(f"duplicate utterance id {utt.id}")
        seen.add(utt.id)


def build_overlap_graph(utterances):
    """Graph with an edge between every pair of temporally overlapping utterances.

    Touching intervals (``end_u == start_v``) do not overlap.
    """
    utterances = list(utterances)
    _check_unique_ids(utterances)
    order = sorted(range(len(utterances)), key=lambda i: utterances[i].start)
    edges = set()
    # Sweep by start time; only intervals still running can overlap the next one.
    running = []
    for i in order:
        current = utterances[i]
        running = [j for j in running if utterances[j].end > current.start]
        for j in running:
            edges.add((min(i, j), max(i, j)))
        running.append(i)
    return OverlapGraph(len(utterances), frozenset(edges))


def connected_components(graph):
    """Maximal connected vertex sets, each sorted, ordered by smallest member."""
    parent = list(range(graph.num_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in graph.edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    groups = {}
    for v in range(graph.num_vertices):
        groups.setdefault(find(v), []).append(v)
    return sorted(groups.values(), key=lambda c: c[0])


def enumerate_colorings(graph, num_channels):
    """Yield every proper coloring with ``num_channels`` colors.

    Colorings are tuples of 0-based channel indices, produced in
    lexicographic order by depth-first backtracking over the vertices in
    index order. Channel-relabelled duplicates are all emitted. Nothing is
    yielded when the graph needs more than ``num_channels`` colors.
    """
    if num_channels < 1:
        raise ContractError(f"num_channels must be >= 1, got {num_channels}")
    n = graph.num_vertices
    if n == 0:
        yield ()
        return
    earlier = [[v for v in adj if v < u] for u, adj in enumerate(graph.neighbors())]
    coloring = [-1] * n
    u = 0
    while u >= 0:
        color = coloring[u] + 1
        while color < num_channels and any(coloring[v] == color for v in earlier[u]):
            color += 1
        if color == num_channels:
            coloring[u] = -1
            u -= 1
        elif u == n - 1:
            coloring[u] = color
            yield tuple(coloring)
        else:
            coloring[u] = color
            u += 1


def brute_force_colorings(graph, num_channels, limit=10 ** 6):
    """All proper colorings found by testing each of the ``N**U`` assignments.

    Independent reference for :func:`enumerate_colorings`; same ordering.
    """
    n = graph.num_vertices
    if num_channels < 1:
        raise ContractError(f"num_channels must be >= 1, got {num_channels}")
    if num_channels ** n > limit:
        raise ContractError(
            f"{num_channels}**{n} assignments exceed the brute-force limit of {limit}")
    candidates = np.array(list(itertools.product(range(num_channels), repeat=n)),
                          dtype=np.int64).reshape(-1, n)
    proper = np.ones(len(candidates), dtype=bool)
    for u, v in graph.edges:
        proper &= candidates[:, u] != candidates[:, v]
    return [tuple(int(c) for c in row) for row in candidates[proper]]


def count_colorings(graph, num_channels):
    """Number of proper colorings.

    The count factorizes over connected components, so each component is
    enumerated on its own; this stays cheap for long meetings with many
    small components.
    """
    total = 1
    for component in connected_components(graph):
        index = {v: i for i, v in enumerate(component)}
        sub = OverlapGraph(len(component), frozenset(
            (index[u], index[v]) for u, v in graph.edges if u in index))
        count = sum(1 for _ in enumerate_colorings(sub, num_channels))
        if count == 0:
            return 0
        total *= count
    return total


def max_concurrency(utterances):
    """Largest number of utterances active at any single sample."""
    events = []
    for utt in utterances:
        events.append((utt.start, 1))
        events.append((utt.end, -1))
    # Ends sort before starts at the same position (half-open intervals).
    events.sort()
    best = active = 0
    for _, delta in events:
        active += delta
        best = max(best, active)
    return best

