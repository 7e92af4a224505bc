"""Finite connected simple graphs, bipartiteness and vertex covers.

Vertices are labeled 1..m everywhere a user can see them.  The numeric
modules work with the 0-based ``edge_array`` view.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

DEFAULT_MAX_M = 20


class GraphError(ValueError):
    """Base class for invalid graph input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(GraphError):
    pass


class SelfLoopError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class InvalidLabelError(GraphError):
    pass


class DisconnectedGraphError(GraphError):
    pass


class TooManyVerticesError(GraphError):
    pass


@dataclass(frozen=True)
class Graph:
    """Immutable connected simple graph on vertices 1..m.

    ``edges`` keeps the input order; it is also the order in which the urn
    simulator consumes random numbers within a step.
    """

    m: int
    edges: tuple[tuple[int, int], ...]
    adjacency: dict[int, tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _validate(self.m, self.edges)
        adj: dict[int, list[int]] = {i: [] for i in range(1, self.m + 1)}
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        object.__setattr__(self, "adjacency", {i: tuple(sorted(v)) for i, v in adj.items()})

    @classmethod
    def from_edges(cls, edges, m: int | None = None) -> Graph:
        edges = tuple((min(int(i), int(j)), max(int(i), int(j))) for i, j in edges)
        if m is None:
            m = max(max(e) for e in edges) if edges else 0
        return cls(m, edges)

    @property
    def N(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """(N, 2) int array of 0-based endpoints."""
        return np.array(self.edges, dtype=np.intp).reshape(-1, 2) - 1

    @cached_property
    def incidence(self) -> np.ndarray:
        """(N, m) 0/1 edge-vertex incidence matrix."""
        inc = np.zeros((self.N, self.m))
        rows = np.arange(self.N)
        inc[rows, self.edge_array[:, 0]] = 1.0
        inc[rows, self.edge_array[:, 1]] = 1.0
        return inc

    @cached_property
    def incidence_first(self) -> np.ndarray:
        """(N, m) indicator of each edge's first endpoint."""
        inc = np.zeros((self.N, self.m))
        inc[np.arange(self.N), self.edge_array[:, 0]] = 1.0
        return inc

    @cached_property
    def incidence_second(self) -> np.ndarray:
        inc = np.zeros((self.N, self.m))
        inc[np.arange(self.N), self.edge_array[:, 1]] = 1.0
        return inc

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]


def _validate(m: int, edges) -> None:
    if m < 1:
        raise GraphError("graph has no vertices")
    seen = set()
    for k, (i, j) in enumerate(edges, start=1):
        if i <= 0 or j <= 0 or i > m or j > m:
            raise InvalidLabelError(f"vertex label out of range 1..{m} in edge ({i}, {j})", k)
        if i == j:
            raise SelfLoopError(f"self-loop at vertex {i}", k)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdgeError(f"duplicate edge {key}", k)
        seen.add(key)
    if m > 1 and not edges:
        raise DisconnectedGraphError(f"{m} vertices and no edges")
    reached = _bfs_order(m, edges)
    if len(reached) != m:
        missing = sorted(set(range(1, m + 1)) - set(reached))
        raise DisconnectedGraphError(f"graph is disconnected: vertices {missing} unreachable from 1")


def _bfs_order(m, edges):
    adj = {i: [] for i in range(1, m + 1)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    order, seen, queue = [], {1}, deque([1])
    while queue:
        u = queue.popleft()
        order.append(u)
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return order


def parse_edge_list(text: str) -> Graph:
    """Parse one edge per line, two 1-based labels separated by whitespace.

    Blank lines and lines starting with ``#`` are skipped.  The vertex count
    is the largest label.  Errors carry the offending line number.
    """
    edges: list[tuple[int, int]] = []
    lines: list[int] = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected two vertex labels, got {line!r}", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer vertex label in {line!r}", lineno) from None
        if i <= 0 or j <= 0:
            raise InvalidLabelError(f"vertex labels must be >= 1, got {line!r}", lineno)
        if i == j:
            raise SelfLoopError(f"self-loop at vertex {i}", lineno)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdgeError(f"duplicate edge {key} (first seen on line {seen[key]})", lineno)
        seen[key] = lineno
        edges.append(key)
        lines.append(lineno)
    if not edges:
        raise ParseError("no edges found")
    m = max(max(e) for e in edges)
    try:
        return Graph(m, tuple(edges))
    except DisconnectedGraphError as exc:
        # name the first edge line of a component not containing vertex 1
        reached = set(_bfs_order(m, edges))
        bad = next((ln for e, ln in zip(edges, lines) if e[0] not in reached), None)
        raise DisconnectedGraphError(str(exc), bad) from None


def read_graph(path) -> Graph:
    return parse_edge_list(Path(path).read_text())


class BipartiteKind(enum.Enum):
    NOT_BIPARTITE = "not-bipartite"
    UNBALANCED = "unbalanced-bipartite"
    BALANCED = "balanced-bipartite"


@dataclass(frozen=True)
class BipartiteClass:
    kind: BipartiteKind
    A: frozenset[int] = frozenset()
    B: frozenset[int] = frozenset()

    @property
    def is_bipartite(self) -> bool:
        return self.kind is not BipartiteKind.NOT_BIPARTITE

    @property
    def is_balanced(self) -> bool:
        return self.kind is BipartiteKind.BALANCED

    def __str__(self):
        if not self.is_bipartite:
            return self.kind.value
        fmt = lambda s: "{" + ",".join(map(str, sorted(s))) + "}"
        return f"{self.kind.value} A={fmt(self.A)} B={fmt(self.B)}"


def classify_bipartiteness(g: Graph) -> BipartiteClass:
    """BFS 2-coloring from vertex 1; vertex 1 always lands in ``A``."""
    color = {1: 0}
    queue = deque([1])
    while queue:
        u = queue.popleft()
        for w in g.adjacency[u]:
            if w not in color:
                color[w] = 1 - color[u]
                queue.append(w)
            elif color[w] == color[u]:
                return BipartiteClass(BipartiteKind.NOT_BIPARTITE)
    A = frozenset(v for v, c in color.items() if c == 0)
    B = frozenset(v for v, c in color.items() if c == 1)
    kind = BipartiteKind.BALANCED if len(A) == len(B) else BipartiteKind.UNBALANCED
    return BipartiteClass(kind, A, B)


def is_vertex_cover(g: Graph, S) -> bool:
    S = set(S)
    return all(i in S or j in S for i, j in g.edges)


def vertex_covers(g: Graph, max_m: int = DEFAULT_MAX_M) -> list[frozenset[int]]:
    """All vertex covers of ``g``, ordered by size and then lexicographically.

    A face of the domain is nonempty only when its support meets every edge,
    so these are exactly the supports worth searching for equilibria.
    """
    if g.m > max_m:
        raise TooManyVerticesError(f"m={g.m} exceeds the face-enumeration cap {max_m} (2^m subsets)")
    ea = g.edge_array
    masks = np.arange(1 << g.m, dtype=np.int64)
    ok = np.ones(masks.shape, dtype=bool)
    for i, j in ea:
        ok &= ((masks >> i) & 1 | (masks >> j) & 1).astype(bool)
    covers = []
    for mask in masks[ok]:
        covers.append(tuple(k + 1 for k in range(g.m) if (mask >> k) & 1))
    covers.sort(key=lambda s: (len(s), s))
    return [frozenset(s) for s in covers]

