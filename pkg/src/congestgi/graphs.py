"""Undirected simple graphs over dense node ids 0..n-1.

The one graph type used everywhere: as the live network topology, as the
reference graph handed to protocols, and as the value produced by the
instance generators.  Graphs are immutable once built.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Optional, Sequence

import numpy as np


class GraphError(ValueError):
    """Malformed graph data (bad edge, bad node id, bad file)."""


class Graph:
    __slots__ = ("n", "_edges", "_nbrs", "_matrix")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]]):
        if n < 0:
            raise GraphError(f"node count must be non-negative, got {n}")
        self.n = n
        seen: set[tuple[int, int]] = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            e = (u, v) if u < v else (v, u)
            if e in seen:
                raise GraphError(f"duplicate edge {e}")
            seen.add(e)
        self._edges = frozenset(seen)
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v in self._edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        self._nbrs = tuple(tuple(sorted(b)) for b in nbrs)
        self._matrix: Optional[np.ndarray] = None

    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        return self._edges

    @property
    def m(self) -> int:
        return len(self._edges)

    def adj(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return (u, v) in self._edges

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._nbrs[v]

    def degree(self, v: int) -> int:
        return len(self._nbrs[v])

    def matrix(self) -> np.ndarray:
        """Boolean adjacency matrix (cached; treat as read-only)."""
        if self._matrix is None:
            mat = np.zeros((self.n, self.n), dtype=bool)
            for u, v in self._edges:
                mat[u, v] = True
                mat[v, u] = True
            self._matrix = mat
        return self._matrix

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w in self._nbrs[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    def eccentricity(self, v: int) -> int:
        """Distance from v to the farthest reachable node."""
        dist = {v: 0}
        frontier = [v]
        d = 0
        while frontier:
            nxt = []
            for u in frontier:
                for w in self._nbrs[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        nxt.append(w)
            if nxt:
                d += 1
            frontier = nxt
        if len(dist) != self.n:
            raise GraphError("eccentricity undefined on a disconnected graph")
        return d

    def diameter(self) -> int:
        return max(self.eccentricity(v) for v in range(self.n))

    def relabel(self, mapping: Sequence[int]) -> "Graph":
        """Graph with node u renamed to mapping[u]."""
        return Graph(self.n, ((mapping[u], mapping[v]) for u, v in self._edges))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self.n, self._edges))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def hamming_distance(g: Graph, h: Graph) -> int:
    """Number of ordered node pairs (i, j), i != j, on which the adjacency
    matrices disagree.  Equals twice the size of the edge-set symmetric
    difference."""
    if g.n != h.n:
        raise GraphError(f"size mismatch: {g.n} vs {h.n}")
    return 2 * len(g.edges ^ h.edges)


def parse_graph_text(text: str) -> Graph:
    """Parse the plain text format: header line ``n m``, then m lines ``u v``
    with u < v.  Lines starting with ``#`` are ignored."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise GraphError("empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise GraphError(f"bad header line: {lines[0]!r}")
    n, m = int(head[0]), int(head[1])
    if len(lines) - 1 != m:
        raise GraphError(f"header declares {m} edges, file has {len(lines) - 1}")
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise GraphError(f"bad edge line: {ln!r}")
        u, v = int(parts[0]), int(parts[1])
        if not u < v:
            raise GraphError(f"edge line must satisfy u < v: {ln!r}")
        edges.append((u, v))
    return Graph(n, edges)


def format_graph_text(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    lines.extend(f"{u} {v}" for u, v in sorted(g.edges))
    return "\n".join(lines) + "\n"


def parse_edge_stream(text: str) -> Iterator[tuple[int, int]]:
    """Edge lines only (no header); used by the one-pass decision mode."""
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise GraphError(f"bad edge line: {ln!r}")
        yield int(parts[0]), int(parts[1])
