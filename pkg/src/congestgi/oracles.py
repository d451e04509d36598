"""Exhaustive isomorphism oracles for the test suite.

`brute_iso` and `min_bijection_distance` walk all n! candidate maps and are
hard-capped at n = 9.  `backtracking_iso` explores the same search space with
sound pruning (degree partitions plus incremental adjacency checks) and has
no size cap; it exists for the structured benchmark graphs that are far too
large for the factorial walk but rigid enough to prune well.
"""

from __future__ import annotations

from itertools import permutations
from typing import Optional

from .graphs import Graph, GraphError, hamming_distance
from .labels import Bijection, is_isomorphism

BRUTE_FORCE_CAP = 9


class OracleRefusal(RuntimeError):
    """Input too large for an exhaustive oracle."""


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise OracleRefusal(f"n={n} exceeds the exhaustive-search cap {cap}")


def brute_iso(g: Graph, h: Graph, cap: int = BRUTE_FORCE_CAP) -> Optional[Bijection]:
    """Some isomorphism g -> h, or None.  Plain walk over all permutations."""
    if g.n != h.n:
        raise GraphError("size mismatch")
    _check_cap(g.n, cap)
    if g.m != h.m:
        return None
    for perm in permutations(range(g.n)):
        f = Bijection(perm)
        if is_isomorphism(f, g, h):
            return f
    return None


def min_bijection_distance(g: Graph, h: Graph, cap: int = BRUTE_FORCE_CAP) -> int:
    """Exact minimum over all bijections f of hamming_distance(f(g), h)."""
    if g.n != h.n:
        raise GraphError("size mismatch")
    _check_cap(g.n, cap)
    best = None
    h_edges = h.edges
    for perm in permutations(range(g.n)):
        mapped = set()
        for u, v in g.edges:
            a, b = perm[u], perm[v]
            mapped.add((a, b) if a < b else (b, a))
        d = 2 * len(mapped ^ h_edges)
        if best is None or d < best:
            best = d
            if best == 0:
                break
    return best if best is not None else 0


def backtracking_iso(g: Graph, h: Graph) -> Optional[Bijection]:
    """Some isomorphism g -> h, or None; no size cap.

    Equivalent in outcome to `brute_iso`: it considers the full space of
    bijections, discarding branches only when a partial map already violates
    adjacency or the color partition makes completion impossible.
    """
    if g.n != h.n:
        raise GraphError("size mismatch")
    n = g.n
    if g.m != h.m:
        return None
    if sorted(g.degree(v) for v in range(n)) != sorted(h.degree(v) for v in range(n)):
        return None

    from collections import Counter

    def canonical_colors(gr: Graph) -> list[tuple]:
        colors = [(gr.degree(v),) for v in range(gr.n)]
        for _ in range(3):
            colors = [
                (colors[v], tuple(sorted(colors[w] for w in gr.neighbors(v))))
                for v in range(gr.n)
            ]
        return colors

    colg = canonical_colors(g)
    colh = canonical_colors(h)
    if Counter(colg) != Counter(colh):
        return None

    candidates = {v: [u for u in range(n) if colh[u] == colg[v]] for v in range(n)}
    # most-constrained-first ordering
    order = sorted(range(n), key=lambda v: len(candidates[v]))

    mapping = [-1] * n
    used = [False] * n

    def extend(idx: int) -> bool:
        if idx == n:
            return True
        v = order[idx]
        for u in candidates[v]:
            if used[u]:
                continue
            ok = True
            for w in g.neighbors(v):
                mw = mapping[w]
                if mw >= 0 and not h.adj(u, mw):
                    ok = False
                    break
            if ok:
                # also forbid extra adjacencies in h among mapped nodes
                for w in order[:idx]:
                    mw = mapping[w]
                    if h.adj(u, mw) and not g.adj(v, w):
                        ok = False
                        break
            if ok:
                mapping[v] = u
                used[u] = True
                if extend(idx + 1):
                    return True
                mapping[v] = -1
                used[u] = False
        return False

    if extend(0):
        f = Bijection(mapping)
        assert is_isomorphism(f, g, h)
        return f
    return None
