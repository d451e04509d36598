"""Benchmark instance generators with verifiable certificates.

Families:
  * isomorphic pairs (random connected graph plus a uniform relabeling),
  * far pairs certified by an edge-count gap (any bijection must flip at
    least twice the gap many adjacency-matrix entries),
  * the rigid two-party gadget whose two halves encode a pair of bit
    matrices, isomorphic exactly when the encoded pairs coincide,
  * spliced two-copy graphs joined by a long path, driving the
    diameter-scaling benchmarks, plus a fully labeled/ported variant used
    for local-view indistinguishability experiments.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .graphs import Graph, GraphError, hamming_distance
from .labels import Bijection
from .rng import derive_rng


def gnp_connected(n: int, edge_prob: float, rng: random.Random) -> Graph:
    """G(n, p) conditioned on connectivity, by resampling."""
    if n < 2:
        raise GraphError("need at least 2 nodes")
    while True:
        edges = [
            (u, v)
            for u in range(n)
            for v in range(u + 1, n)
            if rng.random() < edge_prob
        ]
        g = Graph(n, edges)
        if g.is_connected():
            return g


def random_connected_m(n: int, m: int, rng: random.Random) -> Graph:
    """Connected graph with exactly m edges: random spanning tree plus
    uniformly chosen extra edges."""
    maxm = n * (n - 1) // 2
    if not n - 1 <= m <= maxm:
        raise GraphError(f"m={m} infeasible for a connected graph on {n} nodes")
    order = list(range(n))
    rng.shuffle(order)
    edges = set()
    for i in range(1, n):
        u, v = order[i], order[rng.randrange(i)]
        edges.add((u, v) if u < v else (v, u))
    rest = [
        (u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in edges
    ]
    rng.shuffle(rest)
    edges.update(rest[: m - len(edges)])
    return Graph(n, sorted(edges))


@dataclass
class CertifiedPair:
    gu: Graph
    gk: Graph
    kind: str  # "isomorphism" or "edge_gap"
    isomorphism: Optional[Bijection] = None
    gap_edges: Optional[int] = None
    eps: Optional[float] = None

    def verify(self) -> bool:
        if self.kind == "isomorphism":
            return (
                self.isomorphism is not None
                and hamming_distance(self.isomorphism.apply_to(self.gu), self.gk) == 0
            )
        if self.kind == "edge_gap":
            n = self.gu.n
            gap = abs(self.gu.m - self.gk.m)
            return (
                self.gap_edges is not None
                and gap >= self.gap_edges
                and 2 * self.gap_edges > self.eps * n * n
            )
        return False

    def certificate_json(self) -> str:
        data: Dict[str, object] = {"kind": self.kind, "n": self.gu.n}
        if self.kind == "isomorphism":
            data["isomorphism"] = list(self.isomorphism.mapping)
        else:
            data["gap_edges"] = self.gap_edges
            data["eps"] = self.eps
        return json.dumps(data, sort_keys=True)


def gen_isomorphic_pair(n: int, edge_prob: float, seed: int) -> CertifiedPair:
    rng = derive_rng(seed, "iso-pair")
    gu = gnp_connected(n, edge_prob, rng)
    pi = Bijection.random(n, rng)
    return CertifiedPair(gu, pi.apply_to(gu), "isomorphism", isomorphism=pi)


def default_far_gap(n: int, eps: float) -> int:
    """Edge gap giving distance at least 2.5*eps*n^2; the bare certificate
    only needs eps*n^2/2, but the sampling threshold at 1.5*eps separates
    reliably only with real margin over it."""
    return math.ceil(1.25 * eps * n * n)


def gen_far_pair(
    n: int, eps: float, seed: int, gap_edges: Optional[int] = None
) -> CertifiedPair:
    """Dense/sparse pair with |E(gu)| - |E(gk)| >= gap_edges, both connected.
    Every bijection must disagree on at least 2*gap_edges ordered adjacency
    entries, so the pair is certified farther than eps*n^2."""
    if not 0 < eps < 1:
        raise GraphError(f"eps must be in (0, 1), got {eps}")
    if gap_edges is None:
        gap_edges = default_far_gap(n, eps)
    if 2 * gap_edges <= eps * n * n:
        raise GraphError(
            f"gap of {gap_edges} edges cannot certify eps={eps} at n={n}"
        )
    maxm = n * (n - 1) // 2
    m_u = maxm - max(2, maxm // 20)
    m_k = m_u - gap_edges
    if m_k < n - 1:
        m_k = n - 1
        m_u = m_k + gap_edges
    if m_u > maxm:
        raise GraphError(
            f"eps={eps} too large for n={n}: cannot fit a {gap_edges}-edge gap"
        )
    rng = derive_rng(seed, "far-pair")
    gu = random_connected_m(n, m_u, rng)
    gk = random_connected_m(n, m_k, rng)
    return CertifiedPair(gu, gk, "edge_gap", gap_edges=gap_edges, eps=eps)


# ---------------------------------------------------------------------------
# two-party decision gadget
# ---------------------------------------------------------------------------

BitMatrix = Sequence[Sequence[int]]


def _matrix_dim(x: BitMatrix) -> int:
    k = len(x)
    if k < 1 or any(len(row) != k for row in x):
        raise GraphError("inputs must be square bit matrices")
    return k


def _half_edges(
    base: int, k: int, cross: BitMatrix, tails: int
) -> Tuple[Dict[str, object], List[Tuple[int, int]]]:
    """One side of the gadget: hub h adjacent to the first path and `tails`
    degree-1 nodes, mirror hub h2 adjacent to the second path, bridge node
    h1 of degree 2 between them, one tail on each path head, and the cross
    edges encoded by the input matrix."""
    ids = {
        "h": base,
        "h1": base + 1,
        "h2": base + 2,
        "p1": [base + 3 + i for i in range(k)],
        "p2": [base + 3 + k + i for i in range(k)],
        "t_p1": base + 3 + 2 * k,
        "t_p2": base + 4 + 2 * k,
        "t_h": [base + 5 + 2 * k + i for i in range(tails)],
    }
    e: List[Tuple[int, int]] = []
    p1, p2 = ids["p1"], ids["p2"]
    for i in range(k - 1):
        e.append((p1[i], p1[i + 1]))
        e.append((p2[i], p2[i + 1]))
    e.extend((ids["h"], a) for a in p1)
    e.extend((ids["h2"], a) for a in p2)
    e.append((ids["h"], ids["h1"]))
    e.append((ids["h1"], ids["h2"]))
    e.append((p1[0], ids["t_p1"]))
    e.append((p2[0], ids["t_p2"]))
    e.extend((ids["h"], t) for t in ids["t_h"])
    for i in range(k):
        for j in range(k):
            if cross[i][j]:
                e.append((p1[i], p2[j]))
    return ids, e


def gen_decision_lb(x: BitMatrix, y: BitMatrix) -> Tuple[Graph, Graph]:
    """The rigid gadget pair: the network graph encodes (x, y), the reference
    graph encodes (x, x); they are isomorphic iff x == y.  4k + 15 nodes."""
    k = _matrix_dim(x)
    if _matrix_dim(y) != k:
        raise GraphError("both matrices must have the same dimension")

    def build(left: BitMatrix, right: BitMatrix) -> Graph:
        ids_a, e_a = _half_edges(0, k, left, tails=2)
        ids_b, e_b = _half_edges(2 * k + 7, k, right, tails=3)
        edges = e_a + e_b + [(ids_a["h"], ids_b["h"])]
        return Graph(4 * k + 15, edges)

    return build(x, y), build(x, x)


def decode_decision_lb(g: Graph) -> Tuple[Tuple[Tuple[int, ...], ...], Tuple[Tuple[int, ...], ...]]:
    """Recover the encoded matrices from an arbitrarily relabeled copy by
    structural peeling: the hubs are the unique nodes with exactly 2 and 3
    degree-1 neighbors; each bridge is the hub neighbor of degree 2 whose
    second neighbor is neither degree-1 nor adjacent to the hub; each path
    head is the unique path node with a degree-1 tail."""
    deg1 = {v for v in range(g.n) if g.degree(v) == 1}

    def hub_with(count: int) -> int:
        matches = [
            v
            for v in range(g.n)
            if sum(1 for w in g.neighbors(v) if w in deg1) == count
        ]
        if len(matches) != 1:
            raise GraphError(f"gadget structure broken: {len(matches)} hubs of {count}")
        return matches[0]

    def peel_path(head: int, members: set) -> List[int]:
        path = [head]
        visited = {head}
        while True:
            nxt = [
                w for w in g.neighbors(path[-1]) if w in members and w not in visited
            ]
            if not nxt:
                if len(path) != len(members):
                    raise GraphError("gadget path does not cover its side")
                return path
            if len(nxt) != 1:
                raise GraphError("gadget path is not a path")
            path.append(nxt[0])
            visited.add(nxt[0])

    u = hub_with(2)
    v = hub_with(3)

    def decode_half(h: int, other_hub: int) -> Tuple[List[int], List[int]]:
        bridge = []
        hood = set(g.neighbors(h))
        for w in g.neighbors(h):
            if g.degree(w) != 2 or w in deg1:
                continue
            z = next(x for x in g.neighbors(w) if x != h)
            if z not in deg1 and z not in hood and z != h:
                bridge.append((w, z))
        if len(bridge) != 1:
            raise GraphError("gadget structure broken: bridge not unique")
        h1, h2 = bridge[0]
        p1_members = hood - deg1 - {h1, other_hub}
        p2_members = set(g.neighbors(h2)) - {h1}
        head1 = [w for w in p1_members if any(x in deg1 for x in g.neighbors(w))]
        head2 = [w for w in p2_members if any(x in deg1 for x in g.neighbors(w))]
        if len(head1) != 1 or len(head2) != 1:
            raise GraphError("gadget structure broken: path heads not unique")
        return (
            peel_path(head1[0], p1_members),
            peel_path(head2[0], p2_members),
        )

    a1, a2 = decode_half(u, v)
    b1, b2 = decode_half(v, u)
    k = len(a1)

    def cross(p1: List[int], p2: List[int]):
        return tuple(
            tuple(1 if g.adj(p1[i], p2[j]) else 0 for j in range(k))
            for i in range(k)
        )

    return cross(a1, a2), cross(b1, b2)


# ---------------------------------------------------------------------------
# spliced diameter-scaling family
# ---------------------------------------------------------------------------

def gen_testing_lb(i: int, j: int, d: int, g1: Graph, g2: Graph) -> Graph:
    """Two copies (of g1/g2 chosen by i, j in {1, 2}) joined by a d-node
    path whose endpoints are identified with node 0 of each copy; the result
    has exactly 2n + d - 2 nodes."""
    if i not in (1, 2) or j not in (1, 2):
        raise GraphError("side selectors must be 1 or 2")
    if d < 2:
        raise GraphError("path length must be at least 2")
    if g1.n != g2.n:
        raise GraphError("both side graphs must have the same size")
    n = g1.n
    left = g1 if i == 1 else g2
    right = g1 if j == 1 else g2
    edges: List[Tuple[int, int]] = list(left.edges)
    edges.extend((u + n, v + n) for u, v in right.edges)
    path = [0] + [2 * n + a for a in range(d - 2)] + [n]
    edges.extend((path[a], path[a + 1]) for a in range(len(path) - 1))
    return Graph(2 * n + d - 2, edges)


@dataclass
class LabeledGraph:
    """A graph together with a fixed node labeling and fixed port maps
    (ports[v] lists v's neighbors in port order)."""

    graph: Graph
    node_labels: Tuple[int, ...]
    ports: Tuple[Tuple[int, ...], ...]

    def remote_port(self, v: int, w: int) -> int:
        return self.ports[w].index(v)


def gen_testing_lb_labeled(
    i: int,
    j: int,
    d: int,
    orientation: str,
    g1: Graph,
    g2: Graph,
    sides: Tuple[str, str] = ("A", "B"),
) -> LabeledGraph:
    """The spliced graph with the family's fixed labels and ports.

    Label sets: A = 0..n-1, B = n..2n-1 (assigned to the two copies by
    `sides`), path interior labels 2n..2n+d-3 in ascending ("a") or
    descending ("d") order from the i-side.  Ports inside the copies follow
    the template's sorted adjacency, the path attaches at each copy's last
    port, and interior path ports alternate so the assignment reads the same
    from both ends; d must be even for that."""
    if orientation not in ("a", "d"):
        raise GraphError("orientation must be 'a' or 'd'")
    if d % 2 != 0:
        raise GraphError("path length must be even")
    if sides not in (("A", "B"), ("B", "A")):
        raise GraphError("sides must be a permutation of ('A', 'B')")
    g = gen_testing_lb(i, j, d, g1, g2)
    n = g1.n
    base = {"A": 0, "B": n}
    labels = [0] * g.n
    for v in range(n):
        labels[v] = base[sides[0]] + v
    for v in range(n):
        labels[n + v] = base[sides[1]] + v
    interior = [2 * n + a for a in range(d - 2)]
    for idx, v in enumerate(interior):
        labels[v] = 2 * n + (idx if orientation == "a" else d - 3 - idx)

    left = g1 if i == 1 else g2
    right = g1 if j == 1 else g2
    ports: List[Tuple[int, ...]] = [()] * g.n
    for v in range(n):
        tpl = list(left.neighbors(v))
        if v == 0:
            tpl.append(interior[0] if interior else n)
        ports[v] = tuple(tpl)
    for v in range(n):
        tpl = [w + n for w in right.neighbors(v)]
        if v == 0:
            tpl.append(interior[-1] if interior else 0)
        ports[n + v] = tuple(tpl)
    # interior path ports: position 2..d-1 along p_1..p_d; even positions
    # put the i-side on port 0, odd positions the j-side, so the pattern is
    # symmetric under reversal (d even)
    path = [0] + interior + [n]
    for a, v in enumerate(interior):
        pos = a + 2  # position along the path, 1-based
        toward_i = path[a]
        toward_j = path[a + 2]
        if pos % 2 == 0:
            ports[v] = (toward_i, toward_j)
        else:
            ports[v] = (toward_j, toward_i)
    return LabeledGraph(g, tuple(labels), tuple(ports))


def hop_view(lg: LabeledGraph, v: int, k: int):
    """The k-hop labeled/ported view: everything a node could learn in k
    rounds.  Unrolled as a tree (no cycle detection), matching what local
    message exchange can distinguish."""
    if k == 0:
        return (lg.node_labels[v], len(lg.ports[v]))
    branches = tuple(
        (q, lg.remote_port(v, w), hop_view(lg, w, k - 1))
        for q, w in enumerate(lg.ports[v])
    )
    return (lg.node_labels[v], len(lg.ports[v]), branches)
