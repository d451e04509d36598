"""Anchor-sequence labels and label-consistent bijections.

Fix a sequence C = (c_1, ..., c_s) of anchor nodes in a graph.  Every node v
gets an s-bit label whose i-th bit says whether c_i is a neighbor of v.
Nodes with very different neighborhoods almost surely get different labels
once the anchor sequence is long enough, which is what the testing protocols
exploit.  This module holds the label computations, the separation oracle,
and the sampler for bijections that respect equally-sized label classes.

Labels are plain tuples of 0/1 ints, bit i (0-indexed) corresponding to
anchor c_{i+1}.  `msb` reports the 1-indexed position of the highest set
bit, or 0 for the all-zero label.

Anchor sequences used by the distributed protocols have distinct entries
(`validate_distinct_seq`); the label math itself also accepts sequences with
repeats, which the large statistical draws need when s exceeds n.
"""

from __future__ import annotations

import random
from collections import Counter, defaultdict
from typing import Dict, List, Sequence, Tuple

from .graphs import Graph, GraphError

Label = Tuple[int, ...]
NodeSeq = Tuple[int, ...]


def validate_seq(g: Graph, c: Sequence[int]) -> None:
    for v in c:
        if not 0 <= v < g.n:
            raise GraphError(f"anchor {v} out of range for n={g.n}")


def validate_distinct_seq(g: Graph, c: Sequence[int]) -> None:
    validate_seq(g, c)
    if len(set(c)) != len(c):
        raise GraphError("anchor sequence entries must be distinct")


def c_label(g: Graph, c: Sequence[int], v: int) -> Label:
    """The adjacency signature of v toward the anchor sequence."""
    if not 0 <= v < g.n:
        raise GraphError(f"node {v} out of range for n={g.n}")
    validate_seq(g, c)
    return tuple(1 if g.adj(v, ci) else 0 for ci in c)


def all_labels(g: Graph, c: Sequence[int]) -> List[Label]:
    """Labels of every node, indexed by node id."""
    validate_seq(g, c)
    mat = g.matrix()
    cols = mat[:, list(c)].astype(int) if len(c) else mat[:, :0].astype(int)
    return [tuple(row) for row in cols.tolist()]


def msb(label: Label) -> int:
    """1-indexed position of the highest set bit; 0 for the all-zero label."""
    for i in range(len(label) - 1, -1, -1):
        if label[i]:
            return i + 1
    return 0


def label_to_key(label: Label) -> str:
    """Canonical string form of a label, used as a stream key."""
    return "".join("1" if b else "0" for b in label)


def zero_label(s: int) -> Label:
    return (0,) * s


def label_class(g: Graph, c: Sequence[int], x: Label) -> set[int]:
    """All nodes whose label equals x."""
    if len(x) != len(c):
        raise GraphError(f"label length {len(x)} != sequence length {len(c)}")
    return {v for v, lab in enumerate(all_labels(g, c)) if lab == x}


def label_classes(g: Graph, c: Sequence[int]) -> Dict[Label, List[int]]:
    """Partition of the node set by label.  Only non-empty classes appear."""
    classes: Dict[Label, List[int]] = defaultdict(list)
    for v, lab in enumerate(all_labels(g, c)):
        classes[lab].append(v)
    return dict(classes)


def neighborhood_difference(g: Graph, u: int, v: int) -> int:
    """Size of the symmetric difference of the two neighborhoods."""
    return len(set(g.neighbors(u)) ^ set(g.neighbors(v)))


def is_beta_separating(g: Graph, c: Sequence[int], beta: float) -> bool:
    """Brute-force check: does every node pair whose neighborhoods differ in
    at least beta*n places get distinct labels?"""
    if not 0 < beta <= 1:
        raise GraphError(f"beta must be in (0, 1], got {beta}")
    validate_seq(g, c)
    labs = all_labels(g, c)
    cut = beta * g.n
    for u in range(g.n):
        for v in range(u + 1, g.n):
            if labs[u] == labs[v] and neighborhood_difference(g, u, v) >= cut:
                return False
    return True


class Bijection:
    """A total one-to-one map on {0..n-1} -> {0..n-1}."""

    __slots__ = ("mapping",)

    def __init__(self, mapping: Sequence[int]):
        n = len(mapping)
        if sorted(mapping) != list(range(n)):
            raise GraphError("mapping is not a bijection on 0..n-1")
        self.mapping = tuple(mapping)

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, v: int) -> int:
        return self.mapping[v]

    @classmethod
    def identity(cls, n: int) -> "Bijection":
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, rng: random.Random) -> "Bijection":
        perm = list(range(n))
        rng.shuffle(perm)
        return cls(perm)

    def inverse(self) -> "Bijection":
        inv = [0] * self.n
        for u, v in enumerate(self.mapping):
            inv[v] = u
        return Bijection(inv)

    def apply_to(self, g: Graph) -> Graph:
        """The graph with node u renamed to mapping[u]."""
        return g.relabel(self.mapping)

    def apply_to_seq(self, c: Sequence[int]) -> NodeSeq:
        return tuple(self.mapping[v] for v in c)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Bijection):
            return NotImplemented
        return self.mapping == other.mapping

    def __hash__(self) -> int:
        return hash(self.mapping)

    def __repr__(self) -> str:
        return f"Bijection({list(self.mapping)})"


def is_isomorphism(f: Bijection, g: Graph, h: Graph) -> bool:
    if g.n != h.n or f.n != g.n:
        return False
    return all(h.adj(f(u), f(v)) for u, v in g.edges) and g.m == h.m


def is_label_consistent(
    f: Bijection, g: Graph, h: Graph, cg: Sequence[int], ch: Sequence[int]
) -> bool:
    """True iff f maps each anchor c_i to its partner and preserves every
    node's label."""
    if len(cg) != len(ch):
        raise GraphError("anchor sequences must have equal length")
    if g.n != h.n or f.n != g.n:
        raise GraphError("size mismatch")
    if any(f(a) != b for a, b in zip(cg, ch)):
        return False
    labs_g = all_labels(g, cg)
    labs_h = all_labels(h, ch)
    return all(labs_g[v] == labs_h[f(v)] for v in range(g.n))


def sample_max_consistent(
    g: Graph,
    h: Graph,
    c: Sequence[int],
    p: Sequence[int],
    rng: random.Random,
) -> Bijection:
    """Uniform sample from the bijections that pin c_i -> p_i, map every
    equally-sized label class onto its partner class, and map the leftover
    nodes onto the leftover codomain arbitrarily.

    Requires the anchors' own labels to agree pairwise (the caller is
    expected to have verified this already).
    """
    if g.n != h.n:
        raise GraphError("size mismatch")
    if len(c) != len(p):
        raise GraphError("anchor sequences must have equal length")
    labs_g = all_labels(g, c)
    labs_h = all_labels(h, p)
    for ci, pi in zip(c, p):
        if labs_g[ci] != labs_h[pi]:
            raise GraphError(f"anchor labels disagree: {ci} vs {pi}")

    pin = dict(zip(c, p))
    classes_g: Dict[Label, List[int]] = defaultdict(list)
    classes_h: Dict[Label, List[int]] = defaultdict(list)
    for v, lab in enumerate(labs_g):
        classes_g[lab].append(v)
    for v, lab in enumerate(labs_h):
        classes_h[lab].append(v)

    mapping = [-1] * g.n
    residual_dom: List[int] = []
    residual_cod: List[int] = []
    pinned_images = set(pin.values())
    for lab in sorted(set(classes_g) | set(classes_h)):
        dom = classes_g.get(lab, [])
        cod = classes_h.get(lab, [])
        if len(dom) == len(cod):
            free_dom = [v for v in dom if v not in pin]
            free_cod = [u for u in cod if u not in pinned_images]
            # pins inside an equal class stay inside it, so counts match
            images = list(free_cod)
            rng.shuffle(images)
            for v, u in zip(free_dom, images):
                mapping[v] = u
            for v in dom:
                if v in pin:
                    mapping[v] = pin[v]
        else:
            residual_dom.extend(v for v in dom if v not in pin)
            residual_cod.extend(u for u in cod if u not in pinned_images)
            for v in dom:
                if v in pin:
                    mapping[v] = pin[v]

    images = list(residual_cod)
    rng.shuffle(images)
    for v, u in zip(residual_dom, images):
        mapping[v] = u
    return Bijection(mapping)


def class_size_counter(g: Graph, c: Sequence[int]) -> Counter:
    """Label -> class size, for every non-empty class."""
    return Counter(all_labels(g, c))
