import math
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from congestgi.graphs import Graph, GraphError, hamming_distance
from congestgi.labels import (
    Bijection,
    all_labels,
    c_label,
    class_size_counter,
    is_beta_separating,
    is_label_consistent,
    label_class,
    label_classes,
    msb,
    sample_max_consistent,
)
from congestgi.oracles import brute_iso
from congestgi.rng import derive_rng


def complete(n):
    return Graph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def gnp(n, p, rng):
    return Graph(
        n, [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    )


# -- labels ----------------------------------------------------------------

def test_label_all_ones_when_adjacent_to_every_anchor():
    g = complete(4)
    assert c_label(g, (1, 2, 3), 0) == (1, 1, 1)


def test_label_all_zeros_for_isolated_node():
    g = Graph(4, [(1, 2), (2, 3)])
    assert c_label(g, (1, 2, 3), 0) == (0, 0, 0)


def test_label_on_path():
    # path 0-1-2, anchors (0, 2): middle node sees both, end node neither
    g = Graph(3, [(0, 1), (1, 2)])
    assert c_label(g, (0, 2), 1) == (1, 1)
    assert c_label(g, (0, 2), 0) == (0, 0)


def test_label_out_of_range():
    g = complete(3)
    with pytest.raises(GraphError):
        c_label(g, (0,), 7)
    with pytest.raises(GraphError):
        c_label(g, (9,), 0)


def test_msb_is_one_indexed_with_zero_sentinel():
    assert msb((0, 0, 0)) == 0
    assert msb((1, 0, 0)) == 1
    assert msb((1, 0, 1)) == 3


# -- label classes ----------------------------------------------------------

def test_label_class_on_k4():
    g = complete(4)
    assert label_class(g, (0,), (1,)) == {1, 2, 3}
    assert label_class(g, (0,), (0,)) == {0}


def test_label_class_empty_graph_all_zero():
    g = Graph(5, [])
    assert label_class(g, (0, 1), (0, 0)) == set(range(5))


def test_label_class_length_mismatch():
    with pytest.raises(GraphError):
        label_class(complete(3), (0,), (1, 0))


@given(st.integers(2, 8), st.integers(0, 4), st.randoms(use_true_random=False))
def test_label_classes_partition_nodes(n, s, rng):
    g = gnp(n, 0.5, rng)
    c = tuple(rng.sample(range(n), min(s, n)))
    classes = label_classes(g, c)
    seen = sorted(v for members in classes.values() for v in members)
    assert seen == list(range(n))


# -- separating oracle -------------------------------------------------------

def test_all_anchors_always_separating():
    rng = derive_rng(1, "sep")
    for _ in range(10):
        g = gnp(6, 0.5, rng)
        assert is_beta_separating(g, tuple(range(6)), 0.5)


def test_separating_hand_instance():
    # two isolated nodes plus an edge on {2,3}: nodes 2,3 differ in exactly
    # 2 = beta*n neighborhood entries and carry labels 0 vs 1
    g = Graph(4, [(2, 3)])
    assert is_beta_separating(g, (2,), 0.5)


def test_empty_anchor_sequence_not_separating():
    g = Graph(4, [(2, 3)])
    assert not is_beta_separating(g, (), 0.5)


def test_separating_rejects_bad_beta():
    with pytest.raises(GraphError):
        is_beta_separating(complete(3), (0,), 0.0)


def test_separating_probability_formula():
    # draw anchors with the count the tail bound asks for and check the
    # empirical separating rate
    n, beta, delta = 64, 0.5, 0.3
    s = math.ceil(4 * math.log(n / delta) / beta)
    assert s <= n
    rng = derive_rng(7, "claim-rate")
    g = gnp(n, 0.5, rng)
    hits = 0
    trials = 200
    for _ in range(trials):
        c = tuple(rng.sample(range(n), s))
        hits += is_beta_separating(g, c, beta)
    assert hits / trials >= 1 - delta - 0.05


# -- consistency -------------------------------------------------------------

def test_identity_is_consistent():
    g = complete(4)
    assert is_label_consistent(Bijection.identity(4), g, g, (0, 1), (0, 1))


def test_isomorphism_is_consistent_with_mapped_anchors():
    rng = derive_rng(3, "cons")
    for _ in range(20):
        g = gnp(6, 0.5, rng)
        pi = Bijection.random(6, rng)
        h = pi.apply_to(g)
        c = tuple(rng.sample(range(6), 3))
        assert is_label_consistent(pi, g, h, c, pi.apply_to_seq(c))
        # and the class sizes agree for every label
        assert class_size_counter(g, c) == class_size_counter(
            h, pi.apply_to_seq(c)
        )


def test_swap_of_differently_labeled_nodes_breaks_consistency():
    # path 0-1-2, anchors (0,): nodes 1 (label 1) and 2 (label 0) differ
    g = Graph(3, [(0, 1), (1, 2)])
    f = Bijection([0, 2, 1])
    assert not is_label_consistent(f, g, g, (0,), (0,))


# -- sampling maximally consistent bijections --------------------------------

def test_singleton_classes_force_unique_bijection():
    g = Graph(3, [(0, 1), (1, 2)])  # labels w.r.t. (1,): 1, 0, 1 -- not singleton
    g = Graph(3, [(0, 1)])  # anchors (0, 1): labels 01, 10, 00 all distinct
    f = sample_max_consistent(g, g, (0, 1), (0, 1), derive_rng(0, "s"))
    assert f == Bijection.identity(3)


def test_two_element_class_frequencies():
    # one class of size 2 ({2,3}), everything else pinned or singleton
    g = Graph(4, [(0, 1), (2, 3)])
    counts = Counter()
    for i in range(10_000):
        f = sample_max_consistent(g, g, (0,), (0,), derive_rng(i, "freq"))
        counts[f.mapping] += 1
    assert set(counts) == {(0, 1, 2, 3), (0, 1, 3, 2)}
    for v in counts.values():
        assert abs(v / 10_000 - 0.5) < 0.05


def test_sampled_bijection_is_consistent_for_isomorphic_pairs():
    rng = derive_rng(11, "mc")
    for trial in range(30):
        g = gnp(6, 0.5, rng)
        pi = Bijection.random(6, rng)
        h = pi.apply_to(g)
        c = tuple(rng.sample(range(6), 2))
        p = pi.apply_to_seq(c)
        f = sample_max_consistent(g, h, c, p, derive_rng(trial, "mcf"))
        assert is_label_consistent(f, g, h, c, p)


def test_sample_rejects_mismatched_anchor_labels():
    # adjacent anchors in g, non-adjacent in h: the anchor labels disagree
    g = Graph(3, [(0, 1)])
    h = Graph(3, [])
    with pytest.raises(GraphError):
        sample_max_consistent(g, h, (0, 1), (0, 1), derive_rng(0, "x"))


# -- the deterministic distance bound ----------------------------------------

@settings(deadline=None, max_examples=60)
@given(st.integers(0, 5000))
def test_consistent_bijections_stay_close_on_separating_instances(seed):
    rng = derive_rng(seed, "l8")
    n = rng.randrange(4, 9)
    g = gnp(n, rng.choice([0.3, 0.5, 0.7]), rng)
    pi = Bijection.random(n, rng)
    h = pi.apply_to(g)
    eps = rng.choice([0.3, 0.5, 0.7])
    c = tuple(rng.sample(range(n), rng.randrange(1, n)))
    if not is_beta_separating(g, c, eps):
        return
    for k in range(5):
        f = sample_max_consistent(g, h, c, pi.apply_to_seq(c), derive_rng(seed, "f", k))
        assert hamming_distance(f.apply_to(g), h) <= eps * n * n
