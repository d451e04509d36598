import math
import random

import pytest

from congestgi.decision import decide, fingerprint_local, sample_primes
from congestgi.graphs import Graph, GraphError
from congestgi.instances import gen_isomorphic_pair, gnp_connected
from congestgi.oracles import OracleRefusal
from congestgi.rng import derive_rng
from congestgi.streaming import SpaceBudgetExceeded, StreamState, stream_decide, stream_state


def test_empty_stream_all_zero():
    st = stream_state(5, 1)
    assert all(r == 0 for r in st.residues)


def test_k3_any_order_same_residues():
    edges = [(0, 1), (0, 2), (1, 2)]
    outs = set()
    import itertools

    for perm in itertools.permutations(edges):
        st = stream_state(3, 42)
        for u, v in perm:
            st.update(u, v)
        outs.add(st.fingerprint())
    assert len(outs) == 1


def test_stream_matches_offline_fingerprint():
    g = gnp_connected(32, 0.3, derive_rng(7, "sm"))
    st = stream_state(32, 99)
    edges = sorted(g.edges)
    random.Random(0).shuffle(edges)
    for u, v in edges:
        st.update(u, v)
    offline = fingerprint_local(g, range(32), st.primes)
    assert st.fingerprint() == offline


def test_order_invariance_ten_shuffles():
    g = gnp_connected(12, 0.4, derive_rng(1, "oi"))
    base = None
    for i in range(10):
        edges = sorted(g.edges)
        random.Random(i).shuffle(edges)
        st = stream_state(12, 5)
        for u, v in edges:
            st.update(u, v)
        if base is None:
            base = st.fingerprint()
        assert st.fingerprint() == base


def test_duplicate_edge_rejected():
    st = stream_state(4, 3)
    st.update(0, 1)
    with pytest.raises(GraphError):
        st.update(1, 0)


def test_self_loop_rejected():
    st = stream_state(4, 3)
    with pytest.raises(GraphError):
        st.update(2, 2)


def test_unknown_id_with_full_table():
    st = stream_state(3, 3)
    st.update(100, 200)
    st.update(100, 300)
    with pytest.raises(GraphError):
        st.update(100, 400)


def test_decide_accepts_own_stream():
    pair = gen_isomorphic_pair(6, 0.5, 2)
    verdict, _ = stream_decide(pair.gk, sorted(pair.gk.edges), 17)
    assert verdict


def test_decide_rejects_extra_edge():
    g = gnp_connected(5, 0.5, derive_rng(3, "ex"))
    spare = next(
        (u, v)
        for u in range(5)
        for v in range(u + 1, 5)
        if not g.adj(u, v)
    )
    edges = sorted(g.edges) + [spare]
    for seed in range(50):
        verdict, _ = stream_decide(g, edges, derive_rng(seed, "sd").getrandbits(40))
        assert not verdict


def test_agreement_with_offline_decide():
    for seed in range(25):
        rng = derive_rng(seed, "ag")
        n = rng.randrange(4, 8)
        gu = gnp_connected(n, 0.5, rng)
        gk = gnp_connected(n, 0.5, rng)
        seed_value = rng.getrandbits(40)
        verdict, st = stream_decide(gk, sorted(gu.edges), seed_value)
        assert verdict == decide(gk, st.fingerprint())


def test_decide_cap():
    g = Graph(10, [])
    st = stream_state(10, 1)
    with pytest.raises(OracleRefusal):
        st.decide(g)


def test_space_meter_inside_budget_and_tracked():
    for n in (16, 64, 128):
        g = gnp_connected(n, 0.3, derive_rng(n, "sp"))
        st = stream_state(n, 11)
        for u, v in sorted(g.edges):
            st.update(u, v)
        budget = 64 * n * math.ceil(math.log2(n))
        assert 0 < st.peak_bits <= budget


def test_space_meter_trips_on_tiny_budget():
    # a state with far too many primes for its size must trip the meter
    with pytest.raises(SpaceBudgetExceeded):
        StreamState(2, sample_primes(1, 4000, 8))
