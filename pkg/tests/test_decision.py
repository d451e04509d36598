import math
from collections import Counter

import pytest
import sympy

from congestgi.decision import (
    Fingerprint,
    decide,
    decide_by_reconstruction,
    decide_isomorphism,
    default_prime_count,
    exact_encoding,
    fingerprint_local,
    nth_primes,
    pair_rank,
    run_decision_protocol,
    sample_primes,
)
from congestgi.graphs import Graph, hamming_distance
from congestgi.instances import gen_decision_lb, gen_isomorphic_pair, gnp_connected
from congestgi.labels import Bijection
from congestgi.oracles import OracleRefusal
from congestgi.rng import derive_rng
from congestgi.sim import NetworkConfig


def complete(n):
    return Graph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


# -- pair ordering and primes --------------------------------------------------

def test_pair_rank_orders_by_first_then_second():
    assert [pair_rank(i, j, 3) for i, j in [(0, 1), (0, 2), (1, 2)]] == [0, 1, 2]
    n = 6
    ranks = [pair_rank(i, j, n) for i in range(n) for j in range(i + 1, n)]
    assert ranks == list(range(n * (n - 1) // 2))


def test_first_primes():
    assert nth_primes(5) == (2, 3, 5, 7, 11)
    assert nth_primes(25)[-1] == 97


def test_primes_increasing_and_prime():
    ps = nth_primes(500)
    assert all(a < b for a, b in zip(ps, ps[1:]))
    assert all(sympy.isprime(p) for p in ps)


def test_sample_primes_shared_expansion():
    a = sample_primes(123, 20, 16)
    b = sample_primes(123, 20, 16)
    assert a == b
    pool = set(nth_primes(256))
    assert all(p in pool for p in a)


# -- local fingerprints -----------------------------------------------------------

def test_fingerprint_empty_graph_all_zero():
    fp = fingerprint_local(Graph(4, []), range(4), [7, 11])
    assert fp.residues == (0, 0)


def test_fingerprint_k3_hand_value():
    # ranks 0,1,2 set: encoding 2^0+2^1+2^2 = 7; 7 mod 5 = 2
    fp = fingerprint_local(complete(3), [0, 1, 2], [5])
    assert fp.residues == (2,)
    assert exact_encoding(complete(3), [0, 1, 2]) == 7


def test_fingerprint_matches_exact_encoding():
    rng = derive_rng(4, "fp")
    for _ in range(20):
        n = rng.randrange(3, 8)
        g = Graph(
            n,
            [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.5],
        )
        perm = Bijection.random(n, rng).mapping
        primes = sample_primes(rng.getrandbits(30), 6, n)
        fp = fingerprint_local(g, perm, primes)
        s_m = exact_encoding(g, perm)
        assert fp.residues == tuple(s_m % p for p in primes)


def test_fingerprint_json_roundtrip():
    fp = Fingerprint((3, 5), (1, 2))
    assert Fingerprint.from_json(fp.to_json()) == fp


def test_collision_rate_matches_divisor_count():
    # collision fraction over all primes in the pool equals exactly the
    # fraction of pool primes dividing the encoding difference
    rng = derive_rng(8, "col")
    for _ in range(10):
        n = rng.randrange(4, 9)
        def rand():
            return Graph(
                n,
                [
                    (u, v)
                    for u in range(n)
                    for v in range(u + 1, n)
                    if rng.random() < 0.5
                ],
            )
        g, h = rand(), rand()
        sg = exact_encoding(g, range(n))
        sh = exact_encoding(h, range(n))
        if sg == sh:
            continue
        pool = nth_primes(n * n)
        collisions = sum(1 for p in pool if sg % p == sh % p)
        dividing = sum(1 for p in pool if (sg - sh) % p == 0)
        assert collisions == dividing
        assert collisions / len(pool) <= 0.5


# -- root decision -----------------------------------------------------------------

def test_decide_accepts_identity():
    g = gnp_connected(6, 0.5, derive_rng(1, "d"))
    primes = sample_primes(5, 12, 6)
    fp = fingerprint_local(g, range(6), primes)
    assert decide_isomorphism(g, fp)


def test_decide_accepts_relabeled():
    g = gnp_connected(7, 0.5, derive_rng(2, "d2"))
    pi = Bijection.random(7, derive_rng(3, "d3"))
    primes = sample_primes(6, 14, 7)
    fp = fingerprint_local(g, range(7), primes)
    assert decide_isomorphism(pi.apply_to(g), fp)


def test_decide_rejects_k3_vs_path():
    path3 = Graph(3, [(0, 1), (1, 2)])
    primes = sample_primes(7, 3, 3)
    fp = fingerprint_local(complete(3), range(3), primes)
    assert not decide_isomorphism(path3, fp)


def test_decide_cap():
    g = Graph(10, [])
    with pytest.raises(OracleRefusal):
        decide_isomorphism(g, Fingerprint((3,), (0,)))


def test_reconstruction_equals_enumeration():
    rng = derive_rng(11, "rec")
    for _ in range(20):
        n = rng.randrange(4, 8)
        def rand():
            return Graph(
                n,
                [
                    (u, v)
                    for u in range(n)
                    for v in range(u + 1, n)
                    if rng.random() < 0.5
                ],
            )
        g, h = rand(), rand()
        primes = sample_primes(rng.getrandbits(30), default_prime_count(n), n)
        fp = fingerprint_local(g, list(Bijection.random(n, rng).mapping), primes)
        assert decide_isomorphism(h, fp) == decide_by_reconstruction(h, fp)


# -- distributed protocol -------------------------------------------------------------

def test_distributed_fingerprint_matches_local():
    for seed in range(5):
        g = gnp_connected(6, 0.5, derive_rng(seed, "df"))
        res = run_decision_protocol(g, None, NetworkConfig(seed=seed), rounds_only=True)
        local = fingerprint_local(g, res.numbering, res.fingerprint.primes)
        assert local.residues == res.fingerprint.residues
        assert sorted(res.numbering) == list(range(6))


def test_distributed_fingerprint_single_prime_path():
    g = Graph(6, [(i, i + 1) for i in range(5)])
    res = run_decision_protocol(g, None, NetworkConfig(seed=9), k=1, rounds_only=True)
    local = fingerprint_local(g, res.numbering, res.fingerprint.primes)
    assert local.residues == res.fingerprint.residues


def test_protocol_accepts_isomorphic_pairs():
    for seed in range(10):
        pair = gen_isomorphic_pair(7, 0.5, seed)
        res = run_decision_protocol(pair.gu, pair.gk, NetworkConfig(seed=seed))
        assert res.verdict == "accept"
        assert set(res.transcript.outputs.values()) == {"accept"}


def test_protocol_rejects_k7_vs_k7_minus_edge():
    k7 = complete(7)
    k7m = Graph(7, sorted(k7.edges - {(0, 1)}))
    for seed in range(10):
        res = run_decision_protocol(k7, k7m, NetworkConfig(seed=seed))
        assert res.verdict == "reject"


def test_protocol_rejects_lb_gadget():
    x = [[1, 0], [0, 1]]
    y = [[1, 1], [0, 1]]
    gu, gk = gen_decision_lb(x, y)
    res = run_decision_protocol(gu, gk, NetworkConfig(seed=4))
    assert res.verdict == "reject"
    gu2, gk2 = gen_decision_lb(x, x)
    res = run_decision_protocol(gu2, gk2, NetworkConfig(seed=4))
    assert res.verdict == "accept"


def test_rounds_only_mode_skips_and_broadcasts():
    g = gnp_connected(8, 0.5, derive_rng(0, "ro"))
    res = run_decision_protocol(g, None, NetworkConfig(seed=1), rounds_only=True)
    assert res.verdict == "skipped"
    assert set(res.transcript.outputs.values()) == {"skipped"}


def test_round_bound_scaling():
    for n in (8, 16, 32):
        for seed in range(3):
            g = gen_isomorphic_pair(n, 0.6, seed).gu
            res = run_decision_protocol(g, None, NetworkConfig(seed=seed), rounds_only=True)
            assert res.transcript.rounds <= 3 * n + 10, (n, seed, res.transcript.rounds)
