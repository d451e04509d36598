"""Exact isomorphism decision via modular adjacency fingerprints.

The adjacency matrix of the live network, under a distributedly assigned
numbering, is read as one huge integer: bit ℓ(i,j) is set iff the pair
(i, j), i < j, is an edge, where ℓ orders pairs by first then second
element.  The network never materializes that integer; it sums the edge
contributions 2^ℓ(i,j) modulo each of k random primes up the tree, pipelined,
so the root ends up with a residue vector.  The root then searches for a
numbering of the reference graph with the same residues; matching graphs
always match, distinct graphs collide with vanishing probability.

Root-side search: n <= 9 walks all n! numberings (`decide_isomorphism`); for
larger n the residues pin down the adjacency integer exactly whenever the
primes' product exceeds 2^(n(n-1)/2), so the root reconstructs the matrix by
remaindering and runs the backtracking search (`decide_by_reconstruction`).
Both paths compute the same accept/reject function.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from typing import Dict, List, Optional, Sequence, Tuple

from .bits import bit_width, bits_to_uint, uint_to_bits
from .graphs import Graph, GraphError
from .labels import Bijection
from .oracles import OracleRefusal, backtracking_iso
from .protocols import (
    TAG_BCAST,
    TAG_EXCHANGE,
    TAG_VERDICT,
    Mailbox,
    ProtocolError,
    assign_intervals,
    bfs_join,
    body_capacity,
    broadcast_payload,
    census,
    converge_vector_sum,
    exchange_with_neighbors,
)
from .sim import NetworkConfig, Transcript, run

DECIDE_CAP = 9


def pair_rank(i: int, j: int, n: int) -> int:
    """Position of the pair (i, j), i < j, in the order sorted by first then
    second element; 0-indexed, so the first pair contributes 2^0."""
    if not 0 <= i < j < n:
        raise GraphError(f"bad pair ({i}, {j}) for n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@lru_cache(maxsize=None)
def nth_primes(count: int) -> Tuple[int, ...]:
    """The first `count` primes, by sieve."""
    if count < 1:
        raise GraphError("count must be >= 1")
    limit = 15
    if count >= 6:
        limit = int(count * (math.log(count) + math.log(math.log(count)))) + 10
    while True:
        sieve = bytearray([1]) * (limit + 1)
        sieve[0] = sieve[1] = 0
        for p in range(2, int(limit**0.5) + 1):
            if sieve[p]:
                sieve[p * p :: p] = bytearray(len(sieve[p * p :: p]))
        primes = [i for i, flag in enumerate(sieve) if flag]
        if len(primes) >= count:
            return tuple(primes[:count])
        limit *= 2


def sample_primes(seed_value: int, k: int, n: int) -> Tuple[int, ...]:
    """k primes drawn with replacement from the first n^2 primes; every node
    expands the same seed to the same multiset."""
    pool = nth_primes(n * n)
    rng = random.Random(seed_value)
    return tuple(pool[rng.randrange(len(pool))] for _ in range(k))


@dataclass(frozen=True)
class Fingerprint:
    primes: Tuple[int, ...]
    residues: Tuple[int, ...]

    def to_json(self) -> str:
        return json.dumps(
            {"primes": list(self.primes), "residues": list(self.residues)},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Fingerprint":
        data = json.loads(text)
        return cls(tuple(data["primes"]), tuple(data["residues"]))


def fingerprint_local(
    g: Graph, numbering: Sequence[int], primes: Sequence[int]
) -> Fingerprint:
    """Residue vector of the adjacency integer under the given numbering,
    via modular exponentiation edge by edge."""
    n = g.n
    residues = [0] * len(primes)
    for u, v in g.edges:
        i, j = numbering[u], numbering[v]
        if i > j:
            i, j = j, i
        e = pair_rank(i, j, n)
        for t, p in enumerate(primes):
            residues[t] = (residues[t] + pow(2, e, p)) % p
    return Fingerprint(tuple(primes), tuple(residues))


def exact_encoding(g: Graph, numbering: Sequence[int]) -> int:
    """The adjacency integer itself (big int); test oracle only."""
    n = g.n
    total = 0
    for u, v in g.edges:
        i, j = numbering[u], numbering[v]
        if i > j:
            i, j = j, i
        total += 1 << pair_rank(i, j, n)
    return total


def decide_isomorphism(gk: Graph, fp: Fingerprint, cap: int = DECIDE_CAP) -> bool:
    """Accept iff some numbering of gk reproduces the residue vector.
    Exhaustive over all n! numberings; refuses above the cap."""
    n = gk.n
    if n > cap:
        raise OracleRefusal(
            f"n={n} exceeds the numbering-enumeration cap {cap}"
        )
    k = len(fp.primes)
    npairs = n * (n - 1) // 2
    pow2 = [[pow(2, e, p) for e in range(npairs)] for p in fp.primes]
    edges = list(gk.edges)
    for perm in permutations(range(n)):
        ranks = []
        for u, v in edges:
            i, j = perm[u], perm[v]
            if i > j:
                i, j = j, i
            ranks.append(pair_rank(i, j, n))
        if k:
            first = sum(pow2[0][e] for e in ranks) % fp.primes[0]
            if first != fp.residues[0]:
                continue
        ok = True
        for t in range(1, k):
            r = sum(pow2[t][e] for e in ranks) % fp.primes[t]
            if r != fp.residues[t]:
                ok = False
                break
        if ok:
            return True
    return False


def decide_by_reconstruction(gk: Graph, fp: Fingerprint) -> bool:
    """Same accept/reject function for large n: remainder the residues back
    into the adjacency integer (valid when the distinct primes' product
    exceeds every possible encoding) and run the backtracking search."""
    n = gk.n
    npairs = n * (n - 1) // 2
    seen: Dict[int, int] = {}
    for p, r in zip(fp.primes, fp.residues):
        if p in seen and seen[p] != r:
            return False  # same prime, conflicting residues: no encoding fits
        seen[p] = r
    modulus = 1
    for p in seen:
        modulus *= p
    if modulus <= (1 << npairs):
        raise ProtocolError(
            "sampled primes cannot pin down the adjacency encoding at this size"
        )
    x = 0
    for p, r in seen.items():
        q = modulus // p
        x = (x + r * q * pow(q, -1, p)) % modulus
    if x >= (1 << npairs):
        return False  # no graph encodes to this value
    edges = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if (x >> pair_rank(i, j, n)) & 1
    ]
    return backtracking_iso(Graph(n, edges), gk) is not None


def decide(gk: Graph, fp: Fingerprint, cap: int = DECIDE_CAP) -> bool:
    if gk.n <= cap:
        return decide_isomorphism(gk, fp, cap)
    return decide_by_reconstruction(gk, fp)


@dataclass
class DecisionResult:
    verdict: Optional[str]
    fingerprint: Fingerprint
    numbering: Tuple[int, ...]
    transcript: Transcript


def default_prime_count(n: int) -> int:
    return math.ceil(2 * n)


def run_decision_protocol(
    topology: Graph,
    gk: Optional[Graph],
    cfg: NetworkConfig,
    k: Optional[int] = None,
    rounds_only: bool = False,
) -> DecisionResult:
    """End-to-end distributed run: tree + numbering + prime seed broadcast +
    pipelined residue aggregation + root decision + verdict broadcast.

    With rounds_only the root skips the decision and broadcasts "skipped";
    everything on the wire is identical.  gk may then be None.
    """
    n = topology.n
    if k is None:
        k = default_prime_count(n)
    if not rounds_only:
        if gk is None:
            raise GraphError("known graph required unless rounds_only")
        if gk.n != n:
            raise GraphError(f"size mismatch: network {n}, known {gk.n}")
    bandwidth = cfg.effective_bandwidth(n)
    cap = body_capacity(bandwidth)
    w_num = bit_width(n)
    verdict_names = {0: "reject", 1: "accept", 2: "skipped"}

    def program(ctx):
        mb = Mailbox(ctx)
        n_ = ctx.input["n"]
        bfs = yield from bfs_join(ctx, mb)
        cres = yield from census(ctx, mb, bfs, True, n_)
        idx = yield from assign_intervals(ctx, mb, bfs, cres, True, n_)
        nbr_idx = yield from exchange_with_neighbors(
            ctx, mb, uint_to_bits(idx, w_num), cap, TAG_EXCHANGE
        )
        if bfs.root:
            seed_value = ctx.rng.getrandbits(48)
            payload = uint_to_bits(k, 16) + uint_to_bits(seed_value, 48)
        else:
            payload = None
        payload = yield from broadcast_payload(ctx, mb, bfs, payload, cap, TAG_BCAST)
        k_ = bits_to_uint(payload[:16])
        seed_value = bits_to_uint(payload[16:])
        primes = sample_primes(seed_value, k_, n_)
        # contribution: the lower-numbered endpoint owns each incident pair
        contrib = [0] * k_
        for port, nbr_bits in nbr_idx.items():
            other = bits_to_uint(nbr_bits)
            if idx < other:
                e = pair_rank(idx, other, n_)
                for t, p in enumerate(primes):
                    contrib[t] = (contrib[t] + pow(2, e, p)) % p
        residues = yield from converge_vector_sum(
            ctx, mb, bfs, contrib, primes, cap
        )
        if bfs.root:
            fp = Fingerprint(primes, tuple(residues))
            if rounds_only:
                code = 2
            else:
                code = 1 if decide(gk, fp) else 0
            vbits = yield from broadcast_payload(
                ctx, mb, bfs, uint_to_bits(code, 2), cap, TAG_VERDICT
            )
            return (verdict_names[code], idx, fp)
        vbits = yield from broadcast_payload(ctx, mb, bfs, None, cap, TAG_VERDICT)
        return (verdict_names[bits_to_uint(vbits)], idx, None)

    root = 0
    inputs = {v: {"n": n, "root": root} for v in range(n)}
    tr = run(topology, program, cfg, inputs)
    verdict, _idx, fp = tr.outputs[root]
    numbering = [0] * n
    for v, (_verd, idx, _fp) in tr.outputs.items():
        numbering[v] = idx
    tr.outputs = {v: out[0] for v, out in tr.outputs.items()}
    return DecisionResult(verdict, fp, tuple(numbering), tr)
