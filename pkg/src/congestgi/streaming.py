"""One-pass isomorphism decision over an edge stream.

Reuses the modular fingerprint core: each arriving edge adds 2^(pair rank)
to every residue.  State is metered in bits and must stay within
64 * n * ceil(log2 n) at all times; the reference graph is read-only and not
charged, per the model.  The final decision walks the reference graph's
numberings in lexicographic order, holding one at a time.
"""

from __future__ import annotations

import math
from itertools import permutations
from typing import Dict, Iterable, Optional, Tuple

from .bits import bit_width
from .decision import DECIDE_CAP, Fingerprint, default_prime_count, pair_rank, sample_primes
from .graphs import Graph, GraphError
from .oracles import OracleRefusal

SPACE_FACTOR = 64


class SpaceBudgetExceeded(RuntimeError):
    pass


class StreamState:
    """Running residues plus the id-normalization table and a space meter.

    The meter charges algorithm state only: primes, residues, the rename
    table, loop counters, and (during the decision) the current numbering.
    The duplicate-edge guard is a validation aid living outside the space
    model; disable it with check_duplicates=False for pure runs.
    """

    def __init__(
        self,
        n: int,
        primes: Iterable[int],
        check_duplicates: bool = True,
    ):
        self.n = n
        self.primes = tuple(primes)
        self.residues = [0] * len(self.primes)
        self.rename: Dict[int, int] = {}
        self.edges_seen = 0
        self._check_duplicates = check_duplicates
        self._seen: set = set()
        self._w = bit_width(n * n) if n > 1 else 1
        self._idw = bit_width(max(n, 2))
        self.peak_bits = 0
        self._extra_bits = 0
        self._meter()

    @property
    def space_bits(self) -> int:
        k = len(self.primes)
        base = (
            2 * k * self._w  # primes and residues
            + len(self.rename) * 2 * self._idw  # rename table entries
            + 64  # counters
        )
        return base + self._extra_bits

    def _meter(self) -> None:
        bits = self.space_bits
        if bits > self.peak_bits:
            self.peak_bits = bits
        budget = SPACE_FACTOR * self.n * max(1, math.ceil(math.log2(max(self.n, 2))))
        if bits > budget:
            raise SpaceBudgetExceeded(
                f"state uses {bits} bits, budget {budget} (n={self.n})"
            )

    def _rename(self, ext: int) -> int:
        """In-range ids keep their value (stream order then cannot influence
        the residues); ids outside [0, n) take free slots from the top."""
        if ext in self.rename:
            return self.rename[ext]
        if len(self.rename) >= self.n:
            raise GraphError(
                f"unknown id {ext}: rename table already holds {self.n} nodes"
            )
        if 0 <= ext < self.n:
            if ext in self.rename.values():
                raise GraphError(f"id {ext}: slot already taken by a renamed node")
            idx = ext
        else:
            used = set(self.rename.values())
            idx = next(i for i in range(self.n - 1, -1, -1) if i not in used)
        self.rename[ext] = idx
        return idx

    def update(self, u: int, v: int) -> None:
        """Fold one edge into the residues."""
        if u == v:
            raise GraphError(f"self-loop at {u}")
        i, j = self._rename(u), self._rename(v)
        if i > j:
            i, j = j, i
        if self._check_duplicates:
            if (i, j) in self._seen:
                raise GraphError(f"duplicate edge ({u}, {v})")
            self._seen.add((i, j))
        e = pair_rank(i, j, self.n)
        for t, p in enumerate(self.primes):
            self.residues[t] = (self.residues[t] + pow(2, e, p)) % p
        self.edges_seen += 1
        self._meter()

    def fingerprint(self) -> Fingerprint:
        return Fingerprint(self.primes, tuple(self.residues))

    def decide(self, gk: Graph, cap: int = DECIDE_CAP) -> bool:
        """Accept iff some numbering of gk reproduces the residues, walking
        numberings in lexicographic order with only the current one held."""
        if gk.n != self.n:
            raise GraphError(f"size mismatch: stream {self.n}, known {gk.n}")
        if self.n > cap:
            raise OracleRefusal(f"n={self.n} exceeds the enumeration cap {cap}")
        k = len(self.primes)
        edges = sorted(gk.edges)
        npairs = self.n * (self.n - 1) // 2
        # power table for the first prime only; later primes are recomputed
        # on the fly for the few numberings that survive it
        table = (
            [pow(2, e, self.primes[0]) for e in range(npairs)] if k else []
        )
        self._extra_bits = (
            self.n * self._idw + self._w + npairs * self._w
        )  # current numbering + scratch residue + first-prime table
        self._meter()
        try:
            for perm in permutations(range(self.n)):
                ranks = []
                for a, b in edges:
                    i, j = perm[a], perm[b]
                    if i > j:
                        i, j = j, i
                    ranks.append(pair_rank(i, j, self.n))
                if k:
                    first = sum(table[e] for e in ranks) % self.primes[0]
                    if first != self.residues[0]:
                        continue
                ok = True
                for t in range(1, k):
                    p = self.primes[t]
                    r = sum(pow(2, e, p) for e in ranks) % p
                    if r != self.residues[t]:
                        ok = False
                        break
                if ok:
                    return True
            return False
        finally:
            self._extra_bits = 0


def stream_state(n: int, seed_value: int, k: Optional[int] = None) -> StreamState:
    """Fresh state with k primes expanded from the seed (k defaults to 2n)."""
    if k is None:
        k = default_prime_count(n)
    return StreamState(n, sample_primes(seed_value, k, n))


def stream_decide(
    gk: Graph,
    edges: Iterable[Tuple[int, int]],
    seed_value: int,
    k: Optional[int] = None,
) -> Tuple[bool, StreamState]:
    """One-pass run: fold the whole stream, then decide against gk."""
    st = stream_state(gk.n, seed_value, k)
    for u, v in edges:
        st.update(u, v)
    return st.decide(gk), st
