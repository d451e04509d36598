"""Running query-based testers over the live network.

A tester plugin sees only (n, its random stream, answers); the wrappers
either relay one query at a time through the tree (adaptive, two tree
traversals per query) or flood the whole upfront query list and stream the
answers back (non-adaptive).  Verdicts are identical to running the plugin
against the materialized graph, by construction: same stream, same answers.

Queries: ("adj", u, v) -> bit; ("inc", u, port) -> neighbor id or None;
("deg", u) -> int.  Node u answers; a one-round neighbor-id exchange at the
start gives it what it needs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, Generator, List, Optional, Sequence, Tuple

from .bits import bit_width, bits_to_uint, uint_to_bits
from .graphs import Graph, GraphError
from .protocols import (
    FRAME_OVERHEAD,
    TAG_ANSWER,
    TAG_EXCHANGE,
    TAG_QUERY,
    TAG_VERDICT,
    Mailbox,
    ItemAssembler,
    bfs_tree_centrally,
    body_capacity,
    item_frames,
    send_frame,
    tick,
    tree_depth,
)
from .rng import derive_rng
from .sim import NetworkConfig, Transcript, run

Query = Tuple[str, int, int]


class QueryOracle:
    """Counts every query exactly once; subclasses answer them."""

    def __init__(self) -> None:
        self.count = 0

    def adjacency(self, u: int, v: int) -> bool:
        self.count += 1
        return self._adjacency(u, v)

    def incidence(self, u: int, port: int) -> Optional[int]:
        self.count += 1
        return self._incidence(u, port)

    def degree(self, u: int) -> int:
        self.count += 1
        return self._degree(u)

    def ask(self, q: Query):
        kind, a, b = q
        if kind == "adj":
            return self.adjacency(a, b)
        if kind == "inc":
            return self.incidence(a, b)
        if kind == "deg":
            return self.degree(a)
        raise GraphError(f"unknown query kind {kind!r}")


class GraphOracle(QueryOracle):
    def __init__(self, g: Graph):
        super().__init__()
        self.g = g

    def _adjacency(self, u: int, v: int) -> bool:
        return self.g.adj(u, v)

    def _incidence(self, u: int, port: int) -> Optional[int]:
        nbrs = self.g.neighbors(u)
        return nbrs[port] if port < len(nbrs) else None

    def _degree(self, u: int) -> int:
        return self.g.degree(u)


class DensityTester:
    """Reference non-adaptive plugin: sample q potential edges, accept iff
    the hit fraction reaches the threshold."""

    def __init__(self, q: int = 30, threshold: float = 0.25):
        self.q = q
        self.threshold = threshold

    def queries(self, n: int, rng: random.Random) -> List[Query]:
        out = []
        for _ in range(self.q):
            u = rng.randrange(n)
            v = rng.randrange(n - 1)
            if v >= u:
                v += 1
            out.append(("adj", u, v))
        return out

    def decide(self, n: int, rng: random.Random, answers: Sequence[int]) -> bool:
        hits = sum(1 for a in answers if a)
        return hits >= self.threshold * len(answers)


class NeighborhoodProbeTester:
    """Reference adaptive plugin: walk a few random incidences, then check
    the adjacency closing each wedge; accepts if enough wedges close."""

    def __init__(self, probes: int = 8, threshold: float = 0.2):
        self.probes = probes
        self.threshold = threshold

    def start(self, n: int, rng: random.Random) -> Generator[Query, int, bool]:
        closed = 0
        valid = 0
        for _ in range(self.probes):
            u = rng.randrange(n)
            deg = yield ("deg", u, 0)
            if deg < 2:
                continue
            p1 = rng.randrange(deg)
            p2 = rng.randrange(deg - 1)
            if p2 >= p1:
                p2 += 1
            a = yield ("inc", u, p1)
            b = yield ("inc", u, p2)
            valid += 1
            bit = yield ("adj", a, b)
            if bit:
                closed += 1
        return valid > 0 and closed >= self.threshold * valid


def run_centralized_nonadaptive(tester, g: Graph, seed: int) -> Tuple[bool, int]:
    oracle = GraphOracle(g)
    queries = tester.queries(g.n, derive_rng(seed, "tester", "q"))
    answers = [oracle.ask(q) for q in queries]
    verdict = tester.decide(g.n, derive_rng(seed, "tester", "d"), answers)
    return verdict, oracle.count


def run_centralized_adaptive(tester, g: Graph, seed: int) -> Tuple[bool, int]:
    oracle = GraphOracle(g)
    gen = tester.start(g.n, derive_rng(seed, "tester", "q"))
    try:
        q = next(gen)
        while True:
            q = gen.send(oracle.ask(q))
    except StopIteration as stop:
        return bool(stop.value), oracle.count


def _encode_query(q: Query, w: int) -> str:
    kind, a, b = q
    code = {"adj": 0, "inc": 1, "deg": 2}[kind]
    return uint_to_bits(code, 2) + uint_to_bits(a, w) + uint_to_bits(b, w)


def _decode_query(bits: str, w: int) -> Query:
    kind = ["adj", "inc", "deg"][bits_to_uint(bits[:2])]
    return (kind, bits_to_uint(bits[2 : 2 + w]), bits_to_uint(bits[2 + w :]))


def _answer_bits(q: Query, nbr_ids: Dict[int, int], degree: int, w: int) -> str:
    kind, _a, b = q
    if kind == "adj":
        return uint_to_bits(int(b in nbr_ids.values()), w + 1)
    if kind == "inc":
        return uint_to_bits(nbr_ids.get(b, 2**w), w + 1)  # sentinel: none
    return uint_to_bits(degree, w + 1)


def _decode_answer(q: Query, bits: str, w: int):
    val = bits_to_uint(bits)
    if q[0] == "adj":
        return bool(val)
    if q[0] == "inc":
        return None if val == 2**w else val
    return val


@dataclass
class CentralSimResult:
    verdict: bool
    queries: int
    transcript: Transcript


def _id_exchange(ctx, mb, w):
    got = {}
    for port in ctx.ports:
        send_frame(ctx, port, TAG_EXCHANGE, False, uint_to_bits(ctx.node, w))
    yield from tick(mb)
    while len(got) < ctx.degree:
        for port, _m, body in mb.drain(TAG_EXCHANGE):
            got[port] = bits_to_uint(body)
        if len(got) < ctx.degree:
            yield from tick(mb)
    return got


def run_adaptive(
    tester, topology: Graph, cfg: NetworkConfig, root: int = 0
) -> CentralSimResult:
    """One query at a time: flood the query down the tree, the target
    answers, the answer climbs back; then the verdict floods down."""
    n = topology.n
    w = bit_width(n)
    states = bfs_tree_centrally(topology, root)

    def program(ctx):
        mb = Mailbox(ctx)
        bfs = ctx.input["bfs"]
        nbr_ids = yield from _id_exchange(ctx, mb, w)
        if bfs.root:
            gen = tester.start(n, ctx.shared_rng("tester", "q"))
            queries = 0
            try:
                q = next(gen)
                while True:
                    queries += 1
                    if q[1] == ctx.node:
                        ans = _answer_bits(q, nbr_ids, ctx.degree, w)
                    else:
                        for port in bfs.children:
                            send_frame(ctx, port, TAG_QUERY, False, _encode_query(q, w))
                        while True:
                            yield from tick(mb)
                            frames = mb.drain(TAG_ANSWER)
                            if frames:
                                ans = frames[0][2]
                                break
                    q = gen.send(_decode_answer(q, ans, w))
            except StopIteration as stop:
                verdict = bool(stop.value)
            for port in bfs.children:
                send_frame(ctx, port, TAG_VERDICT, False, uint_to_bits(int(verdict), 2))
            return (verdict, queries)
        while True:
            yield from tick(mb)
            for _p, _m, body in mb.drain(TAG_QUERY):
                q = _decode_query(body, w)
                for port in bfs.children:
                    send_frame(ctx, port, TAG_QUERY, False, body)
                if q[1] == ctx.node:
                    send_frame(
                        ctx, bfs.parent_port, TAG_ANSWER, False,
                        _answer_bits(q, nbr_ids, ctx.degree, w),
                    )
            for _p, _m, body in mb.drain(TAG_ANSWER):
                send_frame(ctx, bfs.parent_port, TAG_ANSWER, False, body)
            frames = mb.drain(TAG_VERDICT)
            if frames:
                body = frames[0][2]
                for port in bfs.children:
                    send_frame(ctx, port, TAG_VERDICT, False, body)
                return (bool(bits_to_uint(body)), None)

    inputs = {v: {"n": n, "root": root, "bfs": states[v]} for v in range(n)}
    tr = run(topology, program, cfg, inputs)
    verdict, queries = tr.outputs[root]
    tr.outputs = {v: out[0] for v, out in tr.outputs.items()}
    return CentralSimResult(verdict, queries, tr)


def run_nonadaptive(
    tester, topology: Graph, cfg: NetworkConfig, root: int = 0
) -> CentralSimResult:
    """The whole query list floods down; answers stream back as each query
    arrives at its target, overlapping the flood."""
    n = topology.n
    w = bit_width(n)
    states = bfs_tree_centrally(topology, root)
    cap = body_capacity(cfg.effective_bandwidth(n))
    qbits = 2 + 2 * w

    def program(ctx):
        mb = Mailbox(ctx)
        bfs = ctx.input["bfs"]
        nbr_ids = yield from _id_exchange(ctx, mb, w)
        queries = tester.queries(n, ctx.shared_rng("tester", "q")) if bfs.root else None

        if bfs.root:
            expected = len(queries)
            w_qi = bit_width(max(expected, 2))
            out = [uint_to_bits(len(queries), 16)]
            out.extend(_encode_query(q, w) for q in queries)
            answers: Dict[int, str] = {}
            sent = 0
            asm = ItemAssembler()
            for qi, q in enumerate(queries):
                if q[1] == ctx.node:
                    answers[qi] = _answer_bits(q, nbr_ids, ctx.degree, w)
            while len(answers) < expected or sent < len(out):
                if sent < len(out):
                    for port in bfs.children:
                        send_frame(ctx, port, TAG_QUERY, False, out[sent])
                    sent += 1
                yield from tick(mb)
                for _p, payload in asm.feed(mb.drain(TAG_ANSWER)):
                    answers[bits_to_uint(payload[:w_qi])] = payload[w_qi:]
            verdict = tester.decide(
                n, ctx.shared_rng("tester", "d"),
                [
                    _decode_answer(queries[qi], answers[qi], w)
                    for qi in range(expected)
                ],
            )
            for port in bfs.children:
                send_frame(ctx, port, TAG_VERDICT, False, uint_to_bits(int(verdict), 2))
            return (verdict, expected)

        expected = None
        got = 0
        w_qi = None
        outq: List[str] = []
        while True:
            frames = mb.drain(TAG_VERDICT)
            if frames:
                body = frames[0][2]
                for port in bfs.children:
                    send_frame(ctx, port, TAG_VERDICT, False, body)
                return (bool(bits_to_uint(body)), None)
            if outq:
                send_frame(ctx, bfs.parent_port, TAG_ANSWER, False, outq.pop(0))
            yield from tick(mb)
            for _p, _m, body in mb.drain(TAG_QUERY):
                for port in bfs.children:
                    send_frame(ctx, port, TAG_QUERY, False, body)
                if expected is None:
                    expected = bits_to_uint(body)
                    w_qi = bit_width(max(expected, 2))
                else:
                    got += 1
                    q = _decode_query(body, w)
                    if q[1] == ctx.node:
                        outq.append(
                            uint_to_bits(got - 1, w_qi)
                            + _answer_bits(q, nbr_ids, ctx.degree, w)
                        )
            for _p, _m, body in mb.drain(TAG_ANSWER):
                outq.append(body)

    if qbits > cap:
        raise GraphError("query encoding exceeds one frame; larger bandwidth needed")
    inputs = {v: {"n": n, "root": root, "bfs": states[v]} for v in range(n)}
    tr = run(topology, program, cfg, inputs)
    verdict, queries = tr.outputs[root]
    tr.outputs = {v: out[0] for v, out in tr.outputs.items()}
    return CentralSimResult(verdict, queries, tr)
