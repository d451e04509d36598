"""Synchronous message-passing simulator with per-edge bandwidth accounting.

Execution model
---------------
Node programs are generators.  Each `yield` ends the node's current round;
the simulator resumes every unfinished node once per round, in ascending id
order, with inboxes frozen to whatever was sent in the previous round.  A
program finishes by returning, and its return value becomes the node's
recorded output.  The run ends when every node has returned.

A node observes only: its id, its degree and port list, its inbox, its
private random stream, and whatever input object the caller injected for it.
Ports are opaque handles 0..deg-1 in an arbitrary but fixed order; neighbor
ids are never exposed directly.

Every send is charged against the per-directed-edge per-round bit budget.
Exceeding it raises `BandwidthViolation` naming the round, edge and size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Generator, List, Optional, Tuple

from .graphs import Graph, GraphError
from .rng import derive_rng

UNBOUNDED = math.inf  # bandwidth sentinel: no per-edge limit


class SimError(RuntimeError):
    pass


class BandwidthViolation(SimError):
    def __init__(self, round_no: int, src: int, dst: int, bits: int, limit: float):
        self.round_no = round_no
        self.src = src
        self.dst = dst
        self.bits = bits
        super().__init__(
            f"bandwidth violation in round {round_no} on edge "
            f"{src}->{dst}: {bits} bits > limit {limit}"
        )


class RoundLimitExceeded(SimError):
    pass


def default_bandwidth(n: int) -> int:
    """Per-edge per-round budget: a small constant times the id width."""
    return max(32, 4 * math.ceil(math.log2(max(n, 2))))


@dataclass
class NetworkConfig:
    """Run parameters.  bandwidth_bits=None picks the size-derived default;
    UNBOUNDED disables the limit entirely."""

    bandwidth_bits: Optional[float] = None
    max_rounds: int = 100_000
    seed: int = 0

    def effective_bandwidth(self, n: int) -> float:
        if self.bandwidth_bits is None:
            return default_bandwidth(n)
        if self.bandwidth_bits is not UNBOUNDED:
            floor = math.ceil(math.log2(n + 1))
            if self.bandwidth_bits < floor:
                raise SimError(
                    f"bandwidth {self.bandwidth_bits} below the "
                    f"{floor}-bit minimum for n={n}"
                )
        return self.bandwidth_bits


class NodeContext:
    """Per-node view of the network handed to node programs."""

    __slots__ = ("node", "degree", "ports", "inbox", "rng", "input", "_net", "scratch")

    def __init__(self, node: int, degree: int, rng, inp: Any, net: "_Network"):
        self.node = node
        self.degree = degree
        self.ports = tuple(range(degree))
        self.inbox: Dict[int, str] = {}
        self.rng = rng
        self.input = inp
        self._net = net
        self.scratch: Dict[str, Any] = {}

    def send(self, port: int, payload: str) -> None:
        self._net.queue_send(self.node, port, payload)

    def shared_rng(self, *tags: object):
        """Stream keyed by the run seed plus tags.  Use only for draws no
        other node performs, so the model's private-randomness reading
        stays intact (it exists so tests can replay a node's choices)."""
        return self._net.derive(*tags)


@dataclass
class Transcript:
    """What a run did: rounds, per-event bit counts, per-node outputs."""

    rounds: int
    total_bits: int
    max_edge_bits: int
    outputs: Dict[int, Any]
    events: List[Tuple[int, int, int, int]] = field(repr=False, default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "rounds": self.rounds,
                "total_bits": self.total_bits,
                "max_edge_bits": self.max_edge_bits,
                "outputs": [
                    {"node": v, "verdict": _jsonable(out)}
                    for v, out in sorted(self.outputs.items())
                ],
            },
            sort_keys=True,
        )

    def events_csv(self) -> str:
        lines = ["round,src,dst,bits"]
        lines.extend(f"{r},{s},{d},{b}" for r, s, d, b in self.events)
        return "\n".join(lines) + "\n"


def _jsonable(out: Any) -> Any:
    if isinstance(out, (str, int, float, bool)) or out is None:
        return out
    if isinstance(out, (tuple, list)):
        return list(out)
    return repr(out)


NodeProgram = Callable[[NodeContext], Generator[None, None, Any]]


class _Network:
    def __init__(self, topology: Graph, cfg: NetworkConfig):
        self.topology = topology
        self.cfg = cfg
        self.bandwidth = cfg.effective_bandwidth(topology.n)
        # port p of node v talks to its p-th smallest neighbor
        self.port_to_nbr = [list(topology.neighbors(v)) for v in range(topology.n)]
        self.nbr_to_port = [
            {w: p for p, w in enumerate(ports)} for ports in self.port_to_nbr
        ]
        self.round_no = 0
        self.pending: Dict[Tuple[int, int], List[str]] = {}
        self.events: List[Tuple[int, int, int, int]] = []
        self.total_bits = 0
        self.max_edge_bits = 0

    def derive(self, *tags: object):
        return derive_rng(self.cfg.seed, *tags)

    def queue_send(self, src: int, port: int, payload: str) -> None:
        if not 0 <= port < len(self.port_to_nbr[src]):
            raise SimError(f"node {src} has no port {port}")
        if any(ch not in "01" for ch in payload):
            raise SimError("payloads must be '0'/'1' strings")
        dst = self.port_to_nbr[src][port]
        key = (src, dst)
        if key in self.pending:
            # receivers treat a round's delivery as one message, so a second
            # send on the same directed edge in one round is a protocol bug
            raise SimError(
                f"round {self.round_no}: node {src} sent twice on edge to {dst}"
            )
        self.pending[key] = [payload]
        if len(payload) > self.bandwidth:
            raise BandwidthViolation(
                self.round_no, src, dst, len(payload), self.bandwidth
            )


def run(
    topology: Graph,
    program: NodeProgram,
    cfg: NetworkConfig,
    inputs: Optional[Dict[int, Any]] = None,
) -> Transcript:
    """Execute one protocol run over the given topology."""
    n = topology.n
    if n == 0:
        raise GraphError("empty topology")
    net = _Network(topology, cfg)
    contexts = [
        NodeContext(v, topology.degree(v), derive_rng(cfg.seed, "node", v),
                    (inputs or {}).get(v), net)
        for v in range(n)
    ]
    gens = {v: program(contexts[v]) for v in range(n)}
    outputs: Dict[int, Any] = {}

    while gens:
        net.round_no += 1
        if net.round_no > cfg.max_rounds:
            raise RoundLimitExceeded(
                f"protocol did not finish within {cfg.max_rounds} rounds"
            )
        # deliver last round's sends
        delivery = net.pending
        net.pending = {}
        for ctx in contexts:
            ctx.inbox = {}
        for (src, dst), payloads in delivery.items():
            bits = sum(len(p) for p in payloads)
            net.events.append((net.round_no - 1, src, dst, bits))
            net.total_bits += bits
            net.max_edge_bits = max(net.max_edge_bits, bits)
            port = net.nbr_to_port[dst][src]
            if dst in gens:
                contexts[dst].inbox[port] = "".join(payloads)
        # resume unfinished nodes in id order
        for v in sorted(gens):
            try:
                next(gens[v])
            except StopIteration as stop:
                outputs[v] = stop.value
                del gens[v]

    # flush bit accounting for sends made in the final round
    for (src, dst), payloads in net.pending.items():
        bits = sum(len(p) for p in payloads)
        net.events.append((net.round_no, src, dst, bits))
        net.total_bits += bits
        net.max_edge_bits = max(net.max_edge_bits, bits)

    net.events.sort()
    return Transcript(
        rounds=net.round_no,
        total_bits=net.total_bits,
        max_edge_bits=net.max_edge_bits,
        outputs=outputs,
        events=net.events,
    )
