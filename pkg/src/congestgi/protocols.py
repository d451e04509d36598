"""Reusable distributed building blocks.

Everything here is written as generator subprotocols: a node program drives
them with `yield from`, one `yield` per round.  Frames on the wire are
tag(5 bits) + more(1 bit) + body; the mailbox routes incoming frames by tag
so that phases can overlap in the network while each node executes them
strictly one at a time.

Frames are not self-delimiting, so a node sends at most one frame per
directed edge per round (the simulator rejects a second send).  Subprotocols
keep that invariant by ticking once after a trailing send before returning,
and by checking their stop condition before sending.

Multi-frame payloads use the more-bit; `ItemAssembler` puts them back
together per port.  Phases synchronize in one of four ways: hearing from
every port, blocking on a known port, collecting a known item count at the
root, or a counted broadcast flood.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, Generator, Iterable, List, Optional, Sequence, Tuple

from .bits import bit_width, bits_to_uint, fragment, uint_to_bits
from .graphs import Graph
from .sim import NodeContext, SimError

TAG_WIDTH = 5
FRAME_OVERHEAD = TAG_WIDTH + 1

# tag allocation, package-wide
TAG_BFS = 0
TAG_CENSUS = 1
TAG_INTERVAL = 2
TAG_SUM = 3
TAG_VEC = 4
TAG_ELECT = 5
TAG_ELECT_CTL = 6
TAG_BCAST = 7
TAG_BCAST2 = 8
TAG_ITEMS = 9
TAG_ITEMS2 = 10
TAG_VERDICT = 11
TAG_EXCHANGE = 12
TAG_ANNOUNCE = 13
TAG_PLAN = 14
TAG_GMAP = 15
TAG_DONE = 16
TAG_SUM2 = 17
TAG_INTERVAL2 = 18
TAG_CENSUS2 = 19
TAG_ANNOUNCE2 = 20
TAG_QUERY = 21
TAG_ANSWER = 22
TAG_BCAST3 = 23


class ProtocolError(SimError):
    pass


def body_capacity(bandwidth: float) -> int:
    if math.isinf(bandwidth):
        return 1 << 20
    cap = int(bandwidth) - FRAME_OVERHEAD
    if cap <= 0:
        raise ProtocolError(f"bandwidth {bandwidth} too small for framing")
    return cap


def send_frame(ctx: NodeContext, port: int, tag: int, more: bool, body: str) -> None:
    ctx.send(port, uint_to_bits(tag, TAG_WIDTH) + ("1" if more else "0") + body)


class Mailbox:
    """Routes incoming frames by tag.  `round` mirrors the simulator's
    1-based round counter as long as `tick` is used for every yield."""

    def __init__(self, ctx: NodeContext):
        self.ctx = ctx
        self.round = 1
        self.queues: Dict[int, deque] = {}

    def collect(self) -> None:
        for port, raw in self.ctx.inbox.items():
            tag = bits_to_uint(raw[:TAG_WIDTH])
            more = raw[TAG_WIDTH] == "1"
            body = raw[FRAME_OVERHEAD:]
            self.queues.setdefault(tag, deque()).append((port, more, body))

    def drain(self, tag: int) -> List[Tuple[int, bool, str]]:
        q = self.queues.get(tag)
        if not q:
            return []
        out = list(q)
        q.clear()
        return out

    def has(self, tag: int) -> bool:
        return bool(self.queues.get(tag))


def tick(mb: Mailbox) -> Generator[None, None, None]:
    """End the node's round, then ingest next round's inbox."""
    yield
    mb.round += 1
    mb.collect()


class ItemAssembler:
    """Reassembles multi-frame payloads, one stream per port."""

    def __init__(self) -> None:
        self.partial: Dict[int, str] = {}

    def feed(self, frames: Iterable[Tuple[int, bool, str]]) -> List[Tuple[int, str]]:
        done = []
        for port, more, body in frames:
            acc = self.partial.pop(port, "") + body
            if more:
                self.partial[port] = acc
            else:
                done.append((port, acc))
        return done


def item_frames(payload: str, cap: int) -> List[Tuple[bool, str]]:
    bodies = fragment(payload, cap + FRAME_OVERHEAD, FRAME_OVERHEAD) or [""]
    return [(i < len(bodies) - 1, b) for i, b in enumerate(bodies)]


@dataclass
class BfsState:
    root: bool
    parent_port: Optional[int]
    layer: int
    children: Tuple[int, ...]
    ready_round: int


def bfs_join(ctx: NodeContext, mb: Mailbox) -> Generator[None, None, BfsState]:
    """Flood outward from the root; every node learns parent port, layer and
    children ports.  A node is done once it has heard from all its ports."""
    is_root = ctx.input["root"] == ctx.node
    heard: Dict[int, bool] = {}
    joined = is_root
    layer = 0
    parent: Optional[int] = None
    if is_root:
        for p in ctx.ports:
            send_frame(ctx, p, TAG_BFS, False, "0")
    while len(heard) < ctx.degree:
        yield from tick(mb)
        fresh = []
        for port, _more, body in mb.drain(TAG_BFS):
            heard[port] = body == "1"
            fresh.append(port)
        if not joined and fresh:
            joined = True
            parent = min(fresh)
            layer = mb.round - 1
            for p in ctx.ports:
                send_frame(ctx, p, TAG_BFS, False, "1" if p == parent else "0")
    if ctx.degree:
        yield from tick(mb)  # clear the joining round's trailing sends
    return BfsState(is_root, parent, layer, tuple(sorted(
        p for p, flagged in heard.items() if flagged)), mb.round)


def bfs_tree_centrally(topology: Graph, root: int) -> Dict[int, BfsState]:
    """The tree `bfs_join` would build, computed directly.  Used to inject
    pre-built trees when measuring later phases on their own."""
    n = topology.n
    layer = {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for w in topology.neighbors(u):
                if w not in layer:
                    layer[w] = layer[u] + 1
                    nxt.append(w)
        frontier = nxt
    if len(layer) != n:
        raise ProtocolError("topology is disconnected")
    parent = {}
    for v in range(n):
        if v == root:
            continue
        ups = [w for w in topology.neighbors(v) if layer[w] == layer[v] - 1]
        parent[v] = min(ups)  # lowest port == lowest neighbor id
    states = {}
    for v in range(n):
        nbrs = topology.neighbors(v)
        kids = tuple(
            sorted(p for p, w in enumerate(nbrs) if parent.get(w, None) == v)
        )
        pport = None if v == root else nbrs.index(parent[v])
        states[v] = BfsState(v == root, pport, layer[v], kids, layer[v] + 3)
    return states


def tree_depth(states: Dict[int, BfsState]) -> int:
    return max(st.layer for st in states.values())


@dataclass
class CensusResult:
    total: int
    height: int
    child_counts: Dict[int, int]


def census(
    ctx: NodeContext,
    mb: Mailbox,
    bfs: BfsState,
    member: bool,
    n: int,
    tag: int = TAG_CENSUS,
) -> Generator[None, None, CensusResult]:
    """Bottom-up subtree counts of predicate members, plus subtree heights.
    At the root, `total` is the global count and `height` the tree depth."""
    w = bit_width(n + 1)
    counts: Dict[int, int] = {}
    heights: Dict[int, int] = {}
    while len(counts) < len(bfs.children):
        yield from tick(mb)
        for port, _m, body in mb.drain(tag):
            counts[port] = bits_to_uint(body[:w])
            heights[port] = bits_to_uint(body[w:])
    total = int(member) + sum(counts.values())
    height = 1 + max(heights.values()) if heights else 0
    if not bfs.root:
        send_frame(
            ctx, bfs.parent_port, tag, False,
            uint_to_bits(total, w) + uint_to_bits(height, w),
        )
        yield from tick(mb)
    return CensusResult(total, height, counts)


def assign_intervals(
    ctx: NodeContext,
    mb: Mailbox,
    bfs: BfsState,
    cres: CensusResult,
    member: bool,
    n: int,
    tag: int = TAG_INTERVAL,
) -> Generator[None, None, Optional[int]]:
    """Split [0, total) recursively down the tree; each member node learns a
    distinct index, preorder.  Non-members learn None."""
    w = bit_width(n + 1)
    if bfs.root:
        start = 0
    else:
        while True:
            frames = mb.drain(tag)
            if frames:
                start = bits_to_uint(frames[0][2])
                break
            yield from tick(mb)
    my_index = start if member else None
    child_start = start + (1 if member else 0)
    for port in bfs.children:
        send_frame(ctx, port, tag, False, uint_to_bits(child_start, w))
        child_start += cres.child_counts[port]
    if bfs.children:
        yield from tick(mb)
    return my_index


def converge_sum(
    ctx: NodeContext,
    mb: Mailbox,
    bfs: BfsState,
    value: int,
    width: int,
    modulus: Optional[int] = None,
    tag: int = TAG_SUM,
) -> Generator[None, None, int]:
    """Tree sum of one value per node, reduced modulo `modulus` at every hop
    when given.  The root's return value is the network total."""
    got: Dict[int, int] = {}
    while len(got) < len(bfs.children):
        yield from tick(mb)
        for port, _m, body in mb.drain(tag):
            got[port] = bits_to_uint(body)
    total = value + sum(got.values())
    if modulus is not None:
        total %= modulus
    if not bfs.root:
        send_frame(ctx, bfs.parent_port, tag, False, uint_to_bits(total, width))
        yield from tick(mb)
    return total


def converge_vector_sum(
    ctx: NodeContext,
    mb: Mailbox,
    bfs: BfsState,
    values: Sequence[int],
    moduli: Sequence[int],
    cap: int,
    tag: int = TAG_VEC,
) -> Generator[None, None, List[int]]:
    """Componentwise tree sum of a k-vector, each entry reduced modulo its
    own modulus at every hop.  Entries are packed into fixed-width chunks and
    pipelined, so the root finishes in depth + ceil(k/chunk) + O(1) rounds."""
    k = len(values)
    if k == 0:
        return []
    w = max(bit_width(m) for m in moduli)
    per = max(1, cap // w)
    nchunks = math.ceil(k / per)
    acc = [v % m for v, m in zip(values, moduli)]
    recv_count = {p: 0 for p in bfs.children}

    def ingest() -> None:
        for port, _m, body in mb.drain(tag):
            idx = recv_count[port]
            lo = idx * per
            for i in range(len(body) // w):
                acc[lo + i] = (
                    acc[lo + i] + bits_to_uint(body[i * w : (i + 1) * w])
                ) % moduli[lo + i]
            recv_count[port] = idx + 1

    if bfs.root:
        while not all(c >= nchunks for c in recv_count.values()):
            yield from tick(mb)
            ingest()
        return acc

    sent = 0
    while sent < nchunks:
        if all(c > sent for c in recv_count.values()):
            lo, hi = sent * per, min((sent + 1) * per, k)
            body = "".join(uint_to_bits(acc[i], w) for i in range(lo, hi))
            send_frame(ctx, bfs.parent_port, tag, False, body)
            sent += 1
        yield from tick(mb)
        ingest()
    return acc


def broadcast_items(
    ctx: NodeContext,
    mb: Mailbox,
    bfs: BfsState,
    items: Optional[List[str]],
    cap: int,
    tag: int,
) -> Generator[None, None, List[str]]:
    """Root streams a counted list of payloads down the tree, one frame per
    round per edge; every node ends up with the full list."""
    asm = ItemAssembler()
    if bfs.root:
        out: deque = deque()
        out.extend(item_frames(uint_to_bits(len(items), 16), cap))
        for it in items:
            out.extend(item_frames(it, cap))
        while out:
            more, body = out.popleft()
            for port in bfs.children:
                send_frame(ctx, port, tag, more, body)
            yield from tick(mb)
        return list(items)
    # every send sits at an iteration top and is followed by that
    # iteration's tick, so the frame-per-edge-per-round discipline holds
    expected: Optional[int] = None
    got: List[str] = []
    outq: deque = deque()
    while expected is None or len(got) < expected or outq:
        if outq:
            more, body = outq.popleft()
            for port in bfs.children:
                send_frame(ctx, port, tag, more, body)
        yield from tick(mb)
        frames = mb.drain(tag)
        outq.extend((m, b) for _p, m, b in frames)
        for _port, payload in asm.feed(frames):
            if expected is None:
                expected = bits_to_uint(payload)
            else:
                got.append(payload)
    return got


def broadcast_payload(
    ctx: NodeContext,
    mb: Mailbox,
    bfs: BfsState,
    payload: Optional[str],
    cap: int,
    tag: int,
) -> Generator[None, None, str]:
    items = yield from broadcast_items(
        ctx, mb, bfs, [payload] if bfs.root else None, cap, tag
    )
    return items[0]


def exchange_with_neighbors(
    ctx: NodeContext,
    mb: Mailbox,
    payload: str,
    cap: int,
    tag: int = TAG_EXCHANGE,
) -> Generator[None, None, Dict[int, str]]:
    """Every node sends the same-width payload on all its ports; returns the
    per-port payloads received.  Self-synchronizing because everyone sends.
    Each distinct exchange phase in a protocol needs its own tag."""
    asm = ItemAssembler()
    frames = item_frames(payload, cap)
    got: Dict[int, str] = {}
    for more, body in frames:
        for port in ctx.ports:
            send_frame(ctx, port, tag, more, body)
        yield from tick(mb)
        for port, received in asm.feed(mb.drain(tag)):
            got.setdefault(port, received)
    while len(got) < ctx.degree:
        yield from tick(mb)
        for port, received in asm.feed(mb.drain(tag)):
            got.setdefault(port, received)
    return got


def receive_from_port(
    ctx: NodeContext, mb: Mailbox, port: int, tag: int
) -> Generator[None, None, str]:
    """Block until one complete payload arrives on the given port; frames
    from other ports stay queued."""
    asm = ItemAssembler()
    while True:
        frames = mb.drain(tag)
        mine = [fr for fr in frames if fr[0] == port]
        rest = [fr for fr in frames if fr[0] != port]
        if rest:
            mb.queues.setdefault(tag, deque()).extend(rest)
        done = asm.feed(mine)
        if done:
            return done[0][1]
        yield from tick(mb)


def pipelined_items_up(
    ctx: NodeContext,
    mb: Mailbox,
    bfs: BfsState,
    own_items: List[str],
    tag: int,
    cap: int,
    expected: Optional[int] = None,
    stop_tags: Sequence[int] = (),
) -> Generator[None, None, Optional[List[Tuple[str, int]]]]:
    """Tagged items flow to the root, one frame per round per edge, relays
    merging their children's streams.  The root collects `expected` items and
    returns them with arrival rounds; other nodes forward until a frame with
    a tag in `stop_tags` shows up (the start of the next phase)."""
    asm = ItemAssembler()
    if bfs.root:
        got: List[Tuple[str, int]] = [(it, mb.round) for it in own_items]
        while len(got) < (expected or 0):
            yield from tick(mb)
            for _port, payload in asm.feed(mb.drain(tag)):
                got.append((payload, mb.round))
        return got
    out: deque = deque()
    for it in own_items:
        out.extend(item_frames(it, cap))
    while True:
        if any(mb.has(t) for t in stop_tags):
            return None
        if out:
            more, body = out.popleft()
            send_frame(ctx, bfs.parent_port, tag, more, body)
        yield from tick(mb)
        for _port, payload in asm.feed(mb.drain(tag)):
            out.extend(item_frames(payload, cap))


def elect_random_nodes(
    ctx: NodeContext,
    mb: Mailbox,
    bfs: BfsState,
    s: int,
    n: int,
    cap: int,
    depth_at_root: Optional[int] = None,
    range_exponent: int = 2,
    slack: int = 3,
    stop_tags: Sequence[int] = (),
) -> Generator[None, None, Optional[Tuple[Tuple[int, ...], int, int]]]:
    """Each node draws a number in [n^(range_exponent+2)); the ids of the s
    highest draws reach the root by priority forwarding (higher numbers
    first, ties broken toward lower ids; a node forwards at most s items
    since anything below its local top s cannot be in the global top s).
    Duplicate numbers seen at the root trigger a restart with fresh draws.
    Returns (ids, result_round, attempts) at the root, None elsewhere."""
    w_num = bit_width(n ** (range_exponent + 2))
    w_id = bit_width(n)
    frames_per_item = math.ceil((3 + w_num + w_id) / cap)
    attempt = 0

    def draw() -> Tuple[int, int]:
        return ctx.rng.randrange(n ** (range_exponent + 2)), ctx.node

    def encode(att: int, num: int, node: int) -> str:
        return (
            uint_to_bits(att % 8, 3)
            + uint_to_bits(num, w_num)
            + uint_to_bits(node, w_id)
        )

    if bfs.root:
        if depth_at_root is None:
            raise ProtocolError("root needs the tree depth for its cutoff")
        while True:
            candidates = [draw()]
            cutoff = mb.round + depth_at_root + frames_per_item * s + slack
            if attempt > 0:
                cutoff += depth_at_root  # restart flood reaches leaves first
            asm = ItemAssembler()
            while mb.round < cutoff:
                yield from tick(mb)
                for _port, payload in asm.feed(mb.drain(TAG_ELECT)):
                    if bits_to_uint(payload[:3]) != attempt % 8:
                        continue
                    body = payload[3:]
                    candidates.append(
                        (bits_to_uint(body[:w_num]), bits_to_uint(body[w_num:]))
                    )
            nums = [num for num, _ in candidates]
            if len(set(nums)) == len(nums):
                top = sorted(candidates, key=lambda c: (-c[0], c[1]))[:s]
                ids = tuple(node for _num, node in top)
                result_round = mb.round
                for port in bfs.children:
                    send_frame(
                        ctx, port, TAG_ELECT_CTL, False,
                        "1" + uint_to_bits(attempt % 8, 3),
                    )
                if bfs.children:
                    yield from tick(mb)
                return ids, result_round, attempt + 1
            attempt += 1
            for port in bfs.children:
                send_frame(
                    ctx, port, TAG_ELECT_CTL, False,
                    "0" + uint_to_bits(attempt % 8, 3),
                )
            yield from tick(mb)

    def beats(a: Tuple[int, int], b: Tuple[int, int]) -> bool:
        return (-a[0], a[1]) < (-b[0], b[1])

    buffer: List[Tuple[int, int]] = [draw()]
    sent_items: List[Tuple[int, int]] = []
    pending: deque = deque()
    asm = ItemAssembler()
    while True:
        if any(mb.has(t) for t in stop_tags):
            return None
        while not pending and buffer:
            buffer.sort(key=lambda c: (-c[0], c[1]))
            cand = buffer.pop(0)
            # an item is dead once s strictly better ones went up already;
            # those are ahead of it at every relay, so it cannot be top-s
            if sum(1 for it in sent_items if beats(it, cand)) >= s:
                continue
            pending.extend(item_frames(encode(attempt, *cand), cap))
            sent_items.append(cand)
            break
        if pending:
            more, body = pending.popleft()
            send_frame(ctx, bfs.parent_port, TAG_ELECT, more, body)
        yield from tick(mb)
        ctl = mb.drain(TAG_ELECT_CTL)
        if ctl:
            body = ctl[-1][2]
            for cport in bfs.children:
                send_frame(ctx, cport, TAG_ELECT_CTL, False, body)
            if body[0] == "1":
                if bfs.children:
                    yield from tick(mb)
                return None
            attempt = bits_to_uint(body[1:])
            buffer = [draw()]
            sent_items = []
            pending.clear()
            asm = ItemAssembler()
            continue
        for _port, payload in asm.feed(mb.drain(TAG_ELECT)):
            if bits_to_uint(payload[:3]) != attempt % 8:
                continue
            body = payload[3:]
            buffer.append((bits_to_uint(body[:w_num]), bits_to_uint(body[w_num:])))
