"""Single-phase protocol runs.

Each wrapper runs exactly one building block over a topology, injecting
whatever pre-state the block assumes (usually a pre-built tree computed
centrally), and reports both the result and the round at which the root had
it.  The end-to-end protocols compose the same blocks internally; these
wrappers exist so each block's round bound can be measured on its own.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .bits import bit_width, bits_to_uint, uint_to_bits
from .graphs import Graph
from .labels import Label, all_labels, msb
from .protocols import (
    TAG_DONE,
    TAG_ITEMS,
    TAG_QUERY,
    Mailbox,
    bfs_join,
    bfs_tree_centrally,
    body_capacity,
    broadcast_items,
    broadcast_payload,
    census,
    assign_intervals,
    converge_sum,
    elect_random_nodes,
    pipelined_items_up,
    send_frame,
    tick,
    tree_depth,
    ProtocolError,
)
from .sim import NetworkConfig, Transcript, run


@dataclass
class RunResult:
    value: Any
    root_round: Optional[int]
    transcript: Transcript


def _inputs(topology: Graph, root: int, extra=None, per_node=None) -> Dict[int, dict]:
    base: Dict[int, dict] = {}
    for v in range(topology.n):
        d = {"n": topology.n, "root": root}
        if extra:
            d.update(extra)
        if per_node:
            d.update(per_node.get(v, {}))
        base[v] = d
    return base


def _injected_bfs(topology: Graph, root: int) -> Dict[int, dict]:
    states = bfs_tree_centrally(topology, root)
    return {v: {"bfs": states[v], "depth": tree_depth(states)} for v in range(topology.n)}


def run_build_bfs(topology: Graph, root: int, cfg: NetworkConfig) -> RunResult:
    """Distributed tree construction; per-node output (parent_port, layer,
    children ports)."""

    def program(ctx):
        mb = Mailbox(ctx)
        st = yield from bfs_join(ctx, mb)
        return (st.parent_port, st.layer, st.children)

    tr = run(topology, program, cfg, _inputs(topology, root))
    return RunResult(tr.outputs, None, tr)


def run_elect(
    topology: Graph,
    root: int,
    s: int,
    cfg: NetworkConfig,
    range_exponent: int = 2,
) -> RunResult:
    """Random-node election over an injected tree.  Root output is the
    elected ids; result_round is when the root finalized them."""
    cap = body_capacity(cfg.effective_bandwidth(topology.n))

    def program(ctx):
        mb = Mailbox(ctx)
        bfs = ctx.input["bfs"]
        res = yield from elect_random_nodes(
            ctx, mb, bfs, s, ctx.input["n"], cap,
            depth_at_root=ctx.input["depth"], range_exponent=range_exponent,
            slack=2,
        )
        return res

    tr = run(topology, program, cfg, _inputs(topology, root, per_node=_injected_bfs(topology, root)))
    ids, result_round, attempts = tr.outputs[root]
    return RunResult((tuple(ids), attempts), result_round, tr)


def run_broadcast(
    topology: Graph, root: int, payload: str, cfg: NetworkConfig
) -> RunResult:
    """Root payload flooded to everyone (fragmented and pipelined)."""
    cap = body_capacity(cfg.effective_bandwidth(topology.n))

    def program(ctx):
        mb = Mailbox(ctx)
        bfs = ctx.input["bfs"]
        got = yield from broadcast_payload(
            ctx, mb, bfs, payload if bfs.root else None, cap, TAG_ITEMS
        )
        return (got, mb.round)

    tr = run(topology, program, cfg, _inputs(topology, root, per_node=_injected_bfs(topology, root)))
    worst = max(r for _v, (_p, r) in tr.outputs.items())
    return RunResult({v: p for v, (p, _r) in tr.outputs.items()}, worst, tr)


def run_convergecast_sum(
    topology: Graph,
    root: int,
    values: Dict[int, int],
    cfg: NetworkConfig,
    modulus: Optional[int] = None,
) -> RunResult:
    width = max(bit_width(modulus) if modulus else bit_width(sum(values.values()) + 1), 1)

    def program(ctx):
        mb = Mailbox(ctx)
        bfs = ctx.input["bfs"]
        total = yield from converge_sum(
            ctx, mb, bfs, values[ctx.node], width, modulus
        )
        return (total, mb.round)

    tr = run(topology, program, cfg, _inputs(topology, root, per_node=_injected_bfs(topology, root)))
    total, rr = tr.outputs[root]
    return RunResult(total, rr, tr)


def run_pipelined_collect(
    topology: Graph,
    root: int,
    items: Dict[int, List[str]],
    cfg: NetworkConfig,
) -> RunResult:
    """Every node contributes tagged items; the root collects them all."""
    cap = body_capacity(cfg.effective_bandwidth(topology.n))
    expected = sum(len(v) for v in items.values())

    def program(ctx):
        mb = Mailbox(ctx)
        bfs = ctx.input["bfs"]
        mine = items.get(ctx.node, [])
        if bfs.root:
            got = yield from pipelined_items_up(
                ctx, mb, bfs, mine, TAG_ITEMS, cap, expected=expected
            )
            rr = mb.round
            if bfs.children:
                for port in bfs.children:
                    send_frame(ctx, port, TAG_DONE, False, "1")
                yield from tick(mb)
            return ([p for p, _r in got], rr)
        yield from pipelined_items_up(
            ctx, mb, bfs, mine, TAG_ITEMS, cap, stop_tags=(TAG_DONE,)
        )
        for port in bfs.children:
            send_frame(ctx, port, TAG_DONE, False, "1")
        if bfs.children:
            yield from tick(mb)
        return None

    tr = run(topology, program, cfg, _inputs(topology, root, per_node=_injected_bfs(topology, root)))
    got, rr = tr.outputs[root]
    return RunResult(got, rr, tr)


def run_count_zero_label(
    topology: Graph, root: int, anchors: Sequence[int], cfg: NetworkConfig
) -> RunResult:
    """Tree count of the nodes with the all-zero label.  Labels are injected
    (the label exchange is an earlier phase of the full protocols)."""
    labs = all_labels(topology, anchors)
    zero = (0,) * len(anchors)
    width = bit_width(topology.n + 1)

    def program(ctx):
        mb = Mailbox(ctx)
        bfs = ctx.input["bfs"]
        total = yield from converge_sum(
            ctx, mb, bfs, int(labs[ctx.node] == zero), width
        )
        return (total, mb.round)

    tr = run(topology, program, cfg, _inputs(topology, root, per_node=_injected_bfs(topology, root)))
    total, rr = tr.outputs[root]
    return RunResult(total, rr, tr)


def run_label_class_sizes(
    topology: Graph,
    root: int,
    anchors: Sequence[int],
    queries: Sequence[Label],
    cfg: NetworkConfig,
) -> RunResult:
    """Counts of the queried label classes, gathered from the coordinator
    anchor of each label (the anchor at the label's highest set bit, which is
    adjacent to the whole class).  Queries must be non-zero labels; pre-state
    (labels, neighbor labels, the query list) is injected."""
    for q in queries:
        if msb(q) == 0:
            raise ProtocolError("all-zero label has no coordinator; use the tree count")
    labs = all_labels(topology, anchors)
    cap = body_capacity(cfg.effective_bandwidth(topology.n))
    w_idx = bit_width(max(len(queries), 2))
    w_cnt = bit_width(topology.n + 1)

    def program(ctx):
        mb = Mailbox(ctx)
        bfs = ctx.input["bfs"]
        mine = []
        for qi, q in enumerate(queries):
            if anchors[msb(q) - 1] != ctx.node:
                continue
            count = sum(
                1 for w in topology.neighbors(ctx.node) if labs[w] == q
            )
            mine.append(uint_to_bits(qi, w_idx) + uint_to_bits(count, w_cnt))
        if bfs.root:
            got = yield from pipelined_items_up(
                ctx, mb, bfs, mine, TAG_ITEMS, cap, expected=len(queries)
            )
            rr = mb.round
            for port in bfs.children:
                send_frame(ctx, port, TAG_DONE, False, "1")
            if bfs.children:
                yield from tick(mb)
            counts = {}
            for payload, _r in got:
                qi = bits_to_uint(payload[:w_idx])
                counts[queries[qi]] = bits_to_uint(payload[w_idx:])
            return (counts, rr)
        yield from pipelined_items_up(
            ctx, mb, bfs, mine, TAG_ITEMS, cap, stop_tags=(TAG_DONE,)
        )
        for port in bfs.children:
            send_frame(ctx, port, TAG_DONE, False, "1")
        if bfs.children:
            yield from tick(mb)
        return None

    tr = run(topology, program, cfg, _inputs(topology, root, per_node=_injected_bfs(topology, root)))
    counts, rr = tr.outputs[root]
    return RunResult(counts, rr, tr)


def run_assign_unique_numbers(
    topology: Graph, root: int, members: Sequence[int], cfg: NetworkConfig
) -> RunResult:
    """Each member node learns a distinct index in [1..|members|] via subtree
    counts up and interval splits down."""
    member_set = set(members)

    def program(ctx):
        mb = Mailbox(ctx)
        bfs = ctx.input["bfs"]
        mem = ctx.node in member_set
        cres = yield from census(ctx, mb, bfs, mem, ctx.input["n"])
        idx = yield from assign_intervals(ctx, mb, bfs, cres, mem, ctx.input["n"])
        return None if idx is None else idx + 1

    tr = run(topology, program, cfg, _inputs(topology, root, per_node=_injected_bfs(topology, root)))
    return RunResult(tr.outputs, None, tr)
