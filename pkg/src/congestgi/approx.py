"""Per-node recovery of an approximate isomorphism.

Runs the tester (with the reference graph known to every node and the
all-zero class size checked as well); on accept, every node outputs an image
under a bijection g that keeps the sampled distance guarantee.

Labels are grouped into clusters by the position of their highest set bit;
the anchor at that position is adjacent to its whole cluster and acts as its
coordinator.  Cluster size differences (j values) are summed at the root and
flooded back, from which everyone derives the same reserved set R: for each
deficit cluster, its |j| lowest-order reference nodes (order = ascending id
with the anchor images lifted above everything, so R never touches them).
Coordinators then match their members class by class:

  equal-size classes     -> matched by a per-class keyed shuffle (anchors
                            pinned); members whose image fell into R are
                            displaced into the cluster residual pool
  unequal-size classes   -> residual pool
  residual pool          -> unmatched cluster images outside R, and for
                            surplus clusters the leftover members take the
                            cluster's slice of R, in order

The all-zero-label nodes index themselves 1..|Y| through subtree intervals
and take the matching zero-label reference nodes in order.  Because the
per-class shuffles are keyed by (run seed, class label), a reference
bijection drawn centrally from the same streams agrees with g everywhere
outside Y, the unequal classes and the displaced members; tests rely on that
coupling bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .bits import bit_width, bits_to_uint, uint_to_bits
from .graphs import Graph, GraphError
from .labels import Bijection, Label, all_labels, label_to_key, msb, zero_label
from .protocols import (
    TAG_CENSUS2,
    TAG_GMAP,
    TAG_INTERVAL2,
    TAG_ITEMS2,
    TAG_PLAN,
    TAG_SUM2,
    Mailbox,
    ProtocolError,
    assign_intervals,
    body_capacity,
    broadcast_items,
    broadcast_payload,
    census,
    pipelined_items_up,
    receive_from_port,
    send_frame,
)
from .rng import derive_rng
from .sim import NetworkConfig, Transcript, run
from .tester import TestParams, TesterResult, tester_node_program


def total_order_key(p_seq: Sequence[int]):
    """Reference-side node order: ascending id, anchor images above all."""
    pset = set(p_seq)
    return lambda v: (1 if v in pset else 0, v)


@dataclass
class ClusterPlan:
    """Shared matching plan: per-cluster size differences, the reserved set
    (in order), and each surplus cluster's slice into it."""

    j: Dict[int, int]
    reserved: Tuple[int, ...]
    slices: Dict[int, Tuple[int, ...]]

    @property
    def reserved_set(self) -> Set[int]:
        return set(self.reserved)


def build_cluster_plan(
    gk: Graph, p_seq: Sequence[int], j_values: Dict[int, int]
) -> ClusterPlan:
    """Deterministic given (reference graph, anchor images, j values); every
    node computes the same plan locally."""
    s = len(p_seq)
    if sum(j_values.values()) != 0:
        raise ProtocolError("cluster size differences must cancel out")
    labs = all_labels(gk, p_seq)
    key = total_order_key(p_seq)
    clusters: Dict[int, List[int]] = {m: [] for m in range(1, s + 1)}
    for v, lab in enumerate(labs):
        m = msb(lab)
        if m > 0:
            clusters[m].append(v)
    reserved: List[int] = []
    for m in range(1, s + 1):
        jm = j_values.get(m, 0)
        if jm < 0:
            ordered = sorted(clusters[m], key=key)
            take = ordered[: -jm]
            if len(take) < -jm:
                raise ProtocolError(f"cluster {m} too small to reserve {-jm} nodes")
            reserved.extend(take)
    reserved.sort(key=key)
    slices: Dict[int, Tuple[int, ...]] = {}
    offset = 0
    for m in range(1, s + 1):
        jm = j_values.get(m, 0)
        if jm > 0:
            slices[m] = tuple(reserved[offset : offset + jm])
            offset += jm
    if offset != len(reserved):
        raise ProtocolError("reserved set does not split into surplus slices")
    return ClusterPlan(dict(j_values), tuple(reserved), slices)


def _class_bijection(
    members: Sequence[int],
    images: Sequence[int],
    pins: Dict[int, int],
    seed: int,
    label_key: str,
) -> Dict[int, int]:
    """Uniform class-onto-class matching with pinned anchors, drawn from the
    stream keyed by the class label.  Both the coordinators and the central
    reference bijection call this with identical arguments."""
    stream = derive_rng(seed, "gclass", label_key)
    pin_images = set(pins.values())
    free_m = [v for v in sorted(members) if v not in pins]
    free_i = [u for u in sorted(images) if u not in pin_images]
    stream.shuffle(free_i)
    out = {v: pins[v] for v in members if v in pins}
    out.update(zip(free_m, free_i))
    return out


def assign_g_cluster(
    m: int,
    plan: ClusterPlan,
    members: Dict[int, Label],
    gk: Graph,
    c_seq: Sequence[int],
    p_seq: Sequence[int],
    seed: int,
) -> Dict[int, int]:
    """Coordinator-side matching of one cluster's members into the reference
    graph.  `members` maps node id -> label for every node whose label has
    its highest set bit at position m."""
    for v, lab in members.items():
        if msb(lab) != m:
            raise ProtocolError(f"node {v} does not belong to cluster {m}")
    labs_k = all_labels(gk, p_seq)
    cluster_images = [v for v, lab in enumerate(labs_k) if msb(lab) == m]
    sizes_k: Dict[Label, List[int]] = {}
    for v in cluster_images:
        sizes_k.setdefault(labs_k[v], []).append(v)
    by_label: Dict[Label, List[int]] = {}
    for v, lab in members.items():
        by_label.setdefault(lab, []).append(v)

    pin = dict(zip(c_seq, p_seq))
    rset = plan.reserved_set
    out: Dict[int, int] = {}
    pool: List[int] = []
    matched_images: Set[int] = set()
    for lab in sorted(set(by_label) | set(sizes_k), key=label_to_key):
        dom = by_label.get(lab, [])
        cod = sizes_k.get(lab, [])
        if dom and len(dom) == len(cod):
            pins = {v: pin[v] for v in dom if v in pin}
            b = _class_bijection(dom, cod, pins, seed, label_to_key(lab))
            for v, u in b.items():
                if u in rset:
                    pool.append(v)  # displaced; u stays reserved
                else:
                    out[v] = u
                    matched_images.add(u)
        else:
            pool.extend(dom)

    targets = sorted(
        u for u in cluster_images if u not in matched_images and u not in rset
    )
    stream = derive_rng(seed, "gres", m)
    pool_shuffled = sorted(pool)
    stream.shuffle(pool_shuffled)
    for v, u in zip(pool_shuffled, targets):
        out[v] = u
    leftover = sorted(pool_shuffled[len(targets) :])
    slice_m = plan.slices.get(m, ())
    if len(leftover) != len(slice_m):
        raise ProtocolError(
            f"cluster {m}: {len(leftover)} unmatched members vs "
            f"slice of {len(slice_m)}"
        )
    for v, u in zip(leftover, slice_m):
        out[v] = u
    return out


def coupled_reference_bijection(
    gu: Graph,
    gk: Graph,
    c_seq: Sequence[int],
    p_seq: Sequence[int],
    seed: int,
) -> Bijection:
    """A maximally class-consistent bijection drawn from the same per-class
    streams the coordinators use, so it agrees with the distributed g outside
    Y, the reserved set and the unequal classes."""
    labs_u = all_labels(gu, c_seq)
    labs_k = all_labels(gk, p_seq)
    classes_u: Dict[Label, List[int]] = {}
    classes_k: Dict[Label, List[int]] = {}
    for v, lab in enumerate(labs_u):
        classes_u.setdefault(lab, []).append(v)
    for v, lab in enumerate(labs_k):
        classes_k.setdefault(lab, []).append(v)
    pin = dict(zip(c_seq, p_seq))
    mapping = [-1] * gu.n
    residual_dom: List[int] = []
    residual_cod: List[int] = []
    pinned_images = set(pin.values())
    for lab in sorted(set(classes_u) | set(classes_k), key=label_to_key):
        dom = classes_u.get(lab, [])
        cod = classes_k.get(lab, [])
        if len(dom) == len(cod):
            pins = {v: pin[v] for v in dom if v in pin}
            for v, u in _class_bijection(dom, cod, pins, seed, label_to_key(lab)).items():
                mapping[v] = u
        else:
            residual_dom.extend(v for v in dom if v not in pin)
            residual_cod.extend(u for u in cod if u not in pinned_images)
            for v in dom:
                if v in pin:
                    mapping[v] = pin[v]
    stream = derive_rng(seed, "fres")
    residual_cod = sorted(residual_cod)
    stream.shuffle(residual_cod)
    for v, u in zip(sorted(residual_dom), residual_cod):
        mapping[v] = u
    return Bijection(mapping)


@dataclass
class ApproxResult:
    status: str  # "ok" or "failed"
    mapping: Optional[Bijection]
    anchors: Tuple[int, ...]
    winner: Optional[Tuple[int, ...]]
    sequences_tried: int
    election_attempts: int
    transcript: Transcript


def run_approx_iso(
    topology: Graph,
    gk: Graph,
    eps: float,
    cfg: NetworkConfig,
    s: Optional[int] = None,
    t: Optional[int] = None,
    root: int = 0,
) -> ApproxResult:
    """Tester plus distributed image assignment, reference graph known to
    every node.  On tester reject, reports failure instead of a mapping."""
    n = topology.n
    if gk.n != n:
        raise GraphError(f"size mismatch: network {n}, known {gk.n}")
    params = TestParams.derive(n, eps, s=s, t=t)
    bandwidth = cfg.effective_bandwidth(n)
    w_id = bit_width(n)
    gseed = cfg.seed

    inputs = {
        v: {"n": n, "root": root, "bandwidth": bandwidth, "gk": gk}
        for v in range(n)
    }
    inputs[root].update(
        {"params": params, "enum_seed": derive_rng(cfg.seed, "enum").getrandbits(48)}
    )

    def program(ctx):
        verdict, extras, st = yield from tester_node_program(
            ctx, check_zero_class=True
        )
        mb: Mailbox = st["mb"]
        bfs = st["bfs"]
        cap = st["cap"]
        s_ = st["s"]
        anchors = st["anchors"]
        my_label = st["my_label"]
        gk_: Graph = ctx.input["gk"]
        summary = None
        if bfs.root:
            summary = {
                "anchors": anchors,
                "winner": extras["outcome"].winner,
                "tried": extras["outcome"].tried,
                "attempts": extras["attempts"],
            }

        if verdict != "accept":
            return ("failed", None, summary)

        # the winning anchor-image sequence floods down
        if bfs.root:
            winner = extras["outcome"].winner
            items = [uint_to_bits(u, w_id) for u in winner]
        else:
            items = None
        items = yield from broadcast_items(ctx, mb, bfs, items, cap, TAG_PLAN)
        p_seq = tuple(bits_to_uint(b) for b in items)

        # coordinators report their cluster size differences
        w_m = bit_width(s_ + 1)
        w_j = bit_width(2 * n + 1)
        own: List[str] = []
        my_m = st["my_anchor_idx"] + 1 if st["my_anchor_idx"] < s_ else 0
        labs_k = all_labels(gk_, p_seq)
        if my_m:
            size_u = sum(
                1
                for lab in st["nbr_labels"].values()
                if msb(tuple(int(ch) for ch in lab)) == my_m
            )
            size_k = sum(1 for lab in labs_k if msb(lab) == my_m)
            own.append(
                uint_to_bits(my_m, w_m) + uint_to_bits(size_u - size_k + n, w_j)
            )
        ups = yield from pipelined_items_up(
            ctx, mb, bfs, own, TAG_ITEMS2, cap,
            expected=s_ if bfs.root else None,
            stop_tags=(TAG_SUM2,),
        )

        # the root floods the full j table (or an abort flag)
        if bfs.root:
            j_values = {}
            for payload, _r in ups:
                m = bits_to_uint(payload[:w_m])
                j_values[m] = bits_to_uint(payload[w_m:]) - n
            ok = sum(j_values.values()) == 0
            body = "1" if ok else "0"
            for m in range(1, s_ + 1):
                body += uint_to_bits(j_values.get(m, 0) + n, w_j)
            payload = yield from broadcast_payload(ctx, mb, bfs, body, cap, TAG_SUM2)
        else:
            payload = yield from broadcast_payload(ctx, mb, bfs, None, cap, TAG_SUM2)
        if payload[0] == "0":
            return ("failed", None, summary)
        j_values = {
            m: bits_to_uint(payload[1 + (m - 1) * w_j : 1 + m * w_j]) - n
            for m in range(1, s_ + 1)
        }

        # zero-label nodes index themselves and self-match, in order
        in_y = my_label == "0" * s_
        cres = yield from census(ctx, mb, bfs, in_y, n, tag=TAG_CENSUS2)
        y_idx = yield from assign_intervals(
            ctx, mb, bfs, cres, in_y, n, tag=TAG_INTERVAL2
        )

        # coordinators match their clusters and hand out the images (before
        # any early return: an anchor can itself sit in the zero class)
        if my_m:
            plan = build_cluster_plan(gk_, p_seq, j_values)
            members = {
                st["nbr_ids"][port]: tuple(int(ch) for ch in lab)
                for port, lab in st["nbr_labels"].items()
                if msb(tuple(int(ch) for ch in lab)) == my_m
            }
            assignment = assign_g_cluster(
                my_m, plan, members, gk_, anchors, p_seq, gseed
            )
            port_of = {st["nbr_ids"][port]: port for port in st["nbr_ids"]}
            for v, u in assignment.items():
                send_frame(ctx, port_of[v], TAG_GMAP, False, uint_to_bits(u, w_id))

        if in_y:
            key = total_order_key(p_seq)
            y_images = sorted(
                (v for v, lab in enumerate(labs_k) if msb(lab) == 0), key=key
            )
            g_v = y_images[y_idx]
            return ("ok", g_v, summary)

        # every clustered node hears its image from its cluster coordinator
        m_mine = msb(tuple(int(ch) for ch in my_label))
        coord_port = st["anchor_ports"][m_mine - 1]
        payload = yield from receive_from_port(ctx, mb, coord_port, TAG_GMAP)
        return ("ok", bits_to_uint(payload), summary)

    tr = run(topology, program, cfg, inputs)
    summary = tr.outputs[root][2]
    statuses = {v: out[0] for v, out in tr.outputs.items()}
    if "failed" in statuses.values():
        mapping = None
        status = "failed"
    else:
        images = [0] * n
        for v, (_st, g_v, _sm) in tr.outputs.items():
            images[v] = g_v
        mapping = Bijection(images)
        status = "ok"

    tr.outputs = statuses
    return ApproxResult(
        status=status,
        mapping=mapping,
        anchors=tuple(summary["anchors"]),
        winner=summary["winner"],
        sequences_tried=summary["tried"],
        election_attempts=summary["attempts"],
        transcript=tr,
    )
