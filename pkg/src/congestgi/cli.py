"""Batch harness: generate instances, run the protocols, sweep parameters.

Every command requires --seed; identical invocations produce byte-identical
artifacts.  Graphs travel in the plain text format (header ``n m``, one
``u v`` line per edge); edge streams are the same without the header.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path
from typing import Optional

import click

from .approx import run_approx_iso
from .central import (
    DensityTester,
    NeighborhoodProbeTester,
    run_adaptive,
    run_centralized_adaptive,
    run_centralized_nonadaptive,
    run_nonadaptive,
)
from .decision import run_decision_protocol
from .graphs import (
    Graph,
    GraphError,
    format_graph_text,
    hamming_distance,
    parse_edge_stream,
    parse_graph_text,
)
from .instances import (
    gen_decision_lb,
    gen_far_pair,
    gen_isomorphic_pair,
    gen_testing_lb,
)
from .protocols import bfs_tree_centrally, tree_depth
from .rng import derive_rng
from .sim import NetworkConfig, UNBOUNDED
from .streaming import stream_decide
from .tester import run_tester


def _load_graph(path: str) -> Graph:
    try:
        return parse_graph_text(Path(path).read_text())
    except (OSError, GraphError) as exc:
        raise click.UsageError(f"cannot load graph {path}: {exc}")


def _config(seed: int, bandwidth: Optional[int], max_rounds: int = 500_000) -> NetworkConfig:
    bw = None
    if bandwidth is not None:
        bw = UNBOUNDED if bandwidth == 0 else bandwidth
    return NetworkConfig(bandwidth_bits=bw, max_rounds=max_rounds, seed=seed)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


class _CleanErrors(click.Group):
    """Protocol aborts and oracle refusals exit with a diagnostic, not a
    traceback."""

    def invoke(self, ctx):
        from .oracles import OracleRefusal
        from .sim import SimError
        from .streaming import SpaceBudgetExceeded

        try:
            return super().invoke(ctx)
        except (OracleRefusal, SimError, GraphError, SpaceBudgetExceeded) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)


@click.group(cls=_CleanErrors)
def main() -> None:
    """Distributed graph-isomorphism protocol harness."""


@main.command()
@click.option("--kind", type=click.Choice(["iso", "far", "decision-lb", "testing-lb"]), required=True)
@click.option("--n", type=int, default=16, show_default=True)
@click.option("--eps", type=float, default=0.3, show_default=True)
@click.option("--edge-prob", type=float, default=0.5, show_default=True)
@click.option("--k-bits", type=int, default=2, show_default=True, help="matrix dimension for decision-lb")
@click.option("--diameter", type=int, default=8, show_default=True, help="path length for testing-lb")
@click.option("--seed", type=int, required=True)
@click.option("--out", type=str, required=True, help="output path prefix")
def gen(kind, n, eps, edge_prob, k_bits, diameter, seed, out):
    """Write an instance (gu.txt, gk.txt, cert.json) under the prefix."""
    prefix = Path(out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if kind == "iso":
        pair = gen_isomorphic_pair(n, edge_prob, seed)
        gu, gk, cert = pair.gu, pair.gk, pair.certificate_json()
    elif kind == "far":
        pair = gen_far_pair(n, eps, seed)
        gu, gk, cert = pair.gu, pair.gk, pair.certificate_json()
    elif kind == "decision-lb":
        rng = derive_rng(seed, "lb-inputs")
        x = [[rng.randrange(2) for _ in range(k_bits)] for _ in range(k_bits)]
        y = [[rng.randrange(2) for _ in range(k_bits)] for _ in range(k_bits)]
        gu, gk = gen_decision_lb(x, y)
        cert = json.dumps({"kind": "decision-lb", "x": x, "y": y}, sort_keys=True)
    else:
        rng = derive_rng(seed, "tlb-inputs")
        g2 = gen_isomorphic_pair(n, edge_prob, seed).gu
        extra = math.ceil(eps * g2.m)
        from .instances import random_connected_m

        g1 = random_connected_m(n, g2.m + extra, rng)
        gu = gen_testing_lb(1, 2, diameter, g1, g2)
        gk = gen_testing_lb(1, 1, diameter, g1, g2)
        cert = json.dumps(
            {"kind": "testing-lb", "n_side": n, "diameter": diameter}, sort_keys=True
        )
    Path(f"{prefix}.gu.txt").write_text(format_graph_text(gu))
    Path(f"{prefix}.gk.txt").write_text(format_graph_text(gk))
    Path(f"{prefix}.cert.json").write_text(cert + "\n")
    click.echo(f"wrote {prefix}.gu.txt {prefix}.gk.txt {prefix}.cert.json")


@main.command()
@click.option("--topology", required=True)
@click.option("--known", required=False)
@click.option("--seed", type=int, required=True)
@click.option("--k", type=int, default=None, help="number of sampled primes")
@click.option("--bandwidth", type=int, default=None, help="bits per edge per round (0 = unbounded)")
@click.option("--rounds-only", is_flag=True, help="skip the root-side decision")
@click.option("--out", type=str, default=None)
def decide(topology, known, seed, k, bandwidth, rounds_only, out):
    """Exact decision protocol on a topology against a known graph."""
    gu = _load_graph(topology)
    gk = _load_graph(known) if known else None
    if gk is None and not rounds_only:
        raise click.UsageError("--known is required unless --rounds-only")
    res = run_decision_protocol(gu, gk, _config(seed, bandwidth), k=k, rounds_only=rounds_only)
    tr = res.transcript
    payload = {
        "verdict": res.verdict,
        "rounds": tr.rounds,
        "bits": tr.total_bits,
        "max_edge_bits": tr.max_edge_bits,
        "fingerprint": json.loads(res.fingerprint.to_json()),
    }
    _emit(json.dumps(payload, sort_keys=True) + "\n", out)
    sys.exit(0 if res.verdict in ("accept", "skipped") else 1)


@main.command("test-iso")
@click.option("--topology", required=True)
@click.option("--known", required=True)
@click.option("--eps", type=float, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--s", "s_", type=int, default=None)
@click.option("--t", "t_", type=int, default=None)
@click.option("--bandwidth", type=int, default=None)
@click.option("--out", type=str, default=None)
def test_iso(topology, known, eps, seed, s_, t_, bandwidth, out):
    """Distributed property tester (known graph at the root)."""
    if not 0 < eps < 1:
        raise click.UsageError(f"eps must be in (0, 1), got {eps}")
    gu = _load_graph(topology)
    gk = _load_graph(known)
    res = run_tester(gu, gk, eps, _config(seed, bandwidth), s=s_, t=t_)
    tr = res.transcript
    payload = {
        "verdict": res.verdict,
        "rounds": tr.rounds,
        "bits": tr.total_bits,
        "s": res.params.s,
        "t": res.params.t,
        "sequences_tried": res.sequences_tried,
    }
    _emit(json.dumps(payload, sort_keys=True) + "\n", out)
    sys.exit(0)


@main.command("approx-iso")
@click.option("--topology", required=True)
@click.option("--known", required=True)
@click.option("--eps", type=float, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--s", "s_", type=int, default=None)
@click.option("--t", "t_", type=int, default=None)
@click.option("--bandwidth", type=int, default=None)
@click.option("--out", type=str, default=None)
def approx_iso(topology, known, eps, seed, s_, t_, bandwidth, out):
    """Per-node approximate-isomorphism output (known graph everywhere)."""
    if not 0 < eps < 1:
        raise click.UsageError(f"eps must be in (0, 1), got {eps}")
    gu = _load_graph(topology)
    gk = _load_graph(known)
    res = run_approx_iso(gu, gk, eps, _config(seed, bandwidth), s=s_, t=t_)
    if res.status != "ok":
        click.echo("tester rejected; no mapping emitted", err=True)
        sys.exit(3)
    lines = ["v,g(v)"]
    lines.extend(f"{v},{res.mapping(v)}" for v in range(gu.n))
    dist = hamming_distance(res.mapping.apply_to(gu), gk)
    lines.append(f"# distance,{dist}")
    _emit("\n".join(lines) + "\n", out)
    sys.exit(0)


@main.command("stream-decide")
@click.option("--known", required=True)
@click.option("--stream", "stream_path", required=True)
@click.option("--seed", type=int, required=True)
@click.option("--k", type=int, default=None)
@click.option("--out", type=str, default=None)
def stream_decide_cmd(known, stream_path, seed, k, out):
    """One-pass decision over an edge stream against a known graph."""
    gk = _load_graph(known)
    edges = parse_edge_stream(Path(stream_path).read_text())
    seed_value = derive_rng(seed, "stream-primes").getrandbits(48)
    verdict, st = stream_decide(gk, edges, seed_value, k=k)
    payload = {
        "verdict": "accept" if verdict else "reject",
        "edges": st.edges_seen,
        "space_peak_bits": st.peak_bits,
    }
    _emit(json.dumps(payload, sort_keys=True) + "\n", out)
    sys.exit(0 if verdict else 1)


@main.command("central-sim")
@click.option("--topology", required=True)
@click.option("--seed", type=int, required=True)
@click.option("--mode", type=click.Choice(["adaptive", "nonadaptive"]), default="nonadaptive")
@click.option("--q", type=int, default=30, show_default=True)
@click.option("--bandwidth", type=int, default=None)
@click.option("--out", type=str, default=None)
def central_sim(topology, seed, mode, q, bandwidth, out):
    """Run the reference query tester over the live network."""
    gu = _load_graph(topology)
    cfg = _config(seed, bandwidth)
    if mode == "adaptive":
        tester = NeighborhoodProbeTester(probes=max(1, q // 4))
        res = run_adaptive(tester, gu, cfg)
        central, _cnt = run_centralized_adaptive(tester, gu, cfg.seed)
    else:
        tester = DensityTester(q=q)
        res = run_nonadaptive(tester, gu, cfg)
        central, _cnt = run_centralized_nonadaptive(tester, gu, cfg.seed)
    payload = {
        "verdict": bool(res.verdict),
        "agrees_with_central": bool(res.verdict == central),
        "queries": res.queries,
        "rounds": res.transcript.rounds,
        "bits": res.transcript.total_bits,
    }
    _emit(json.dumps(payload, sort_keys=True) + "\n", out)
    sys.exit(0)


def _parse_sweep(spec: str) -> list[int]:
    if not spec.startswith("n="):
        raise click.UsageError("sweep must look like n=8..64")
    lo, _, hi = spec[2:].partition("..")
    lo_i, hi_i = int(lo), int(hi or lo)
    vals = []
    v = lo_i
    while v <= hi_i:
        vals.append(v)
        v *= 2
    return vals


@main.command()
@click.option("--sweep", required=True, help="e.g. n=8..64 (doubling)")
@click.option("--algo", type=click.Choice(["decide", "test-iso"]), required=True)
@click.option("--eps", type=float, default=0.3, show_default=True)
@click.option("--s", "s_", type=int, default=3, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--trials", type=int, default=3, show_default=True)
@click.option("--edge-prob", type=float, default=0.6, show_default=True)
@click.option("--out", type=str, default=None)
def bench(sweep, algo, eps, s_, seed, trials, edge_prob, out):
    """Round/bit sweeps; one CSV row per (n, seed)."""
    rows = ["n,D,s,t,rounds,bits,verdict"]
    for n in _parse_sweep(sweep):
        for trial in range(trials):
            trial_seed = derive_rng(seed, "bench", n, trial).getrandbits(32)
            pair = gen_isomorphic_pair(n, edge_prob, trial_seed)
            depth = tree_depth(bfs_tree_centrally(pair.gu, 0))
            cfg = _config(trial_seed, None)
            if algo == "decide":
                res = run_decision_protocol(pair.gu, None, cfg, rounds_only=True)
                tr = res.transcript
                rows.append(
                    f"{n},{depth},,,{tr.rounds},{tr.total_bits},{res.verdict}"
                )
            else:
                tres = run_tester(pair.gu, pair.gk, eps, cfg, s=s_)
                tr = tres.transcript
                rows.append(
                    f"{n},{depth},{tres.params.s},{tres.params.t},"
                    f"{tr.rounds},{tr.total_bits},{tres.verdict}"
                )
    _emit("\n".join(rows) + "\n", out)


if __name__ == "__main__":
    main()
