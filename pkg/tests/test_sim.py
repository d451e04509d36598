import json

import pytest
from hypothesis import given, strategies as st

from congestgi.bits import bits_to_uint, fragment, uint_to_bits, bit_width
from congestgi.graphs import Graph
from congestgi.sim import (
    UNBOUNDED,
    BandwidthViolation,
    NetworkConfig,
    RoundLimitExceeded,
    SimError,
    default_bandwidth,
    run,
)


def two_nodes():
    return Graph(2, [(0, 1)])


def test_send_one_bit_then_halt_takes_two_rounds():
    def program(ctx):
        ctx.send(0, "1")
        yield
        assert ctx.inbox.get(0) == "1"
        return "done"

    tr = run(two_nodes(), program, NetworkConfig(seed=1))
    assert tr.rounds == 2
    assert tr.total_bits == 2
    assert tr.outputs == {0: "done", 1: "done"}


def test_oversized_send_raises_with_location():
    def program(ctx):
        if ctx.node == 0:
            ctx.send(0, "1" * 33)
        yield
        return None

    with pytest.raises(BandwidthViolation) as err:
        run(two_nodes(), program, NetworkConfig(bandwidth_bits=32, seed=0))
    assert err.value.round_no == 1
    assert (err.value.src, err.value.dst) == (0, 1)
    assert err.value.bits == 33


def test_double_send_on_one_edge_rejected():
    def program(ctx):
        if ctx.node == 0:
            ctx.send(0, "1")
            ctx.send(0, "0")
        yield
        return None

    with pytest.raises(SimError):
        run(two_nodes(), program, NetworkConfig(seed=0))


def test_unbounded_mode_allows_huge_payloads():
    def program(ctx):
        if ctx.node == 0:
            ctx.send(0, "1" * 10_000)
            yield
            return "sent"
        yield
        return len(ctx.inbox.get(0, ""))

    tr = run(two_nodes(), program, NetworkConfig(bandwidth_bits=UNBOUNDED, seed=0))
    assert tr.outputs[1] == 10_000


def test_bandwidth_below_id_width_rejected():
    g = Graph(40, [(i, i + 1) for i in range(39)])
    with pytest.raises(SimError):
        NetworkConfig(bandwidth_bits=4, seed=0).effective_bandwidth(g.n)


def test_default_bandwidth_formula():
    assert default_bandwidth(8) == 32
    assert default_bandwidth(64) == 32
    assert default_bandwidth(10_000) == 4 * 14


def test_round_limit():
    def program(ctx):
        while True:
            yield

    with pytest.raises(RoundLimitExceeded):
        run(two_nodes(), program, NetworkConfig(max_rounds=10, seed=0))


def test_delivery_is_next_round_never_earlier_or_later():
    observed = {}

    def program(ctx):
        if ctx.node == 0:
            yield  # round 1: idle
            ctx.send(0, "101")  # round 2 send
            yield
            yield
            return None
        for r in (1, 2, 3):
            if ctx.inbox:
                observed[r] = dict(ctx.inbox)
            yield
        return None

    run(two_nodes(), program, NetworkConfig(seed=0))
    assert observed == {3: {0: "101"}}


def test_determinism_bit_identical_transcripts():
    g = Graph(5, [(0, 1), (0, 2), (1, 3), (2, 4), (3, 4)])

    def program(ctx):
        for _ in range(4):
            bits = format(ctx.rng.getrandbits(8), "08b")
            for p in ctx.ports:
                ctx.send(p, bits)
            yield
        return ctx.rng.randrange(100)

    cfg = NetworkConfig(seed=42)
    t1 = run(g, program, cfg)
    t2 = run(g, program, cfg)
    assert t1.to_json() == t2.to_json()
    assert t1.events == t2.events
    t3 = run(g, program, NetworkConfig(seed=43))
    assert t3.to_json() != t1.to_json()


def test_conservation_total_equals_event_sum():
    g = Graph(4, [(0, 1), (1, 2), (2, 3)])

    def program(ctx):
        for _ in range(3):
            for p in ctx.ports:
                ctx.send(p, "1101")
            yield
        return None

    tr = run(g, program, NetworkConfig(seed=7))
    assert tr.total_bits == sum(b for _r, _s, _d, b in tr.events)
    assert tr.max_edge_bits == max(b for _r, _s, _d, b in tr.events)


def test_node_context_surface_is_isolated():
    seen = {}

    def program(ctx):
        seen[ctx.node] = sorted(
            a for a in dir(ctx) if not a.startswith("_")
        )
        yield
        return None

    run(two_nodes(), program, NetworkConfig(seed=0))
    # nothing on the context exposes the topology or other nodes
    assert seen[0] == [
        "degree", "inbox", "input", "node", "ports", "rng", "scratch",
        "send", "shared_rng",
    ]


def test_transcript_serialization():
    def program(ctx):
        ctx.send(0, "11")
        yield
        return "accept"

    tr = run(two_nodes(), program, NetworkConfig(seed=0))
    data = json.loads(tr.to_json())
    assert data["rounds"] == 2
    assert data["outputs"] == [
        {"node": 0, "verdict": "accept"},
        {"node": 1, "verdict": "accept"},
    ]
    csv = tr.events_csv()
    assert csv.splitlines()[0] == "round,src,dst,bits"
    assert len(csv.splitlines()) == 3


# -- wire helpers ------------------------------------------------------------

def test_fragment_spec_arithmetic():
    bodies = fragment("1" * 100, 40, header_bits=8)
    assert [len(b) for b in bodies] == [32, 32, 32, 4]
    assert "".join(bodies) == "1" * 100


def test_fragment_edge_cases():
    assert fragment("", 40) == []
    assert fragment("1" * 32, 40, 8) == ["1" * 32]
    with pytest.raises(ValueError):
        fragment("1", 8, 8)


@given(st.integers(0, 2**20), st.integers(1, 24))
def test_uint_roundtrip(value, width):
    if value < (1 << width):
        assert bits_to_uint(uint_to_bits(value, width)) == value


def test_bit_width():
    assert bit_width(1) == 1
    assert bit_width(2) == 1
    assert bit_width(3) == 2
    assert bit_width(256) == 8
    assert bit_width(257) == 9
