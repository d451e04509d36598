"""Bandwidth-limited synchronous network simulator and distributed
graph-isomorphism protocols: exact decision, property testing, approximate
isomorphism recovery, a one-pass streaming variant, benchmark instance
generators, and a round/bit measurement harness."""

from .graphs import Graph, GraphError, hamming_distance
from .labels import (
    Bijection,
    c_label,
    is_beta_separating,
    is_label_consistent,
    label_class,
    msb,
    sample_max_consistent,
)
from .oracles import backtracking_iso, brute_iso, min_bijection_distance
from .sim import NetworkConfig, Transcript, UNBOUNDED

__all__ = [
    "Graph",
    "GraphError",
    "hamming_distance",
    "Bijection",
    "c_label",
    "label_class",
    "msb",
    "is_beta_separating",
    "is_label_consistent",
    "sample_max_consistent",
    "brute_iso",
    "backtracking_iso",
    "min_bijection_distance",
    "NetworkConfig",
    "Transcript",
    "UNBOUNDED",
]

__version__ = "0.1.0"
