"""Deterministic, splittable random streams.

Every source of randomness in the package is a `random.Random` derived from
a 64-bit master seed plus a tuple of string/int tags.  Streams with distinct
tags are independent for all practical purposes, and the derivation is stable
across platforms and Python versions (it goes through SHA-256, not `hash()`).
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(master: int, *tags: object) -> int:
    """Collapse (master, tags...) into a 64-bit child seed."""
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for tag in tags:
        h.update(b"\x1f")
        h.update(repr(tag).encode())
    return int.from_bytes(h.digest()[:8], "big")


def derive_rng(master: int, *tags: object) -> random.Random:
    """A fresh `random.Random` keyed by (master, tags...)."""
    return random.Random(derive_seed(master, *tags))
