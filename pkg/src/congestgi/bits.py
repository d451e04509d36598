"""Bit-string payloads and fragmentation.

Payloads on the simulated wire are strings of '0'/'1' characters, so message
sizes are literal and the bandwidth check is `len(payload)`.
"""

from __future__ import annotations

from typing import List


def uint_to_bits(value: int, width: int) -> str:
    if value < 0 or value >= (1 << width):
        raise ValueError(f"value {value} does not fit in {width} bits")
    return format(value, f"0{width}b") if width else ""

def bits_to_uint(bits: str) -> int:
    return int(bits, 2) if bits else 0


def bit_width(limit: int) -> int:
    """Bits needed to represent values in [0, limit)."""
    if limit <= 1:
        return 1
    return (limit - 1).bit_length()


def label_to_bits(label: tuple[int, ...]) -> str:
    return "".join("1" if b else "0" for b in label)


def bits_to_label(bits: str) -> tuple[int, ...]:
    return tuple(1 if ch == "1" else 0 for ch in bits)


def fragment(payload: str, bandwidth: int, header_bits: int = 8) -> List[str]:
    """Split a payload into bodies of at most bandwidth - header_bits bits.

    The caller owns the header content; concatenating the returned bodies
    reconstructs the payload.  An empty payload yields no fragments.
    """
    if bandwidth <= header_bits:
        raise ValueError(
            f"bandwidth {bandwidth} leaves no room after {header_bits} header bits"
        )
    if not payload:
        return []
    body = bandwidth - header_bits
    return [payload[i : i + body] for i in range(0, len(payload), body)]
