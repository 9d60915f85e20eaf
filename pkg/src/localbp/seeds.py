"""Deterministic per-stream seed derivation.

Replica r of an experiment with master seed s always runs from
derive_seed(s, r), so results do not depend on how replicas are spread
over workers. The mixer is the splitmix64 finalizer; constants below are
fixed so independent implementations can reproduce the streams.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def derive_seed(master: int, stream_id: int) -> int:
    """Mix (master, stream_id) into a 64-bit seed with full avalanche."""
    z = (int(master) + (int(stream_id) + 1) * _GOLDEN) & _MASK
    z ^= z >> 30
    z = (z * _MIX1) & _MASK
    z ^= z >> 27
    z = (z * _MIX2) & _MASK
    z ^= z >> 31
    return z
