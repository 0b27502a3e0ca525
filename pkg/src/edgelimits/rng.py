"""Reproducible random streams.

All randomness in the package flows from a single 64-bit seed through the
Philox counter-based bit generator.  Stream splitting is explicit: stream i of
seed s is ``Philox(key=s).jumped(i)``, where each jump advances the counter by
2**128 draws, so distinct stream ids can never overlap.  Parallel workers get
consecutive stream ids; re-running with the same (seed, workers) reproduces
every draw bit for bit.
"""
from __future__ import annotations

import numpy as np

__all__ = ["stream", "spawn_streams"]


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Return generator number `stream_id` of the family keyed by `seed`."""
    if stream_id < 0:
        raise ValueError(f"stream_id must be >= 0, got {stream_id}")
    bg = np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF)
    if stream_id:
        bg = bg.jumped(stream_id)
    return np.random.Generator(bg)


def spawn_streams(seed: int, count: int) -> list[np.random.Generator]:
    """Streams 0..count-1 for `seed`, e.g. one per worker."""
    return [stream(seed, i) for i in range(count)]
