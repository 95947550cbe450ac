"""Deterministic 64-bit seed derivation.

Every randomized stage derives its generator from a splitmix64 mix of the
user-facing base seed and the integers identifying the stage (cell indices,
replication index, a stream tag).  A single row of any experiment is thus
reproducible in isolation and independent of worker scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _as_int(part) -> int:
    if isinstance(part, str):
        return int.from_bytes(part.encode("utf-8"), "little")
    return int(part)


def mix_seed(*parts) -> int:
    """Fold integers/strings into one 64-bit seed."""
    acc = 0x243F6A8885A308D3
    for part in parts:
        acc = _splitmix64(acc ^ (_as_int(part) & _MASK64))
    return acc


def rng_for(*parts) -> np.random.Generator:
    """Fresh PCG64 generator keyed by the given parts."""
    return np.random.default_rng(mix_seed(*parts))
