"""RLE text codec and SplitMix64, re-implemented from PROTOCOL.md."""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SALT_VIS_DROP = 2


def rle_decode(text: str) -> np.ndarray:
    fields = text.split()
    if len(fields) < 3:
        raise ValueError(f"RLE text needs 'H W c0 ...', got {text!r}")
    values = [int(f) for f in fields]
    h, w, counts = values[0], values[1], values[2:]
    if any(c < 0 for c in counts) or sum(counts) != h * w:
        raise ValueError(f"bad RLE counts for {h}x{w}: {counts}")
    flat = np.zeros(h * w, dtype=bool)
    pos, value = 0, False
    for c in counts:
        if value:
            flat[pos : pos + c] = True
        pos += c
        value = not value
    return flat.reshape(h, w)


def rle_encode(mask: np.ndarray) -> str:
    h, w = mask.shape
    flat = mask.ravel().astype(np.int8)
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], boundaries, [flat.size]))
    counts = np.diff(starts).tolist()
    if flat[0] == 1:
        counts = [0] + counts
    return " ".join(str(v) for v in [h, w, *counts])


def mix64(x: int) -> int:
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive(seed: int, *keys: int) -> int:
    h = seed & MASK64
    for k in keys:
        h = mix64(h ^ (k & MASK64))
    return h


def first_uniform(seed: int) -> float:
    """First uniform draw of SplitMix64(seed), as the engine's stream does."""
    state = (seed + GOLDEN) & MASK64
    return (mix64(state) >> 11) * 2.0**-53


def drop_instance(seed: int, t: int, instance: int, drop_rate: float) -> bool:
    return first_uniform(derive(seed, SALT_VIS_DROP, t, instance)) < drop_rate
