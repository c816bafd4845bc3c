"""Binary mask algebra, morphology, shifting and the RLE codec.

Masks are dense 2-D numpy bool arrays in row-major order. Pixel indices are
1-based row-major integers in {1, ..., H*W}; index 1 is the top-left pixel.
All operations are pure and never mutate their inputs.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

Mask = np.ndarray  # dtype=bool, shape (H, W)


class DimensionMismatchError(ValueError):
    """Raised when two masks with different grid dims are combined."""


def new_mask(height: int, width: int) -> Mask:
    if height < 1 or width < 1:
        raise ValueError(f"grid dims must be positive, got {height}x{width}")
    return np.zeros((height, width), dtype=bool)


def as_mask(values) -> Mask:
    """Coerce nested lists / arrays to a bool mask."""
    m = np.asarray(values, dtype=bool)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    return m


def _check_same_dims(a: Mask, b: Mask) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"mask dims differ: {a.shape} vs {b.shape}")


def area(m: Mask) -> int:
    return int(np.count_nonzero(m))


def intersect(a: Mask, b: Mask) -> Mask:
    _check_same_dims(a, b)
    return a & b


def union(a: Mask, b: Mask) -> Mask:
    _check_same_dims(a, b)
    return a | b


def diff(a: Mask, b: Mask) -> Mask:
    _check_same_dims(a, b)
    return a & ~b


def iou(a: Mask, b: Mask) -> float:
    """Intersection over union; 1.0 when both masks are empty.

    The empty/empty convention keeps a correctly-predicted absent instance
    from being scored as a miss.
    """
    _check_same_dims(a, b)
    u = area(a | b)
    if u == 0:
        return 1.0
    return area(a & b) / u


def erode(m: Mask, kernel: int) -> Mask:
    """Square-window erosion: a pixel survives iff its kernel x kernel
    neighborhood is entirely set. Out-of-bounds cells count as unset, so
    pixels within kernel//2 of the border always erode away.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError(f"erosion kernel must be odd and >= 1, got {kernel}")
    if kernel == 1:
        return m.copy()
    structure = np.ones((kernel, kernel), dtype=bool)
    return ndimage.binary_erosion(m, structure=structure, border_value=0)


def round_half_away(x: float) -> int:
    """Round to nearest integer, halves away from zero (0.5 -> 1, -0.5 -> -1)."""
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def shift(m: Mask, displacement: tuple[float, float]) -> Mask:
    """Translate a mask by (dh, dw); fractional offsets are rounded
    half-away-from-zero and pixels pushed off the grid are dropped."""
    dh, dw = displacement
    if not (math.isfinite(dh) and math.isfinite(dw)):
        raise ValueError(f"displacement must be finite, got {displacement}")
    ih, iw = round_half_away(dh), round_half_away(dw)
    h, w = m.shape
    out = np.zeros_like(m)
    src_r0, src_r1 = max(0, -ih), min(h, h - ih)
    src_c0, src_c1 = max(0, -iw), min(w, w - iw)
    if src_r0 < src_r1 and src_c0 < src_c1:
        out[src_r0 + ih : src_r1 + ih, src_c0 + iw : src_c1 + iw] = m[
            src_r0:src_r1, src_c0:src_c1
        ]
    return out


def occlusion_rate(visible: Mask, amodal: Mask) -> float:
    """1 - |visible & amodal| / |amodal|; 1.0 means fully occluded."""
    _check_same_dims(visible, amodal)
    denom = area(amodal)
    if denom == 0:
        raise ValueError("occlusion rate undefined for an empty amodal mask")
    return 1.0 - area(visible & amodal) / denom


# --- 1-based row-major pixel indices -------------------------------------

def pixel_to_rowcol(index: int, width: int) -> tuple[int, int]:
    """PixelIndex {1..H*W} -> 1-based (row, col)."""
    return (index - 1) // width + 1, (index - 1) % width + 1


def rowcol_to_pixel(row: int, col: int, width: int) -> int:
    return (row - 1) * width + col


def pixel_in_mask(m: Mask, index: int) -> bool:
    r, c = pixel_to_rowcol(index, m.shape[1])
    return bool(m[r - 1, c - 1])


def mask_pixels(m: Mask) -> np.ndarray:
    """All set pixels as ascending 1-based row-major indices."""
    return np.flatnonzero(m.ravel()) + 1


# --- RLE codec ------------------------------------------------------------
#
# Runs alternate starting with a zeros run (possibly length 0), row-major.
# Text form: "H W c0 c1 c2 ..." with decimal space-separated counts.

def rle_encode(m: Mask) -> list[int]:
    flat = m.ravel().astype(np.int8)
    if flat.size == 0:
        return []
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], boundaries, [flat.size]))
    counts = np.diff(starts).tolist()
    if flat[0] == 1:
        counts = [0] + counts
    return [int(c) for c in counts]


def rle_decode(counts: list[int], height: int, width: int) -> Mask:
    if height < 1 or width < 1:
        raise ValueError(f"grid dims must be positive, got {height}x{width}")
    total = height * width
    if any(c < 0 for c in counts):
        raise ValueError(f"negative RLE count in {counts}")
    if sum(counts) != total:
        raise ValueError(f"RLE counts sum to {sum(counts)}, expected {total}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for c in counts:
        if value:
            flat[pos : pos + c] = True
        pos += c
        value = not value
    return flat.reshape(height, width)


def rle_to_text(m: Mask) -> str:
    h, w = m.shape
    return " ".join(str(v) for v in [h, w, *rle_encode(m)])


def rle_from_text(text: str) -> Mask:
    fields = text.split()
    if len(fields) < 3:
        raise ValueError(f"RLE text needs 'H W c0 ...', got {text!r}")
    try:
        values = [int(f) for f in fields]
    except ValueError as exc:
        raise ValueError(f"non-integer field in RLE text {text!r}") from exc
    h, w = values[0], values[1]
    return rle_decode(values[2:], h, w)
