"""Point-prompt selection from visible masks.

Three strategies: uniform random over the mask, highest-saliency pixels, and
random-after-erosion (which keeps prompts away from instance borders).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import masks
from .masks import Mask
from .rng import SplitMix64


@dataclass(frozen=True)
class PointTuple:
    """K pixel indices (1-based row-major) with binary labels, all positive here."""

    points: tuple[int, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.points) != len(self.labels):
            raise ValueError("points and labels must have equal length")
        if len(self.points) < 1:
            raise ValueError("point tuple must not be empty")

    @property
    def k(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class SamplingStrategy:
    """variant: 'random' | 'saliency' | 'erosion' (kernel applies to erosion)."""

    variant: str
    kernel: int = 3

    def __post_init__(self):
        if self.variant not in ("random", "saliency", "erosion"):
            raise ValueError(f"unknown sampling strategy {self.variant!r}")
        if self.variant == "erosion" and (self.kernel < 3 or self.kernel % 2 == 0):
            raise ValueError(f"erosion kernel must be odd and >= 3, got {self.kernel}")

    @classmethod
    def parse(cls, text: str) -> "SamplingStrategy":
        """Parse CLI form: random | saliency | erosion[:K]."""
        if text == "erosion":
            return cls("erosion", 3)
        if text.startswith("erosion:"):
            return cls("erosion", int(text.split(":", 1)[1]))
        return cls(text)

    def __str__(self) -> str:
        if self.variant == "erosion":
            return f"erosion:{self.kernel}"
        return self.variant


RANDOM = SamplingStrategy("random")
SALIENCY = SamplingStrategy("saliency")


def saliency_map(m: Mask) -> np.ndarray:
    """Chebyshev distance to the nearest unset pixel or image border.

    Interior pixels score high, border-adjacent pixels score 1, pixels outside
    the mask score 0.
    """
    h, w = m.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = m
    dist = ndimage.distance_transform_cdt(padded, metric="chessboard")
    return dist[1:-1, 1:-1].astype(np.float64)


def sample_points(m: Mask, k: int, strategy: SamplingStrategy, seed: int) -> PointTuple:
    """Draw a K-tuple of prompt points from a visible mask.

    Deterministic given (mask, k, strategy, seed). Random draws are without
    replacement unless the candidate pool is smaller than K. Erosion falls
    back to the uneroded mask when nothing survives, so heavily occluded
    slivers still produce a prompt.
    """
    if k < 1:
        raise ValueError(f"K must be positive, got {k}")
    if masks.area(m) == 0:
        raise ValueError("cannot sample points from an empty mask")

    if strategy.variant == "saliency":
        scores = saliency_map(m).ravel()
        candidates = masks.mask_pixels(m)
        # highest saliency first, ties broken by smallest pixel index
        ranked = sorted(candidates, key=lambda p: (-scores[p - 1], p))
        chosen = [int(ranked[i % len(ranked)]) for i in range(k)]
        return PointTuple(tuple(chosen), (1,) * k)

    pool_mask = m
    if strategy.variant == "erosion":
        eroded = masks.erode(m, strategy.kernel)
        if masks.area(eroded) > 0:
            pool_mask = eroded
    pool = [int(p) for p in masks.mask_pixels(pool_mask)]

    rng = SplitMix64(seed)
    if len(pool) >= k:
        chosen = rng.choose_without_replacement(pool, k)
    else:
        chosen = [pool[rng.below(len(pool))] for _ in range(k)]
    return PointTuple(tuple(chosen), (1,) * k)
