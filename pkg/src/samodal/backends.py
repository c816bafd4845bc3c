"""Model interfaces for the pipeline and their oracle/noisy reference
implementations.

Three roles close the loop: a visible-instance segmenter, a point-prompted
amodal segmenter, and a point tracker. The oracles answer from synthetic
ground truth, which makes every pipeline behavior exactly checkable; the
noisy variants add seeded, per-decision-keyed degradation so failure paths
can be forced deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import ndimage

from . import masks
from .masks import Mask
from .rng import SALT_TRACKER_NOISE, SALT_VIS_DROP, SplitMix64, derive
from .sampling import PointTuple
from .scenegen import SyntheticVideo


class BackendError(RuntimeError):
    """A backend failed; carries the frame index for diagnostics."""

    def __init__(self, message: str, frame: int | None = None):
        super().__init__(message)
        self.frame = frame


@dataclass
class VisiblePrediction:
    instance: int
    mask: Mask
    score: float = 1.0
    class_label: int | None = None


@dataclass
class TrackResult:
    """Predicted point positions at t with per-point binary occlusion flags
    (1 = occluded). `clipped` marks points that were pulled back onto the
    grid; it is diagnostic metadata, not part of the wire contract."""

    points: tuple[int, ...]
    occluded: tuple[int, ...]
    clipped: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.points) != len(self.occluded):
            raise ValueError("points and occlusion flags must align")
        if not self.clipped:
            self.clipped = (0,) * len(self.points)


class VisibleSegmenter(Protocol):
    def predict(self, t: int, frame: np.ndarray) -> list[VisiblePrediction]: ...


class AmodalSegmenter(Protocol):
    def predict(
        self, t: int, frame: np.ndarray, prompt: PointTuple, declared: int | None = None
    ) -> Mask: ...


class PointTracker(Protocol):
    def track(
        self, t: int, frame: np.ndarray, queries: PointTuple, instance: int
    ) -> TrackResult: ...


@dataclass
class BackendSet:
    visible: VisibleSegmenter
    amodal: AmodalSegmenter
    tracker: PointTracker


# --- visible segmenters ----------------------------------------------------

class OracleVisible:
    """Emits ground-truth visible masks.

    Instances whose visible fraction (visible area / amodal area) is <= the
    threshold are suppressed, emulating a detector that misses heavily
    occluded objects; the default 0.0 suppresses only fully occluded ones.
    """

    def __init__(self, video: SyntheticVideo, min_visible_fraction: float = 0.0):
        self.video = video
        self.min_visible_fraction = min_visible_fraction

    def predict(self, t: int, frame: np.ndarray) -> list[VisiblePrediction]:
        out = []
        for track in self.video.objects:
            amodal_area = masks.area(track.amodal[t - 1])
            if amodal_area == 0:
                continue
            visible = track.visible[t - 1]
            if masks.area(visible) / amodal_area <= self.min_visible_fraction:
                continue
            out.append(
                VisiblePrediction(track.spec.instance, visible, 1.0, track.spec.class_label)
            )
        return out


class NoisyVisible:
    """OracleVisible degraded two ways: whole instances dropped with
    probability `drop_rate` (keyed per frame and instance, so drops are
    order-independent), and masks dilated by a square radius so sampled
    prompts can bleed past the true instance boundary."""

    def __init__(
        self,
        video: SyntheticVideo,
        drop_rate: float,
        dilate: int = 0,
        seed: int = 0,
    ):
        if not 0.0 <= drop_rate <= 1.0:
            raise ValueError(f"drop rate must be in [0,1], got {drop_rate}")
        if dilate < 0:
            raise ValueError(f"dilation radius must be >= 0, got {dilate}")
        self.oracle = OracleVisible(video)
        self.drop_rate = drop_rate
        self.dilate = dilate
        self.seed = seed
        self._structure = (
            np.ones((2 * dilate + 1, 2 * dilate + 1), dtype=bool) if dilate else None
        )

    def predict(self, t: int, frame: np.ndarray) -> list[VisiblePrediction]:
        out = []
        for pred in self.oracle.predict(t, frame):
            if self.drop_rate > 0.0:
                u = SplitMix64(derive(self.seed, SALT_VIS_DROP, t, pred.instance)).uniform()
                if u < self.drop_rate:
                    continue
            mask = pred.mask
            if self._structure is not None:
                mask = ndimage.binary_dilation(mask, structure=self._structure)
            out.append(VisiblePrediction(pred.instance, mask, pred.score, pred.class_label))
        return out


# --- amodal segmenters -----------------------------------------------------

class OracleAmodal:
    """Returns the ground-truth amodal mask of the instance the pipeline
    declared. The declared id never crosses the external protocol; it is an
    oracle-only side channel."""

    def __init__(self, video: SyntheticVideo):
        self.video = video

    def predict(
        self, t: int, frame: np.ndarray, prompt: PointTuple, declared: int | None = None
    ) -> Mask:
        if declared is None:
            raise BackendError("oracle amodal segmenter needs the declared instance", t)
        try:
            track = self.video.track(declared)
        except KeyError:
            return np.zeros(self.video.dims, dtype=bool)
        return track.amodal[t - 1]


class ConfusableOracleAmodal:
    """Resolves ownership from the prompt alone: the first prompt point
    landing on a visibly-owned pixel decides which instance's amodal mask is
    returned. Prompts that stray onto a neighbor reproduce the
    instance-confusion failure mode; all-background prompts yield an empty
    mask."""

    def __init__(self, video: SyntheticVideo):
        self.video = video

    def predict(
        self, t: int, frame: np.ndarray, prompt: PointTuple, declared: int | None = None
    ) -> Mask:
        h, w = self.video.dims
        label = self.video.frames[t - 1]
        for p in prompt.points:
            r, c = masks.pixel_to_rowcol(p, w)
            owner = int(label[r - 1, c - 1])
            if owner != 0:
                return self.video.track(owner).amodal[t - 1]
        return np.zeros((h, w), dtype=bool)


# --- point trackers ---------------------------------------------------------

def _clip_rowcol(r: int, c: int, dims: tuple[int, int]) -> tuple[int, int, bool]:
    h, w = dims
    rc, cc = min(max(r, 1), h), min(max(c, 1), w)
    return rc, cc, (rc != r or cc != c)


class OracleTracker:
    """Moves query points by the instance's ground-truth anchor displacement
    between t-1 and t; predicted positions are clipped to the grid and the
    occlusion flag reports whether the landing pixel is visible for that
    instance."""

    def __init__(self, video: SyntheticVideo):
        self.video = video

    def _predict_rowcol(
        self, t: int, queries: PointTuple, instance: int
    ) -> list[tuple[int, int]]:
        track = self.video.track(instance)
        (ph, pw), (ah, aw) = track.anchors[t - 2], track.anchors[t - 1]
        dh, dw = ah - ph, aw - pw
        w = self.video.dims[1]
        return [
            (r + dh, c + dw)
            for r, c in (masks.pixel_to_rowcol(p, w) for p in queries.points)
        ]

    def track(
        self, t: int, frame: np.ndarray, queries: PointTuple, instance: int
    ) -> TrackResult:
        if t < 2:
            raise BackendError("tracking needs a previous frame", t)
        visible = self.video.track(instance).visible[t - 1]
        w = self.video.dims[1]
        points, occluded, clipped = [], [], []
        for r, c in self._predict_rowcol(t, queries, instance):
            rc, cc, was_clipped = _clip_rowcol(r, c, self.video.dims)
            points.append(masks.rowcol_to_pixel(rc, cc, w))
            occluded.append(0 if visible[rc - 1, cc - 1] else 1)
            clipped.append(int(was_clipped))
        return TrackResult(tuple(points), tuple(occluded), tuple(clipped))


class NoisyTracker(OracleTracker):
    """OracleTracker plus per-point Gaussian position noise of scale sigma,
    keyed per (frame, instance, point) so draws are order-independent.
    sigma = 0 is bit-identical to the oracle."""

    def __init__(self, video: SyntheticVideo, sigma: float, seed: int = 0):
        super().__init__(video)
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        self.sigma = sigma
        self.seed = seed

    def track(
        self, t: int, frame: np.ndarray, queries: PointTuple, instance: int
    ) -> TrackResult:
        if self.sigma == 0.0:
            return super().track(t, frame, queries, instance)
        if t < 2:
            raise BackendError("tracking needs a previous frame", t)
        visible = self.video.track(instance).visible[t - 1]
        w = self.video.dims[1]
        points, occluded, clipped = [], [], []
        for k, (r, c) in enumerate(self._predict_rowcol(t, queries, instance)):
            rng = SplitMix64(derive(self.seed, SALT_TRACKER_NOISE, t, instance, k))
            r += masks.round_half_away(self.sigma * rng.gauss())
            c += masks.round_half_away(self.sigma * rng.gauss())
            rc, cc, was_clipped = _clip_rowcol(r, c, self.video.dims)
            points.append(masks.rowcol_to_pixel(rc, cc, w))
            occluded.append(0 if visible[rc - 1, cc - 1] else 1)
            clipped.append(int(was_clipped))
        return TrackResult(tuple(points), tuple(occluded), tuple(clipped))


# --- CLI spec parsing --------------------------------------------------------

def build_visible(spec: str, video: SyntheticVideo, seed: int) -> VisibleSegmenter:
    """Parse `oracle[:v]` or `noisy:<drop>[:<dilate>]`."""
    parts = spec.split(":")
    if parts[0] == "oracle":
        v = float(parts[1]) if len(parts) > 1 else 0.0
        return OracleVisible(video, v)
    if parts[0] == "noisy":
        drop = float(parts[1]) if len(parts) > 1 else 0.0
        dilate = int(parts[2]) if len(parts) > 2 else 0
        return NoisyVisible(video, drop, dilate, seed)
    raise ValueError(f"unknown visible segmenter spec {spec!r}")


def build_amodal(spec: str, video: SyntheticVideo) -> AmodalSegmenter:
    """Parse `oracle` or `confusable`."""
    if spec == "oracle":
        return OracleAmodal(video)
    if spec == "confusable":
        return ConfusableOracleAmodal(video)
    raise ValueError(f"unknown amodal segmenter spec {spec!r}")


def build_tracker(spec: str, video: SyntheticVideo, seed: int) -> PointTracker:
    """Parse `oracle` or `noisy:<sigma>`."""
    parts = spec.split(":")
    if parts[0] == "oracle":
        return OracleTracker(video)
    if parts[0] == "noisy":
        sigma = float(parts[1]) if len(parts) > 1 else 0.0
        return NoisyTracker(video, sigma, seed)
    raise ValueError(f"unknown tracker spec {spec!r}")
