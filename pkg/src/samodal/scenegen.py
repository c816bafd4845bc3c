"""Synthetic occlusion scenes with exact visible/amodal ground truth.

Objects are rigid rect/ellipse stencils moving on real-valued trajectories;
per frame the anchor position is rounded with the same half-away-from-zero
rule the mask shift uses, so ground-truth motion and shift-based tracking
agree to the pixel. Frames are label grids: per-pixel topmost visible
instance id, 0 for background.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import masks
from .masks import Mask, round_half_away
from .rng import SALT_SCENE, SplitMix64, derive


@dataclass(frozen=True)
class Shape:
    """kind: 'rect' (h x w pixels) or 'ellipse' (semi-axes a, b)."""

    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind not in ("rect", "ellipse"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"shape extents must be positive, got {self.a}, {self.b}")
        if self.kind == "rect" and (self.a != int(self.a) or self.b != int(self.b)):
            raise ValueError(f"rect extents must be whole pixels, got {self.a}x{self.b}")

    def stencil(self) -> np.ndarray:
        """Boolean footprint; the anchor is the top-left of this bounding box."""
        if self.kind == "rect":
            return np.ones((int(self.a), int(self.b)), dtype=bool)
        ra, rb = int(self.a), int(self.b)
        dh = np.arange(-ra, ra + 1)[:, None]
        dw = np.arange(-rb, rb + 1)[None, :]
        return (dh / self.a) ** 2 + (dw / self.b) ** 2 <= 1.0


@dataclass(frozen=True)
class ObjectSpec:
    instance: int
    shape: Shape
    start: tuple[float, float]
    depth: int
    class_label: int = 0
    velocity: tuple[float, float] = (0.0, 0.0)
    velocities: tuple[tuple[float, float], ...] | None = None  # per-step overrides

    def step(self, t: int) -> tuple[float, float]:
        """Displacement applied between frame t and t+1 (1-based t)."""
        if self.velocities is not None:
            return self.velocities[t - 1]
        return self.velocity


@dataclass(frozen=True)
class SceneSpec:
    dims: tuple[int, int]
    frames: int
    objects: tuple[ObjectSpec, ...]
    seed: int = 0
    name: str = "scene"

    def __post_init__(self):
        h, w = self.dims
        if h < 1 or w < 1 or self.frames < 1:
            raise ValueError("scene needs positive dims and at least one frame")
        ids = [o.instance for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate object ids in {ids}")
        if any(i < 1 for i in ids):
            raise ValueError("object ids must be >= 1 (0 is background)")
        depths = [o.depth for o in self.objects]
        if len(set(depths)) != len(depths):
            raise ValueError(f"duplicate depths in {depths}")
        for o in self.objects:
            if o.velocities is not None and len(o.velocities) < self.frames - 1:
                raise ValueError(
                    f"object {o.instance}: need {self.frames - 1} velocity steps"
                )


@dataclass
class ObjectTrack:
    """Ground truth for one object: per-frame anchors and masks."""

    spec: ObjectSpec
    anchors: list[tuple[int, int]]
    amodal: list[Mask]
    visible: list[Mask]


@dataclass
class SyntheticVideo:
    name: str
    dims: tuple[int, int]
    frames: list[np.ndarray]  # int32 label grids, one per frame
    objects: list[ObjectTrack]  # sorted by instance id
    spec: SceneSpec | None = None

    @property
    def length(self) -> int:
        return len(self.frames)

    def track(self, instance: int) -> ObjectTrack:
        for obj in self.objects:
            if obj.spec.instance == instance:
                return obj
        raise KeyError(f"no object with id {instance}")


def _place(stencil: np.ndarray, anchor: tuple[int, int], dims: tuple[int, int]) -> Mask:
    h, w = dims
    sh, sw = stencil.shape
    ah, aw = anchor
    out = np.zeros((h, w), dtype=bool)
    r0, c0 = max(0, ah), max(0, aw)
    r1, c1 = min(h, ah + sh), min(w, aw + sw)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = stencil[r0 - ah : r1 - ah, c0 - aw : c1 - aw]
    return out


def generate(spec: SceneSpec) -> SyntheticVideo:
    """Render a scene spec to label-grid frames plus per-object ground truth."""
    h, w = spec.dims
    objects = sorted(spec.objects, key=lambda o: o.instance)
    tracks: list[ObjectTrack] = []
    for obj in objects:
        stencil = obj.shape.stencil()
        pos = [float(obj.start[0]), float(obj.start[1])]
        anchors, amodal = [], []
        for t in range(1, spec.frames + 1):
            anchor = (round_half_away(pos[0]), round_half_away(pos[1]))
            anchors.append(anchor)
            amodal.append(_place(stencil, anchor, spec.dims))
            if t < spec.frames:
                dh, dw = obj.step(t)
                pos[0] += dh
                pos[1] += dw
        tracks.append(ObjectTrack(obj, anchors, amodal, []))

    # painter's algorithm: visible = amodal minus closer objects' amodal
    frames = []
    for t in range(spec.frames):
        label = np.zeros((h, w), dtype=np.int32)
        for track in sorted(tracks, key=lambda tr: tr.spec.depth):
            label[track.amodal[t]] = track.spec.instance
        frames.append(label)
        for track in tracks:
            track.visible.append(track.amodal[t] & (label == track.spec.instance))
    return SyntheticVideo(spec.name, spec.dims, frames, tracks, spec)


@dataclass
class OcclusionReport:
    """Per-instance occlusion statistics over a video."""

    instance: int
    rates: list[float | None]  # None where the object is entirely off-canvas
    fully_occluded: list[bool]
    off_canvas: list[bool]
    streaks: list[tuple[int, int]] = field(default_factory=list)  # (start t, length)

    @property
    def max_rate(self) -> float:
        defined = [r for r in self.rates if r is not None]
        return max(defined) if defined else 0.0

    @property
    def always_visible(self) -> bool:
        return not any(self.fully_occluded) and not any(self.off_canvas)


def occlusion_report(video: SyntheticVideo) -> dict[int, OcclusionReport]:
    reports = {}
    for track in video.objects:
        rates: list[float | None] = []
        fully: list[bool] = []
        off: list[bool] = []
        for t in range(video.length):
            if masks.area(track.amodal[t]) == 0:
                rates.append(None)
                fully.append(False)
                off.append(True)
                continue
            rate = masks.occlusion_rate(track.visible[t], track.amodal[t])
            rates.append(rate)
            fully.append(rate == 1.0)
            off.append(False)
        streaks = []
        run = 0
        for t, flag in enumerate(fully):
            if flag:
                run += 1
            elif run:
                streaks.append((t - run + 1, run))
                run = 0
        if run:
            streaks.append((len(fully) - run + 1, run))
        reports[track.spec.instance] = OcclusionReport(
            track.spec.instance, rates, fully, off, streaks
        )
    return reports


def random_scene_spec(
    seed: int,
    dims: tuple[int, int] = (64, 64),
    frames: int = 12,
    n_objects: int = 4,
    min_size: int = 6,
    max_size: int = 14,
    max_speed: int = 2,
    integer_motion: bool = True,
    name: str | None = None,
) -> SceneSpec:
    """Draw a random scene spec: mixed rect/ellipse objects with constant
    velocities and unique depths. Deterministic given the seed."""
    h, w = dims
    rng = SplitMix64(derive(seed, SALT_SCENE))
    objects = []
    for i in range(1, n_objects + 1):
        kind = "rect" if rng.below(2) == 0 else "ellipse"
        if kind == "rect":
            shape = Shape(
                "rect",
                min_size + rng.below(max_size - min_size + 1),
                min_size + rng.below(max_size - min_size + 1),
            )
        else:
            shape = Shape(
                "ellipse",
                (min_size + rng.below(max_size - min_size + 1)) / 2.0,
                (min_size + rng.below(max_size - min_size + 1)) / 2.0,
            )
        sh, sw = shape.stencil().shape
        start_h = float(rng.below(max(1, h - sh)))
        start_w = float(rng.below(max(1, w - sw)))
        if integer_motion:
            vel = (
                float(rng.below(2 * max_speed + 1) - max_speed),
                float(rng.below(2 * max_speed + 1) - max_speed),
            )
        else:
            vel = (
                (rng.uniform() * 2 - 1) * max_speed,
                (rng.uniform() * 2 - 1) * max_speed,
            )
        objects.append(
            ObjectSpec(
                instance=i,
                shape=shape,
                start=(start_h, start_w),
                depth=i,
                class_label=1 + rng.below(3),
                velocity=vel,
            )
        )
    return SceneSpec(
        dims=dims,
        frames=frames,
        objects=tuple(objects),
        seed=seed,
        name=name or f"scene{seed}",
    )
