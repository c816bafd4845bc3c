"""Per-frame fusion of the prompt-segmentation path and the tracking fallback.

Each frame: the visible segmenter proposes instances; every visible instance
is point-prompted through the amodal segmenter and stored to memory; every
previously-seen-but-missing instance is served by the point tracker, its last
amodal mask shifted along the mean predicted point displacement. The union of
both paths is the frame's amodal prediction set. Strictly online: frame t
never looks past t.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import masks
from .backends import BackendError, BackendSet, TrackResult
from .masks import Mask
from .memory import PointMemory
from .rng import SALT_SAMPLING, derive
from .sampling import RANDOM, PointTuple, SamplingStrategy, sample_points
from .scenegen import SyntheticVideo

SOURCE_VISIBLE = "visible"
SOURCE_TRACKED = "tracked"


@dataclass(frozen=True)
class PipelineConfig:
    k: int = 1
    strategy: SamplingStrategy = RANDOM
    seed: int = 0
    max_occlusion: int | None = None
    track_from: str = "tracked"  # or "last-visible"
    require_occluded_flag: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"K must be positive, got {self.k}")
        if self.track_from not in ("tracked", "last-visible"):
            raise ValueError(f"unknown track-from mode {self.track_from!r}")


@dataclass
class Prediction:
    instance: int
    mask: Mask
    source: str
    score: float
    class_label: int | None = None


@dataclass
class FrameOutput:
    t: int
    predictions: list[Prediction]


@dataclass
class RunResult:
    outputs: list[FrameOutput]
    meta: dict = field(default_factory=dict)


def _mean_displacement(queries: PointTuple, result: TrackResult, width: int) -> tuple[float, float]:
    k = queries.k
    dh = dw = 0.0
    for q, p in zip(queries.points, result.points):
        qr, qc = masks.pixel_to_rowcol(q, width)
        pr, pc = masks.pixel_to_rowcol(p, width)
        dh += pr - qr
        dw += pc - qc
    return dh / k, dw / k


def process_frame(
    t: int,
    frame,
    backends: BackendSet,
    memory: PointMemory,
    cfg: PipelineConfig,
    meta: dict | None = None,
) -> FrameOutput:
    """Run one frame through both paths; appends diagnostics to meta."""
    meta = meta if meta is not None else {}
    width = frame.shape[1]

    try:
        visible_preds = backends.visible.predict(t, frame)
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError(f"visible segmenter failed at frame {t}: {exc}", t) from exc

    seen = set()
    for vp in visible_preds:
        if vp.instance in seen:
            raise BackendError(f"duplicate visible prediction for id {vp.instance}", t)
        seen.add(vp.instance)
        if masks.area(vp.mask) == 0:
            raise BackendError(f"empty visible mask for id {vp.instance}", t)

    # memory check first: N_t^inv is defined by the state through t-1
    missing = memory.retrieve_missing(t, seen)

    predictions: list[Prediction] = []
    for vp in visible_preds:
        sample_seed = derive(cfg.seed, SALT_SAMPLING, t, vp.instance)
        points = sample_points(vp.mask, cfg.k, cfg.strategy, sample_seed)
        try:
            amodal = backends.amodal.predict(t, frame, points, declared=vp.instance)
        except BackendError:
            raise
        except Exception as exc:
            raise BackendError(f"amodal segmenter failed at frame {t}: {exc}", t) from exc
        if amodal.shape != frame.shape:
            raise BackendError(
                f"amodal mask dims {amodal.shape} do not match frame {frame.shape}", t
            )
        if masks.area(amodal) == 0:
            # backend failure mode for a visible instance; the visible mask is
            # the safest amodal lower bound
            meta.setdefault("empty_amodal_fallbacks", []).append((t, vp.instance))
            amodal = vp.mask
        predictions.append(
            Prediction(vp.instance, amodal, SOURCE_VISIBLE, vp.score, vp.class_label)
        )
        memory.store_visible(t, vp.instance, points, amodal, vp.score, vp.class_label)

    for entry in missing:
        try:
            result = backends.tracker.track(t, frame, entry.points, entry.instance)
        except BackendError:
            raise
        except Exception as exc:
            raise BackendError(f"point tracker failed at frame {t}: {exc}", t) from exc
        meta.setdefault("occlusion_flags", []).append((t, entry.instance, result.occluded))
        if any(result.clipped):
            meta.setdefault("clipped_points", []).append((t, entry.instance))
        if cfg.require_occluded_flag and not any(result.occluded):
            # tracker says every point is visible: treat as a stale entry
            meta.setdefault("skipped_unoccluded", []).append((t, entry.instance))
            continue
        predicted = PointTuple(result.points, entry.points.labels)
        if cfg.track_from == "last-visible":
            disp = _mean_displacement(entry.anchor_points, result, width)
            shifted = masks.shift(entry.anchor_amodal, disp)
        else:
            disp = _mean_displacement(entry.points, result, width)
            shifted = masks.shift(entry.amodal, disp)
        predictions.append(
            Prediction(entry.instance, shifted, SOURCE_TRACKED, entry.score, entry.class_label)
        )
        memory.store_tracked(t, entry.instance, predicted, shifted)

    return FrameOutput(t, predictions)


def run_sequence(
    video: SyntheticVideo, backends: BackendSet, cfg: PipelineConfig
) -> RunResult:
    """Process a whole video in frame order. Deterministic given (video,
    backend seeds, cfg)."""
    if video.length < 1:
        raise ValueError("video must have at least one frame")
    memory = PointMemory(cfg.max_occlusion)
    meta: dict = {
        "video": video.name,
        "k": cfg.k,
        "strategy": str(cfg.strategy),
        "seed": cfg.seed,
        "track_from": cfg.track_from,
    }
    outputs = []
    started = time.perf_counter()
    for t in range(1, video.length + 1):
        outputs.append(process_frame(t, video.frames[t - 1], backends, memory, cfg, meta))
    meta["runtime_s"] = time.perf_counter() - started
    meta["n_predictions"] = sum(len(o.predictions) for o in outputs)
    return RunResult(outputs, meta)
