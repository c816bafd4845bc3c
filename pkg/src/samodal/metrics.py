"""Amodal VIS evaluation: COCO-style mask AP on images, vIoU/vAP on videos.

Matching is greedy in descending score order (ties: input order), each
prediction taking the unmatched ground truth with the highest overlap at or
above the threshold. Bucket variants (size, occlusion) filter the ground
truth; predictions matched to out-of-bucket ground truth are ignored, neither
true nor false positives. AP integrates the monotone precision envelope over
the 101-point recall grid; the headline AP averages the per-threshold APs.
All values are in [0,1] or None when a bucket has no ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import masks
from .masks import Mask

RECALL_GRID = np.linspace(0.0, 1.0, 101)

REPORT_KEYS = [
    "AP", "AP50", "AP50_P", "AP50_H", "AP50_L", "AP50_M", "AP50_S", "mIoU",
    "vAP", "vAP50", "vAP50_P", "vAP50_H", "vAP50_L", "vAP50_M", "vAP50_S",
]

ABLATION_KEYS = REPORT_KEYS[:7]


@dataclass(frozen=True)
class EvalConfig:
    iou_thresholds: tuple[float, ...] = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
    size_small_max: float = 32.0**2
    size_large_min: float = 96.0**2
    occ_partial: tuple[float, float] = (0.0, 0.5)  # (low, high]: 0 < r <= 0.5
    occ_heavy: tuple[float, float] = (0.5, 1.0)
    class_agnostic: bool = True
    pool_frames: bool = True

    def __post_init__(self):
        thrs = self.iou_thresholds
        if not thrs or any(not 0.0 < t <= 1.0 for t in thrs):
            raise ValueError(f"IoU thresholds must lie in (0, 1], got {thrs}")
        if any(b <= a for a, b in zip(thrs, thrs[1:])):
            raise ValueError(f"IoU thresholds must strictly increase, got {thrs}")
        if self.occ_partial[1] > self.occ_heavy[0]:
            raise ValueError("occlusion bucket ranges overlap")
        if self.size_small_max > self.size_large_min:
            raise ValueError("size bucket ranges overlap")

    def size_bucket(self, area: float) -> str:
        if area < self.size_small_max:
            return "S"
        if area < self.size_large_min:
            return "M"
        return "L"

    def occlusion_bucket(self, rate: float) -> str | None:
        if self.occ_partial[0] < rate <= self.occ_partial[1]:
            return "P"
        if self.occ_heavy[0] < rate <= self.occ_heavy[1]:
            return "H"
        return None


# --- evaluation units -------------------------------------------------------

@dataclass
class PredInstance:
    mask: Mask
    score: float
    class_label: int | None = None


@dataclass
class GtInstance:
    mask: Mask
    occlusion: float
    size: float
    class_label: int | None = None


@dataclass
class FrameEval:
    """One image's predictions and ground truth."""

    preds: list[PredInstance] = field(default_factory=list)
    gts: list[GtInstance] = field(default_factory=list)


@dataclass
class InstanceTrack:
    """Per-frame optional masks for one instance; None means absent/empty."""

    instance: int
    masks: list[Mask | None]
    score: float = 1.0
    class_label: int | None = None
    rates: list[float | None] | None = None  # GT occlusion rates, present frames

    def mean_area(self) -> float:
        areas = [masks.area(m) for m in self.masks if m is not None and masks.area(m) > 0]
        return float(np.mean(areas)) if areas else 0.0

    def occlusion_bucket(self, cfg: EvalConfig) -> str | None:
        """Heavy if the worst per-frame rate is heavy, else partial if any
        frame's rate is partial, else unoccluded (no bucket)."""
        rates = [r for r in (self.rates or []) if r is not None]
        if not rates:
            return None
        if cfg.occlusion_bucket(max(rates)) == "H":
            return "H"
        if any(cfg.occlusion_bucket(r) == "P" for r in rates):
            return "P"
        return None


def viou(pred: InstanceTrack, gt: InstanceTrack) -> float:
    """Track overlap: sum of per-frame intersections over sum of per-frame
    unions; absent masks are empty; 1.0 when both tracks are empty everywhere."""
    if len(pred.masks) != len(gt.masks):
        raise ValueError(
            f"track lengths differ: {len(pred.masks)} vs {len(gt.masks)}"
        )
    inter = uni = 0
    for pm, gm in zip(pred.masks, gt.masks):
        if pm is None and gm is None:
            continue
        if pm is None:
            uni += masks.area(gm)
        elif gm is None:
            uni += masks.area(pm)
        else:
            inter += masks.area(masks.intersect(pm, gm))
            uni += masks.area(masks.union(pm, gm))
    return 1.0 if uni == 0 else inter / uni


# --- matcher + AP core --------------------------------------------------------

def greedy_match(overlaps: np.ndarray, order: list[int], threshold: float) -> list[int]:
    """Match predictions (in the given order) to the unmatched GT with the
    highest overlap >= threshold; ties go to the lowest GT index. Returns the
    matched GT index per prediction, -1 when unmatched."""
    n_pred, n_gt = overlaps.shape
    taken = [False] * n_gt
    match = [-1] * n_pred
    for i in order:
        best_j, best_v = -1, -1.0
        for j in range(n_gt):
            if taken[j]:
                continue
            v = overlaps[i, j]
            if v >= threshold and v > best_v:
                best_j, best_v = j, v
        if best_j >= 0:
            taken[best_j] = True
            match[i] = best_j
    return match


@dataclass
class _Group:
    """One matching unit (a frame, or a video's track set), overlaps precomputed."""

    overlaps: np.ndarray  # (n_pred, n_gt)
    scores: list[float]
    orders: list[int]  # global insertion order, the score tie-break
    gt_is_positive: list[bool]


def _interpolated_precision(records: list[tuple[float, int, str]], n_pos: int) -> np.ndarray:
    """101-point interpolated precision over RECALL_GRID from scored TP/FP
    records ('ignore' records drop out entirely)."""
    seq = sorted((r for r in records if r[2] != "ignore"), key=lambda r: (-r[0], r[1]))
    if not seq:
        return np.zeros_like(RECALL_GRID)
    tp = np.cumsum([1 if kind == "tp" else 0 for _, _, kind in seq])
    fp = np.cumsum([1 if kind == "fp" else 0 for _, _, kind in seq])
    recall = tp / n_pos
    precision = tp / np.maximum(tp + fp, 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_GRID, side="left")
    out = np.zeros_like(RECALL_GRID)
    inside = idx < len(envelope)
    out[inside] = envelope[idx[inside]]
    return out


def _threshold_records(
    groups: list[_Group], threshold: float
) -> tuple[list[tuple[float, int, str]], int]:
    records = []
    n_pos = 0
    for g in groups:
        n_pos += sum(g.gt_is_positive)
        order = sorted(range(len(g.scores)), key=lambda i: (-g.scores[i], g.orders[i]))
        match = greedy_match(g.overlaps, order, threshold)
        for i, j in enumerate(match):
            if j < 0:
                kind = "fp"
            elif g.gt_is_positive[j]:
                kind = "tp"
            else:
                kind = "ignore"
            records.append((g.scores[i], g.orders[i], kind))
    return records, n_pos


def _ap(groups: list[_Group], threshold: float) -> tuple[float | None, np.ndarray | None]:
    records, n_pos = _threshold_records(groups, threshold)
    if n_pos == 0:
        return None, None
    q = _interpolated_precision(records, n_pos)
    return float(q.mean()), q


def _mean_defined(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def match_and_ap(
    preds: list[PredInstance],
    gts: list[GtInstance],
    overlap_fn,
    thresholds: tuple[float, ...],
    gt_is_positive: list[bool] | None = None,
) -> dict[float, float | None]:
    """Single-group AP at each threshold; the building block the image- and
    video-level evaluations pool over frames/videos."""
    flags = gt_is_positive if gt_is_positive is not None else [True] * len(gts)
    overlaps = np.array(
        [[overlap_fn(p.mask, g.mask) for g in gts] for p in preds], dtype=float
    ).reshape(len(preds), len(gts))
    group = _Group(overlaps, [p.score for p in preds], list(range(len(preds))), flags)
    return {thr: _ap([group], thr)[0] for thr in thresholds}


# --- image level ---------------------------------------------------------------

def _frame_groups(
    frames: list[FrameEval], bucket_fn, class_of=None
) -> dict[object, list[_Group]]:
    """Build per-class group lists; class key None pools everything."""
    by_class: dict[object, list[_Group]] = {}
    order = 0
    for fr in frames:
        classes = {None}
        if class_of is not None:
            classes = {class_of(g) for g in fr.gts} | {class_of(p) for p in fr.preds}
        base_orders = [order + i for i in range(len(fr.preds))]
        order += len(fr.preds)
        full = np.array(
            [[masks.iou(p.mask, g.mask) for g in fr.gts] for p in fr.preds], dtype=float
        ).reshape(len(fr.preds), len(fr.gts))
        for cls in classes:
            if class_of is None:
                pi = list(range(len(fr.preds)))
                gi = list(range(len(fr.gts)))
            else:
                pi = [i for i, p in enumerate(fr.preds) if class_of(p) == cls]
                gi = [i for i, g in enumerate(fr.gts) if class_of(g) == cls]
            group = _Group(
                full[np.ix_(pi, gi)] if pi and gi else np.zeros((len(pi), len(gi))),
                [fr.preds[i].score for i in pi],
                [base_orders[i] for i in pi],
                [bucket_fn(fr.gts[i]) for i in gi],
            )
            by_class.setdefault(cls, []).append(group)
    return by_class


def _bucketed_ap(
    by_class: dict[object, list[_Group]], threshold: float
) -> tuple[float | None, np.ndarray | None]:
    """AP at one threshold: per-class AP averaged over classes with GT.
    Class-agnostic mode has a single class, so this reduces to pooled AP."""
    aps, curves = [], []
    for groups in by_class.values():
        ap, q = _ap(groups, threshold)
        if ap is not None:
            aps.append(ap)
            curves.append(q)
    if not aps:
        return None, None
    return float(np.mean(aps)), np.mean(curves, axis=0)


def _matched_ious(by_class: dict[object, list[_Group]], threshold: float) -> list[float]:
    out = []
    for groups in by_class.values():
        for g in groups:
            order = sorted(range(len(g.scores)), key=lambda i: (-g.scores[i], g.orders[i]))
            match = greedy_match(g.overlaps, order, threshold)
            out.extend(g.overlaps[i, j] for i, j in enumerate(match) if j >= 0)
    return out


def evaluate_image_level(
    frames: list[FrameEval], cfg: EvalConfig | None = None
) -> tuple[dict[str, float | None], dict[float, np.ndarray]]:
    """Image-level metrics pooled over frames (or per-frame averaged when
    cfg.pool_frames is off). Returns the flat value dict and the full-bucket
    PR curves per threshold."""
    cfg = cfg or EvalConfig()
    class_of = None if cfg.class_agnostic else (lambda u: u.class_label)

    buckets = {
        "": lambda g: True,
        "_P": lambda g: cfg.occlusion_bucket(g.occlusion) == "P",
        "_H": lambda g: cfg.occlusion_bucket(g.occlusion) == "H",
        "_L": lambda g: cfg.size_bucket(g.size) == "L",
        "_M": lambda g: cfg.size_bucket(g.size) == "M",
        "_S": lambda g: cfg.size_bucket(g.size) == "S",
    }

    def ap_at(bucket_fn, threshold) -> float | None:
        if cfg.pool_frames:
            return _bucketed_ap(_frame_groups(frames, bucket_fn, class_of), threshold)[0]
        per_frame = [
            _bucketed_ap(_frame_groups([fr], bucket_fn, class_of), threshold)[0]
            for fr in frames
        ]
        return _mean_defined(per_frame)

    values: dict[str, float | None] = {}
    full_groups = _frame_groups(frames, buckets[""], class_of)
    if cfg.pool_frames:
        per_thr = {thr: _bucketed_ap(full_groups, thr) for thr in cfg.iou_thresholds}
        values["AP"] = _mean_defined([ap for ap, _ in per_thr.values()])
        curves = {thr: q for thr, (ap, q) in per_thr.items() if q is not None}
        values["AP50"] = per_thr[0.5][0] if 0.5 in per_thr else ap_at(buckets[""], 0.5)
    else:
        values["AP"] = _mean_defined([ap_at(buckets[""], thr) for thr in cfg.iou_thresholds])
        values["AP50"] = ap_at(buckets[""], 0.5)
        curves = {}
    for suffix in ("_P", "_H", "_L", "_M", "_S"):
        values[f"AP50{suffix}"] = ap_at(buckets[suffix], 0.5)
    ious = _matched_ious(full_groups, 0.5)
    values["mIoU"] = float(np.mean(ious)) if ious else None
    return values, curves


# --- video level -----------------------------------------------------------------

def evaluate_video_level(
    videos: list[tuple[list[InstanceTrack], list[InstanceTrack]]],
    cfg: EvalConfig | None = None,
) -> tuple[dict[str, float | None], dict[float, np.ndarray]]:
    """Video-level metrics; each element of `videos` is (pred tracks, gt
    tracks) for one video. Uses the same matcher/AP machinery as image level
    with vIoU as the overlap and tracks as units."""
    cfg = cfg or EvalConfig()
    class_of = None if cfg.class_agnostic else (lambda u: u.class_label)

    buckets = {
        "": lambda g: True,
        "_P": lambda g: g.occlusion_bucket(cfg) == "P",
        "_H": lambda g: g.occlusion_bucket(cfg) == "H",
        "_L": lambda g: cfg.size_bucket(g.mean_area()) == "L",
        "_M": lambda g: cfg.size_bucket(g.mean_area()) == "M",
        "_S": lambda g: cfg.size_bucket(g.mean_area()) == "S",
    }

    def build_groups(bucket_fn) -> dict[object, list[_Group]]:
        by_class: dict[object, list[_Group]] = {}
        order = 0
        for preds, gts in videos:
            classes = {None}
            if class_of is not None:
                classes = {class_of(g) for g in gts} | {class_of(p) for p in preds}
            base_orders = [order + i for i in range(len(preds))]
            order += len(preds)
            full = np.array(
                [[viou(p, g) for g in gts] for p in preds], dtype=float
            ).reshape(len(preds), len(gts))
            for cls in classes:
                if class_of is None:
                    pi, gi = list(range(len(preds))), list(range(len(gts)))
                else:
                    pi = [i for i, p in enumerate(preds) if class_of(p) == cls]
                    gi = [i for i, g in enumerate(gts) if class_of(g) == cls]
                by_class.setdefault(cls, []).append(
                    _Group(
                        full[np.ix_(pi, gi)] if pi and gi else np.zeros((len(pi), len(gi))),
                        [preds[i].score for i in pi],
                        [base_orders[i] for i in pi],
                        [bucket_fn(gts[i]) for i in gi],
                    )
                )
        return by_class

    values: dict[str, float | None] = {}
    per_thr = {thr: _bucketed_ap(build_groups(buckets[""]), thr) for thr in cfg.iou_thresholds}
    values["vAP"] = _mean_defined([ap for ap, _ in per_thr.values()])
    values["vAP50"] = per_thr[0.5][0] if 0.5 in per_thr else _bucketed_ap(build_groups(buckets[""]), 0.5)[0]
    curves = {thr: q for thr, (ap, q) in per_thr.items() if q is not None}
    for suffix in ("_P", "_H", "_L", "_M", "_S"):
        values[f"vAP50{suffix}"] = _bucketed_ap(build_groups(buckets[suffix]), 0.5)[0]
    return values, curves


@dataclass
class EvalReport:
    """Flat metric values in REPORT_KEYS order plus the PR curves behind the
    headline (v)AP numbers."""

    values: dict[str, float | None]
    image_curves: dict[float, np.ndarray] = field(default_factory=dict)
    video_curves: dict[float, np.ndarray] = field(default_factory=dict)


def evaluate(
    frames: list[FrameEval],
    videos: list[tuple[list[InstanceTrack], list[InstanceTrack]]],
    cfg: EvalConfig | None = None,
) -> EvalReport:
    cfg = cfg or EvalConfig()
    image_values, image_curves = evaluate_image_level(frames, cfg)
    video_values, video_curves = evaluate_video_level(videos, cfg)
    values = {key: {**image_values, **video_values}.get(key) for key in REPORT_KEYS}
    return EvalReport(values, image_curves, video_curves)
