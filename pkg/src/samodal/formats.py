"""File formats: scene specs, scene+GT documents, prediction streams, reports.

Masks travel as the RLE text form `H W c0 c1 ...` everywhere. Predictions are
line-delimited JSON (one record per line) for streamability; scenes and
ground truth are a single JSON document per video. All writers are
byte-deterministic for identical inputs. Schemas are documented in
docs/FORMATS.md.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import masks, metrics
from .pipeline import RunResult
from .scenegen import ObjectSpec, ObjectTrack, SceneSpec, Shape, SyntheticVideo

SCENE_FORMAT = "samodal-scene/1"
PREDICTION_FORMAT = "samodal-pred/1"


class FormatError(ValueError):
    """Malformed document or stream; messages carry file/line context."""


# --- prediction stream -------------------------------------------------------

@dataclass(frozen=True)
class PredictionRecord:
    video: str
    t: int
    instance: int
    source: str
    score: float
    class_label: int | None
    rle: str  # text form "H W c0 c1 ..."

    def decode_mask(self) -> masks.Mask:
        return masks.rle_from_text(self.rle)


def records_from_run(result: RunResult, video_name: str) -> list[PredictionRecord]:
    out = []
    for frame in result.outputs:
        for pred in frame.predictions:
            out.append(
                PredictionRecord(
                    video=video_name,
                    t=frame.t,
                    instance=pred.instance,
                    source=pred.source,
                    score=pred.score,
                    class_label=pred.class_label,
                    rle=masks.rle_to_text(pred.mask),
                )
            )
    return out


def _record_to_json(rec: PredictionRecord) -> str:
    return json.dumps(
        {
            "video": rec.video,
            "t": rec.t,
            "instance": rec.instance,
            "source": rec.source,
            "score": rec.score,
            "class": rec.class_label,
            "rle": rec.rle,
        },
        separators=(",", ":"),
    )


def write_predictions(path: str | Path, records: list[PredictionRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(_record_to_json(rec) + "\n")


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    records = []
    seen: set[tuple[str, int, int]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rec = PredictionRecord(
                    video=obj["video"],
                    t=int(obj["t"]),
                    instance=int(obj["instance"]),
                    source=obj["source"],
                    score=float(obj["score"]),
                    class_label=None if obj.get("class") is None else int(obj["class"]),
                    rle=obj["rle"],
                )
                rec.decode_mask()  # validates counts
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise FormatError(f"{path}: bad prediction record at line {lineno}: {exc}") from exc
            key = (rec.video, rec.t, rec.instance)
            if key in seen:
                raise FormatError(
                    f"{path}: duplicate record for video={rec.video} t={rec.t} "
                    f"instance={rec.instance} at line {lineno}"
                )
            seen.add(key)
            records.append(rec)
    return records


# --- scene spec --------------------------------------------------------------

def _shape_to_json(shape: Shape) -> dict:
    if shape.kind == "rect":
        return {"kind": "rect", "h": shape.a, "w": shape.b}
    return {"kind": "ellipse", "a": shape.a, "b": shape.b}


def _shape_from_json(obj: dict) -> Shape:
    if obj["kind"] == "rect":
        return Shape("rect", float(obj["h"]), float(obj["w"]))
    if obj["kind"] == "ellipse":
        return Shape("ellipse", float(obj["a"]), float(obj["b"]))
    raise FormatError(f"unknown shape kind {obj.get('kind')!r}")


def scene_spec_to_json(spec: SceneSpec) -> dict:
    objects = []
    for o in spec.objects:
        entry = {
            "id": o.instance,
            "shape": _shape_to_json(o.shape),
            "start": list(o.start),
            "depth": o.depth,
            "class": o.class_label,
        }
        if o.velocities is not None:
            entry["velocities"] = [list(v) for v in o.velocities]
        else:
            entry["velocity"] = list(o.velocity)
        objects.append(entry)
    return {
        "name": spec.name,
        "dims": list(spec.dims),
        "frames": spec.frames,
        "seed": spec.seed,
        "objects": objects,
    }


def scene_spec_from_json(obj: dict) -> SceneSpec:
    try:
        objects = []
        for entry in obj["objects"]:
            velocities = None
            velocity = (0.0, 0.0)
            if "velocities" in entry:
                velocities = tuple((float(v[0]), float(v[1])) for v in entry["velocities"])
            elif "velocity" in entry:
                velocity = (float(entry["velocity"][0]), float(entry["velocity"][1]))
            objects.append(
                ObjectSpec(
                    instance=int(entry["id"]),
                    shape=_shape_from_json(entry["shape"]),
                    start=(float(entry["start"][0]), float(entry["start"][1])),
                    depth=int(entry["depth"]),
                    class_label=int(entry.get("class", 0)),
                    velocity=velocity,
                    velocities=velocities,
                )
            )
        return SceneSpec(
            dims=(int(obj["dims"][0]), int(obj["dims"][1])),
            frames=int(obj["frames"]),
            objects=tuple(objects),
            seed=int(obj.get("seed", 0)),
            name=obj.get("name", "scene"),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise FormatError(f"bad scene spec: {exc}") from exc


def load_scene_spec(path: str | Path) -> SceneSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return scene_spec_from_json(json.load(fh))


def save_scene_spec(path: str | Path, spec: SceneSpec) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_spec_to_json(spec), fh, indent=2)
        fh.write("\n")


# --- scene + ground truth document --------------------------------------------

def save_scene(path: str | Path, video: SyntheticVideo) -> None:
    doc = {
        "format": SCENE_FORMAT,
        "name": video.name,
        "dims": list(video.dims),
        "frames": video.length,
        "objects": [
            {
                "id": track.spec.instance,
                "class": track.spec.class_label,
                "depth": track.spec.depth,
                "anchors": [list(a) for a in track.anchors],
                "amodal": [masks.rle_to_text(m) for m in track.amodal],
                "visible": [masks.rle_to_text(m) for m in track.visible],
            }
            for track in video.objects
        ],
    }
    if video.spec is not None:
        doc["spec"] = scene_spec_to_json(video.spec)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_scene(path: str | Path) -> SyntheticVideo:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != SCENE_FORMAT:
        raise FormatError(f"{path}: not a {SCENE_FORMAT} document")
    try:
        dims = (int(doc["dims"][0]), int(doc["dims"][1]))
        length = int(doc["frames"])
        spec = scene_spec_from_json(doc["spec"]) if "spec" in doc else None
        tracks = []
        for entry in doc["objects"]:
            obj_spec = None
            if spec is not None:
                for o in spec.objects:
                    if o.instance == int(entry["id"]):
                        obj_spec = o
            if obj_spec is None:
                obj_spec = ObjectSpec(
                    instance=int(entry["id"]),
                    shape=Shape("rect", 1, 1),
                    start=(0.0, 0.0),
                    depth=int(entry["depth"]),
                    class_label=int(entry.get("class", 0)),
                )
            amodal = [masks.rle_from_text(text) for text in entry["amodal"]]
            visible = [masks.rle_from_text(text) for text in entry["visible"]]
            if len(amodal) != length or len(visible) != length:
                raise FormatError(f"object {entry['id']}: mask track length != frames")
            if len(entry["anchors"]) != length:
                raise FormatError(f"object {entry['id']}: anchor track length != frames")
            tracks.append(
                ObjectTrack(
                    spec=obj_spec,
                    anchors=[(int(a[0]), int(a[1])) for a in entry["anchors"]],
                    amodal=amodal,
                    visible=visible,
                )
            )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad scene document: {exc}") from exc

    tracks.sort(key=lambda tr: tr.spec.instance)
    frames = []
    for t in range(length):
        label = np.zeros(dims, dtype=np.int32)
        for track in sorted(tracks, key=lambda tr: tr.spec.depth):
            label[track.visible[t]] = track.spec.instance
        frames.append(label)
    return SyntheticVideo(doc.get("name", "scene"), dims, frames, tracks, spec)


# --- eval unit builders ---------------------------------------------------------

def gt_frames_for_eval(video: SyntheticVideo) -> list[metrics.FrameEval]:
    """Image-level GT units: one GtInstance per object per frame where its
    amodal mask is on-canvas."""
    frames = []
    for t in range(video.length):
        gts = []
        for track in video.objects:
            amodal = track.amodal[t]
            amodal_area = masks.area(amodal)
            if amodal_area == 0:
                continue
            rate = masks.occlusion_rate(track.visible[t], amodal)
            gts.append(
                metrics.GtInstance(
                    mask=amodal,
                    occlusion=rate,
                    size=float(amodal_area),
                    class_label=track.spec.class_label,
                )
            )
        frames.append(metrics.FrameEval(preds=[], gts=gts))
    return frames


def attach_predictions(
    frames: list[metrics.FrameEval],
    records: list[PredictionRecord],
    video_name: str,
    dims: tuple[int, int] | None = None,
) -> int:
    """Attach matching records to the per-frame eval units; returns how many
    were attached."""
    attached = 0
    for rec in records:
        if rec.video != video_name:
            continue
        if not 1 <= rec.t <= len(frames):
            raise FormatError(f"prediction at t={rec.t} outside video {video_name!r}")
        mask = rec.decode_mask()
        if dims is not None and mask.shape != dims:
            raise FormatError(
                f"prediction for video={video_name!r} t={rec.t} instance={rec.instance} "
                f"has dims {mask.shape}, video is {dims}"
            )
        frames[rec.t - 1].preds.append(
            metrics.PredInstance(mask, rec.score, rec.class_label)
        )
        attached += 1
    return attached


def gt_tracks_for_eval(video: SyntheticVideo) -> list[metrics.InstanceTrack]:
    tracks = []
    for track in video.objects:
        per_frame: list[masks.Mask | None] = []
        rates: list[float | None] = []
        for t in range(video.length):
            if masks.area(track.amodal[t]) == 0:
                per_frame.append(None)
                rates.append(None)
            else:
                per_frame.append(track.amodal[t])
                rates.append(masks.occlusion_rate(track.visible[t], track.amodal[t]))
        if all(m is None for m in per_frame):
            continue
        tracks.append(
            metrics.InstanceTrack(
                instance=track.spec.instance,
                masks=per_frame,
                score=1.0,
                class_label=track.spec.class_label,
                rates=rates,
            )
        )
    return tracks


def pred_tracks_for_eval(
    records: list[PredictionRecord], video_name: str, length: int
) -> list[metrics.InstanceTrack]:
    """Group records into tracks; the track score is the score of the last
    record from the visible path (falling back to the last record)."""
    by_instance: dict[int, list[PredictionRecord]] = {}
    for rec in records:
        if rec.video == video_name:
            by_instance.setdefault(rec.instance, []).append(rec)
    tracks = []
    for instance in sorted(by_instance):
        recs = sorted(by_instance[instance], key=lambda r: r.t)
        per_frame: list[masks.Mask | None] = [None] * length
        for rec in recs:
            per_frame[rec.t - 1] = rec.decode_mask()
        visible_scores = [r.score for r in recs if r.source == "visible"]
        score = visible_scores[-1] if visible_scores else recs[-1].score
        class_labels = [r.class_label for r in recs if r.class_label is not None]
        tracks.append(
            metrics.InstanceTrack(
                instance=instance,
                masks=per_frame,
                score=score,
                class_label=class_labels[-1] if class_labels else None,
            )
        )
    return tracks


# --- reports ----------------------------------------------------------------------

def report_to_json(values: dict[str, float | None]) -> str:
    ordered = {k: values.get(k) for k in metrics.REPORT_KEYS if k in values}
    return json.dumps(ordered, indent=2) + "\n"


def report_to_tsv(values: dict[str, float | None]) -> str:
    lines = ["metric\tvalue"]
    for key in metrics.REPORT_KEYS:
        if key in values:
            v = values[key]
            lines.append(f"{key}\t{'NA' if v is None else repr(v)}")
    return "\n".join(lines) + "\n"


def write_report(path: str | Path, values: dict[str, float | None], fmt: str = "json") -> None:
    text = report_to_json(values) if fmt == "json" else report_to_tsv(values)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
