"""Reference model: the three backend roles answered from frame payloads.

This is the adapter layer a real model would replace: `visible` plays the
visible-instance segmenter, `amodal` the point-prompted segmenter, `track`
the point tracker. The dummy answers from the ground-truth slice carried in
every request, matching the engine's in-process oracles decision for
decision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import drop_instance, rle_decode, rle_encode


@dataclass
class Instance:
    instance: int
    class_label: int
    depth: int
    anchor: tuple[int, int]
    amodal: np.ndarray
    visible: np.ndarray


def parse_frame(payload: dict, dims: tuple[int, int]) -> list[Instance]:
    """Decode a frame payload and derive visible masks by depth layering."""
    raw = []
    for entry in payload.get("instances", []):
        amodal = rle_decode(entry["amodal"])
        if amodal.shape != dims:
            raise ValueError(f"amodal mask dims {amodal.shape} != grid {dims}")
        raw.append(
            (
                int(entry["instance"]),
                int(entry.get("class", 0)),
                int(entry["depth"]),
                (int(entry["anchor"][0]), int(entry["anchor"][1])),
                amodal,
            )
        )
    out = []
    for instance, class_label, depth, anchor, amodal in raw:
        closer = np.zeros(dims, dtype=bool)
        for _, _, other_depth, _, other_amodal in raw:
            if other_depth > depth:
                closer |= other_amodal
        out.append(Instance(instance, class_label, depth, anchor, amodal, amodal & ~closer))
    out.sort(key=lambda inst: inst.instance)
    return out


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    out = np.zeros_like(mask)
    h, w = mask.shape
    for dh in range(-radius, radius + 1):
        for dw in range(-radius, radius + 1):
            r0, r1 = max(0, dh), min(h, h + dh)
            c0, c1 = max(0, dw), min(w, w + dw)
            out[r0:r1, c0:c1] |= mask[r0 - dh : r1 - dh, c0 - dw : c1 - dw]
    return out


class DummyModel:
    """Oracle-equivalent adapters with the noisy-visible knobs."""

    def __init__(
        self,
        dims: tuple[int, int],
        drop: float = 0.0,
        dilate: int = 0,
        min_visible: float = 0.0,
        seed: int = 0,
    ):
        self.dims = dims
        self.drop = drop
        self.dilate = dilate
        self.min_visible = min_visible
        self.seed = seed

    def visible(self, t: int, frame: dict) -> list[dict]:
        predictions = []
        for inst in parse_frame(frame, self.dims):
            amodal_area = int(inst.amodal.sum())
            if amodal_area == 0:
                continue
            if int(inst.visible.sum()) / amodal_area <= self.min_visible:
                continue
            if self.drop > 0.0 and drop_instance(self.seed, t, inst.instance, self.drop):
                continue
            mask = inst.visible
            if self.dilate:
                mask = _dilate(mask, self.dilate)
            predictions.append(
                {
                    "instance": inst.instance,
                    "score": 1.0,
                    "class": inst.class_label,
                    "mask": rle_encode(mask),
                }
            )
        return predictions

    def amodal(self, t: int, frame: dict, points: list[int]) -> str:
        instances = parse_frame(frame, self.dims)
        h, w = self.dims
        for p in points:
            r, c = (p - 1) // w, (p - 1) % w
            for inst in instances:
                if inst.visible[r, c]:
                    return rle_encode(inst.amodal)
        return rle_encode(np.zeros(self.dims, dtype=bool))

    def track(
        self, t: int, frame: dict, prev_frame: dict, queries: list[int], instance: int
    ) -> tuple[list[int], list[int]]:
        now = {inst.instance: inst for inst in parse_frame(frame, self.dims)}
        before = {inst.instance: inst for inst in parse_frame(prev_frame, self.dims)}
        if instance not in now or instance not in before:
            raise ValueError(f"unknown instance {instance} in track request")
        (ph, pw), (ah, aw) = before[instance].anchor, now[instance].anchor
        dh, dw = ah - ph, aw - pw
        h, w = self.dims
        visible = now[instance].visible
        points, occluded = [], []
        for q in queries:
            r, c = (q - 1) // w + 1, (q - 1) % w + 1
            r = min(max(r + dh, 1), h)
            c = min(max(c + dw, 1), w)
            points.append((r - 1) * w + c)
            occluded.append(0 if visible[r - 1, c - 1] else 1)
        return points, occluded
