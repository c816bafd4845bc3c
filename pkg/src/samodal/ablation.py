"""Ablation harness: sweep prompt count K and point-selection strategy.

Each grid cell runs the pipeline over a scene suite with `repeats` distinct
derived seeds and reports mean and standard deviation of the image-level
metric set (AP, AP50 and its occlusion/size derivatives), mirroring the
K-sweep and strategy-sweep table layouts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import formats, metrics
from .backends import BackendSet
from .metrics import ABLATION_KEYS, EvalConfig
from .pipeline import PipelineConfig, run_sequence
from .rng import SALT_ABLATE_REP, SALT_SCENE, derive
from .sampling import SamplingStrategy
from .scenegen import SyntheticVideo

MakeBackends = Callable[[SyntheticVideo, int], BackendSet]


@dataclass
class AblationCell:
    k: int
    strategy: SamplingStrategy
    label: str
    means: dict[str, float | None]
    stds: dict[str, float | None]


@dataclass
class AblationGrid:
    cells: list[AblationCell]
    repeats: int
    metric_rows: tuple[str, ...] = tuple(ABLATION_KEYS)


def _suite_metrics(
    videos: list[SyntheticVideo],
    make_backends: MakeBackends,
    k: int,
    strategy: SamplingStrategy,
    seed: int,
    eval_cfg: EvalConfig,
) -> dict[str, float | None]:
    frames: list[metrics.FrameEval] = []
    for index, video in enumerate(videos):
        scene_seed = derive(seed, SALT_SCENE, index)
        cfg = PipelineConfig(k=k, strategy=strategy, seed=scene_seed)
        result = run_sequence(video, make_backends(video, scene_seed), cfg)
        scene_frames = formats.gt_frames_for_eval(video)
        records = formats.records_from_run(result, video.name)
        formats.attach_predictions(scene_frames, records, video.name)
        frames.extend(scene_frames)
    values, _ = metrics.evaluate_image_level(frames, eval_cfg)
    return {key: values[key] for key in ABLATION_KEYS}


def run_ablation(
    videos: list[SyntheticVideo],
    make_backends: MakeBackends,
    ks: list[int],
    strategies: list[SamplingStrategy],
    repeats: int = 3,
    seed: int = 0,
    eval_cfg: EvalConfig | None = None,
) -> AblationGrid:
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    eval_cfg = eval_cfg or EvalConfig()
    cells = []
    for k in ks:
        for strategy in strategies:
            per_rep: list[dict[str, float | None]] = []
            for rep in range(repeats):
                rep_seed = derive(seed, SALT_ABLATE_REP, rep)
                per_rep.append(
                    _suite_metrics(videos, make_backends, k, strategy, rep_seed, eval_cfg)
                )
            means: dict[str, float | None] = {}
            stds: dict[str, float | None] = {}
            for key in ABLATION_KEYS:
                samples = [m[key] for m in per_rep]
                if any(s is None for s in samples):
                    means[key], stds[key] = None, None
                else:
                    means[key] = float(np.mean(samples))
                    stds[key] = float(np.std(samples, ddof=1)) if repeats >= 2 else None
            label = f"K={k}/{strategy}" if len(ks) > 1 and len(strategies) > 1 else (
                f"K={k}" if len(strategies) == 1 else str(strategy)
            )
            cells.append(AblationCell(k, strategy, label, means, stds))
    return AblationGrid(cells, repeats)


def grid_to_text(grid: AblationGrid) -> str:
    """Fixed-width table: metric rows, one column per grid cell, mean +- std."""
    headers = ["metric"] + [c.label for c in grid.cells]
    rows = []
    for key in grid.metric_rows:
        row = [key]
        for cell in grid.cells:
            mean, std = cell.means[key], cell.stds[key]
            if mean is None:
                row.append("NA")
            elif std is None:
                row.append(f"{mean:.4f}")
            else:
                row.append(f"{mean:.4f} +- {std:.4f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in [headers] + rows) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def grid_to_tsv(grid: AblationGrid) -> str:
    lines = ["metric\t" + "\t".join(f"{c.label}\t{c.label}_std" for c in grid.cells)]
    for key in grid.metric_rows:
        fields = [key]
        for cell in grid.cells:
            mean, std = cell.means[key], cell.stds[key]
            fields.append("NA" if mean is None else repr(mean))
            fields.append("NA" if std is None else repr(std))
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


def grid_to_json(grid: AblationGrid) -> dict:
    return {
        "repeats": grid.repeats,
        "metrics": list(grid.metric_rows),
        "cells": [
            {
                "label": c.label,
                "k": c.k,
                "strategy": str(c.strategy),
                "mean": {k: c.means[k] for k in grid.metric_rows},
                "std": {k: c.stds[k] for k in grid.metric_rows},
            }
            for c in grid.cells
        ],
    }
