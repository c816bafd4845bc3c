"""Command-line surface: generate | run | eval | ablate | render.

`generate` renders a scene spec to a scene+GT document, `run` executes the
amodal pipeline over a scene with the selected backends, `eval` scores a
prediction stream against ground truth, `ablate` sweeps prompt count and
point-selection strategy, `render` writes per-frame overlay images. The
environment variable SAMODAL_SEED overrides --seed everywhere.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import ablation, backends, figures, formats, masks, metrics, render, scenegen
from .backends import BackendError, BackendSet
from .formats import FormatError
from .pipeline import PipelineConfig, run_sequence
from .sampling import SamplingStrategy


def _seed_from(args) -> int:
    env = os.environ.get("SAMODAL_SEED")
    return int(env) if env is not None else args.seed


def _parse_thresholds(text: str) -> tuple[float, ...]:
    """COCO-style `start:step:stop` or a comma list."""
    if ":" in text:
        start, step, stop = (float(v) for v in text.split(":"))
        out = []
        value = start
        while value <= stop + 1e-9:
            out.append(round(value, 6))
            value += step
        return tuple(out)
    return tuple(float(v) for v in text.split(","))


def _parse_buckets(text: str, cfg: metrics.EvalConfig) -> metrics.EvalConfig:
    """`occ=<split>,small=<area>,large=<area>` overrides."""
    occ_split = cfg.occ_partial[1]
    small, large = cfg.size_small_max, cfg.size_large_min
    for part in text.split(","):
        key, _, value = part.partition("=")
        if key == "occ":
            occ_split = float(value)
        elif key == "small":
            small = float(value)
        elif key == "large":
            large = float(value)
        else:
            raise ValueError(f"unknown bucket override {part!r}")
    return metrics.EvalConfig(
        iou_thresholds=cfg.iou_thresholds,
        size_small_max=small,
        size_large_min=large,
        occ_partial=(0.0, occ_split),
        occ_heavy=(occ_split, 1.0),
        class_agnostic=cfg.class_agnostic,
        pool_frames=cfg.pool_frames,
    )


def _make_backends(args, video: scenegen.SyntheticVideo, seed: int):
    """Build the three backends; returns (BackendSet, bridge client or None)."""
    client = None
    wants_bridge = "bridge" in (args.vis, args.amodal, args.tracker)
    if wants_bridge:
        if not args.bridge_cmd:
            raise BackendError("--bridge-cmd is required when a backend is 'bridge'")
        from .bridgeclient import BridgeAmodal, BridgeClient, BridgeTracker, BridgeVisible

        client = BridgeClient(args.bridge_cmd, video)
    if args.vis == "bridge":
        visible = BridgeVisible(client)
    else:
        visible = backends.build_visible(args.vis, video, seed)
    if args.amodal == "bridge":
        amodal = BridgeAmodal(client)
    else:
        amodal = backends.build_amodal(args.amodal, video)
    if args.tracker == "bridge":
        tracker = BridgeTracker(client)
    else:
        tracker = backends.build_tracker(args.tracker, video, seed)
    return BackendSet(visible, amodal, tracker), client


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--vis", default="oracle", help="oracle[:v] | noisy:<drop>[:<dilate>] | bridge")
    parser.add_argument("--amodal", default="oracle", help="oracle | confusable | bridge")
    parser.add_argument("--tracker", default="oracle", help="oracle | noisy:<sigma> | bridge")
    parser.add_argument("--bridge-cmd", default=None, help="server command for bridge backends")


def cmd_generate(args) -> int:
    if args.spec:
        spec = formats.load_scene_spec(args.spec)
    else:
        spec = scenegen.random_scene_spec(
            seed=_seed_from(args),
            dims=tuple(args.dims),
            frames=args.frames,
            n_objects=args.objects,
        )
    if args.name:
        spec = scenegen.SceneSpec(spec.dims, spec.frames, spec.objects, spec.seed, args.name)
    video = scenegen.generate(spec)
    formats.save_scene(args.gt_out, video)
    print(f"wrote {args.gt_out}: {video.length} frames, {len(video.objects)} objects")
    return 0


def cmd_run(args) -> int:
    video = formats.load_scene(args.scene)
    seed = _seed_from(args)
    cfg = PipelineConfig(
        k=args.k,
        strategy=SamplingStrategy.parse(args.points),
        seed=seed,
        max_occlusion=args.max_occlusion,
        track_from=args.track_from,
        require_occluded_flag=args.require_occluded_flag,
    )
    backend_set, client = _make_backends(args, video, seed)
    try:
        result = run_sequence(video, backend_set, cfg)
        if client is not None and client.latencies:
            total = sum(dt for _, dt in client.latencies)
            result.meta["bridge"] = {
                "requests": len(client.latencies),
                "total_s": total,
                "mean_ms": 1000.0 * total / len(client.latencies),
            }
    finally:
        if client is not None:
            client.close()
    records = formats.records_from_run(result, video.name)
    formats.write_predictions(args.out, records)
    if args.meta_out:
        with open(args.meta_out, "w", encoding="utf-8") as fh:
            json.dump(result.meta, fh, indent=2, default=str)
            fh.write("\n")
    print(f"wrote {args.out}: {len(records)} predictions over {video.length} frames")
    return 0


def _eval_config(args) -> metrics.EvalConfig:
    cfg = metrics.EvalConfig(
        pool_frames=not args.per_frame_mean,
        class_agnostic=not args.class_aware,
    )
    if args.thresholds:
        cfg = metrics.EvalConfig(
            iou_thresholds=_parse_thresholds(args.thresholds),
            size_small_max=cfg.size_small_max,
            size_large_min=cfg.size_large_min,
            occ_partial=cfg.occ_partial,
            occ_heavy=cfg.occ_heavy,
            class_agnostic=cfg.class_agnostic,
            pool_frames=cfg.pool_frames,
        )
    if args.buckets:
        cfg = _parse_buckets(args.buckets, cfg)
    return cfg


def cmd_eval(args) -> int:
    records = formats.read_predictions(args.pred)
    frames: list[metrics.FrameEval] = []
    videos = []
    gt_names = set()
    attached = 0
    for gt_path in args.gt:
        video = formats.load_scene(gt_path)
        if video.name in gt_names:
            raise FormatError(
                f"duplicate video name {video.name!r} across --gt files; "
                "predictions would be scored twice"
            )
        gt_names.add(video.name)
        scene_frames = formats.gt_frames_for_eval(video)
        attached += formats.attach_predictions(scene_frames, records, video.name, video.dims)
        frames.extend(scene_frames)
        videos.append(
            (
                formats.pred_tracks_for_eval(records, video.name, video.length),
                formats.gt_tracks_for_eval(video),
            )
        )
    if attached < len(records):
        orphans = sorted({r.video for r in records} - gt_names)
        print(
            f"samodal eval: warning: {len(records) - attached} prediction(s) "
            f"matched no --gt video (unmatched names: {orphans})",
            file=sys.stderr,
        )
    cfg = _eval_config(args)
    report = metrics.evaluate(frames, videos, cfg)
    formats.write_report(args.out, report.values, args.format)
    if args.figures:
        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        figures.save_pr_curves(
            report.image_curves, fig_dir / "pr_image.png", "image-level precision-recall"
        )
        figures.save_pr_curves(
            report.video_curves, fig_dir / "pr_video.png", "video-level precision-recall"
        )
    for key in metrics.REPORT_KEYS:
        v = report.values.get(key)
        print(f"{key}\t{'NA' if v is None else f'{v:.4f}'}")
    return 0


def cmd_ablate(args) -> int:
    seed = _seed_from(args)
    videos = [formats.load_scene(path) for path in args.scene]
    ks = [int(v) for v in args.k_values.split(",")]
    strategies = [SamplingStrategy.parse(s) for s in args.strategies.split(",")]

    def make_backends(video: scenegen.SyntheticVideo, scene_seed: int) -> BackendSet:
        return BackendSet(
            backends.build_visible(args.vis, video, scene_seed),
            backends.build_amodal(args.amodal, video),
            backends.build_tracker(args.tracker, video, scene_seed),
        )

    grid = ablation.run_ablation(
        videos, make_backends, ks, strategies, repeats=args.repeats, seed=seed
    )
    text = ablation.grid_to_text(grid)
    print(text, end="")
    if args.out:
        if args.format == "json":
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump(ablation.grid_to_json(grid), fh, indent=2)
                fh.write("\n")
        else:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(ablation.grid_to_tsv(grid))
    if args.figures:
        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        rows = list(grid.metric_rows)
        figures.save_ablation_bars(
            rows,
            [c.label for c in grid.cells],
            {row: [c.means[row] for c in grid.cells] for row in rows},
            {row: [c.stds[row] for c in grid.cells] for row in rows},
            fig_dir / "ablation.png",
            "ablation grid",
        )
    return 0


def cmd_render(args) -> int:
    video = formats.load_scene(args.scene)
    overlays: list[list[tuple[int, masks.Mask]]] = [[] for _ in range(video.length)]
    if args.pred:
        for rec in formats.read_predictions(args.pred):
            if rec.video == video.name and 1 <= rec.t <= video.length:
                overlays[rec.t - 1].append((rec.instance, rec.decode_mask()))
    else:
        which = args.gt_masks
        for track in video.objects:
            source = track.amodal if which == "amodal" else track.visible
            for t in range(video.length):
                if masks.area(source[t]):
                    overlays[t].append((track.spec.instance, source[t]))
    paths = render.render_video(video, args.out, overlays)
    print(f"wrote {len(paths)} overlay frames to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="samodal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render a scene spec to a scene+GT document")
    p.add_argument("--spec", default=None, help="scene spec JSON")
    p.add_argument("--gt-out", required=True, help="output scene+GT document")
    p.add_argument("--name", default=None, help="override the video name")
    p.add_argument("--seed", type=int, default=0, help="seed for --spec-less random scenes")
    p.add_argument("--frames", type=int, default=12)
    p.add_argument("--objects", type=int, default=4)
    p.add_argument("--dims", type=int, nargs=2, default=[64, 64], metavar=("H", "W"))
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the amodal pipeline over a scene")
    p.add_argument("--scene", required=True)
    _add_backend_flags(p)
    p.add_argument("--points", default="random", help="random | saliency | erosion[:K]")
    p.add_argument("-K", "--k", type=int, default=1, help="number of point prompts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-occlusion", type=int, default=None)
    p.add_argument("--track-from", choices=("tracked", "last-visible"), default="tracked")
    p.add_argument("--require-occluded-flag", action="store_true")
    p.add_argument("-o", "--out", required=True, help="prediction stream (JSONL)")
    p.add_argument("--meta-out", default=None, help="run metadata JSON")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True, nargs="+", help="scene+GT documents")
    p.add_argument("--thresholds", default=None, help="start:step:stop or comma list")
    p.add_argument("--buckets", default=None, help="occ=<split>,small=<area>,large=<area>")
    p.add_argument("--per-frame-mean", action="store_true")
    p.add_argument("--class-aware", action="store_true")
    p.add_argument("--format", choices=("json", "tsv"), default="json")
    p.add_argument("--figures", default=None, help="directory for PR-curve PNGs")
    p.add_argument("-o", "--out", required=True, help="report file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep K and point-selection strategies")
    p.add_argument("--scene", required=True, action="append", help="repeatable scene suite")
    _add_backend_flags(p)
    p.add_argument("-K", "--k-values", default="1", help="comma list, e.g. 1,2,3,4")
    p.add_argument(
        "--strategies", default="random", help="comma list, e.g. random,saliency,erosion:3,erosion:7"
    )
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--figures", default=None, help="directory for ablation bar PNG")
    p.add_argument("-o", "--out", default=None, help="table file")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("render", help="write per-frame overlay images (PPM)")
    p.add_argument("--scene", required=True)
    p.add_argument("--pred", default=None, help="overlay a prediction stream")
    p.add_argument("--gt-masks", choices=("amodal", "visible"), default="amodal")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, BackendError, ValueError, OSError) as exc:
        print(f"samodal {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
