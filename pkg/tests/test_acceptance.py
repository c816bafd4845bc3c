"""Acceptance suite: one test per exit criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Tolerances are pinned here: exact equality for oracle closure and
occlusion bridging, 1e-9 for metric-oracle equivalence, 1e-12 for the vIoU
identity.
"""

from __future__ import annotations

import json
import time

import numpy as np
import pytest

from samodal import formats, masks, metrics, scenegen
from samodal.backends import BackendSet, OracleAmodal, OracleTracker, OracleVisible
from samodal.cli import main
from samodal.pipeline import PipelineConfig, run_sequence
from samodal.sampling import SamplingStrategy, sample_points
from samodal.scenegen import ObjectSpec, SceneSpec, Shape

from oracles import ap_bf, viou_bf


def _passed(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


def oracle_backends(video):
    return BackendSet(OracleVisible(video), OracleAmodal(video), OracleTracker(video))


def run_and_collect(video, seed=7):
    result = run_sequence(video, oracle_backends(video), PipelineConfig(seed=seed))
    records = formats.records_from_run(result, video.name)
    frames = formats.gt_frames_for_eval(video)
    formats.attach_predictions(frames, records, video.name)
    tracks = (
        formats.pred_tracks_for_eval(records, video.name, video.length),
        formats.gt_tracks_for_eval(video),
    )
    return frames, tracks


def closure_scenes(n=20):
    """Random scenes whose every instance stays partially visible (no full
    occlusion, no canvas exit) -- rejection-sampled deterministically."""
    scenes, seed = [], 0
    while len(scenes) < n:
        seed += 1
        spec = scenegen.random_scene_spec(
            seed=seed, dims=(64, 64), frames=12, n_objects=4, min_size=6, max_size=18
        )
        video = scenegen.generate(spec)
        if all(r.always_visible for r in scenegen.occlusion_report(video).values()):
            scenes.append(video)
    return scenes


def test_oracle_closure():
    """20 no-full-occlusion scenes: AP = AP50 = vAP = vAP50 = 1.0 exactly for
    every defined bucket, in under 5 seconds total."""
    started = time.perf_counter()
    all_frames, all_pairs = [], []
    for video in closure_scenes(20):
        assert video.length <= 20 and len(video.objects) <= 5
        frames, pair = run_and_collect(video)
        all_frames.extend(frames)
        all_pairs.append(pair)
    report = metrics.evaluate(all_frames, all_pairs)
    elapsed = time.perf_counter() - started
    for key, value in report.values.items():
        if value is not None:
            assert value == 1.0, f"{key} = {value!r}, expected exactly 1.0"
    for key in ("AP", "AP50", "vAP", "vAP50"):
        assert report.values[key] == 1.0
    assert elapsed < 5.0, f"oracle closure took {elapsed:.2f}s"
    _passed(f"oracle-closure ({elapsed:.2f}s)")


def bridging_scene(duration: int) -> scenegen.SyntheticVideo:
    """A 5x5 mover passing behind a static blocker sized so the full
    occlusion lasts exactly `duration` frames; pure integer translation and
    nothing ever touches the canvas border."""
    frames = duration + 10
    width = 10 + frames + 2
    mover = ObjectSpec(
        1, Shape("rect", 5, 5), (8.0, 2.0), depth=1, class_label=1, velocity=(0.0, 1.0)
    )
    blocker = ObjectSpec(
        2, Shape("rect", 10, 5 + duration - 1), (6.0, 9.0), depth=2, class_label=2
    )
    return scenegen.generate(
        SceneSpec((24, width), frames, (mover, blocker), name=f"bridge{duration}")
    )


def test_occlusion_bridging():
    """Full occlusions of 1-5 frames: every Tracked mask equals the GT amodal
    mask exactly (IoU = 1.0 per occluded frame) and vAP50 = 1.0."""
    for duration in range(1, 6):
        video = bridging_scene(duration)
        report = scenegen.occlusion_report(video)[1]
        assert report.streaks == [(8, duration)]
        result = run_sequence(video, oracle_backends(video), PipelineConfig(seed=5))
        occluded_frames = 0
        for out in result.outputs:
            for pred in out.predictions:
                if pred.instance != 1 or not report.fully_occluded[out.t - 1]:
                    continue
                assert pred.source == "tracked"
                assert masks.iou(pred.mask, video.track(1).amodal[out.t - 1]) == 1.0
                occluded_frames += 1
        assert occluded_frames == duration
        records = formats.records_from_run(result, video.name)
        pairs = [
            (
                formats.pred_tracks_for_eval(records, video.name, video.length),
                formats.gt_tracks_for_eval(video),
            )
        ]
        values, _ = metrics.evaluate_video_level(pairs)
        assert values["vAP50"] == 1.0
    _passed("occlusion-bridging (durations 1-5)")


def test_metric_oracle_equivalence():
    """>= 200 random image-level cases (<= 3 GT, <= 4 preds, 8x8) and 100
    video-level cases (<= 3 tracks x 4 frames): AP and vAP match the
    brute-force matcher + PR-integration oracle within 1e-9."""
    rng = np.random.default_rng(20240901)
    thresholds = metrics.EvalConfig().iou_thresholds

    def check(ours, reference):
        if ours is None or reference is None:
            assert ours is None and reference is None
        else:
            assert abs(ours - reference) < 1e-9

    image_cases = 0
    for _ in range(200):
        n_gt, n_pred = int(rng.integers(0, 4)), int(rng.integers(0, 5))
        gts = [rng.random((8, 8)) < 0.4 for _ in range(n_gt)]
        preds = [(rng.random((8, 8)) < 0.4, float(rng.random())) for _ in range(n_pred)]
        frame = metrics.FrameEval(
            preds=[metrics.PredInstance(m, s) for m, s in preds],
            gts=[metrics.GtInstance(m, 0.0, float(masks.area(m) or 1)) for m in gts],
        )
        values, _ = metrics.evaluate_image_level(
            [frame], metrics.EvalConfig(iou_thresholds=thresholds)
        )
        per_thr = []
        for thr in thresholds:
            triples = [
                ([masks.iou(m, g) for g in gts], s, i)
                for i, (m, s) in enumerate(preds)
            ]
            per_thr.append(ap_bf([(triples, n_gt, [True] * n_gt)], thr))
        reference = (
            None
            if all(v is None for v in per_thr)
            else float(np.mean([v for v in per_thr if v is not None]))
        )
        check(values["AP"], reference)
        image_cases += 1
    assert image_cases >= 200

    video_cases = 0
    for _ in range(100):
        frames = 4
        n_gt, n_pred = int(rng.integers(1, 4)), int(rng.integers(0, 4))

        def track_masks():
            return [
                (rng.random((8, 8)) < 0.4) if rng.random() > 0.2 else None
                for _ in range(frames)
            ]

        gts = [metrics.InstanceTrack(i, track_masks()) for i in range(n_gt)]
        preds = [
            metrics.InstanceTrack(10 + i, track_masks(), float(rng.random()))
            for i in range(n_pred)
        ]
        values, _ = metrics.evaluate_video_level(
            [(preds, gts)], metrics.EvalConfig(iou_thresholds=thresholds)
        )
        per_thr = []
        for thr in thresholds:
            triples = [
                ([viou_bf(p.masks, g.masks) for g in gts], p.score, i)
                for i, p in enumerate(preds)
            ]
            per_thr.append(ap_bf([(triples, n_gt, [True] * n_gt)], thr))
        reference = float(np.mean([v for v in per_thr]))
        check(values["vAP"], reference)
        video_cases += 1
    assert video_cases >= 100
    _passed(f"metric-oracle-equivalence ({image_cases} image + {video_cases} video cases)")


def test_viou_identity():
    """100 random track pairs: the track overlap equals the IoU of the
    temporally stacked masks within 1e-12."""
    rng = np.random.default_rng(555)
    for _ in range(100):
        frames = int(rng.integers(1, 6))
        h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        pred = [rng.random((h, w)) < 0.5 for _ in range(frames)]
        gt = [rng.random((h, w)) < 0.5 for _ in range(frames)]
        value = metrics.viou(
            metrics.InstanceTrack(1, list(pred)), metrics.InstanceTrack(2, list(gt))
        )
        stacked = masks.iou(np.vstack(pred), np.vstack(gt))
        assert abs(value - stacked) < 1e-12
    _passed("viou-stacked-identity (100 pairs)")


def test_erosion_sampling_guarantee():
    """100 random masks, kernels {3, 7}: whenever the erosion is nonempty,
    every sampled point sits at Chebyshev distance >= floor(k/2) from the
    mask complement."""
    rng = np.random.default_rng(808)
    checked = 0
    for _ in range(100):
        h, w = 16, 16
        m = rng.random((h, w)) < 0.75
        if not m.any():
            m[h // 2, w // 2] = True
        unset = np.argwhere(~m)
        for kernel in (3, 7):
            if masks.area(masks.erode(m, kernel)) == 0:
                continue
            pts = sample_points(
                m, 3, SamplingStrategy("erosion", kernel), seed=int(rng.integers(2**32))
            )
            for p in pts.points:
                r, c = masks.pixel_to_rowcol(p, w)
                if unset.size == 0:
                    continue
                dist = np.abs(unset - np.array([r - 1, c - 1])).max(axis=1).min()
                assert dist >= kernel // 2, (kernel, (r, c), dist)
        checked += 1
    assert checked == 100
    _passed("erosion-sampling-guarantee (100 masks, kernels 3 and 7)")


@pytest.fixture
def ablation_suite(tmp_path):
    paths = []
    for i, seed in enumerate((101, 202, 303)):
        spec = scenegen.random_scene_spec(
            seed=seed, dims=(64, 64), frames=10, n_objects=5,
            min_size=8, max_size=16, name=f"abl{i}",
        )
        path = tmp_path / f"abl{i}.json"
        formats.save_scene(path, scenegen.generate(spec))
        paths.append(str(path))
    return paths


def test_ablation_harness_shape_and_ordering(ablation_suite, tmp_path, capsys):
    """`ablate` emits exactly the K-sweep and strategy-sweep table row sets
    (7 metrics, mean +- std over 3 seeded runs); with the confusable amodal
    oracle and boundary-bleeding visible masks the point-selection sweep
    shows Erosion(7) >= Erosion(3) >= Random on AP."""
    expected_rows = ["AP", "AP50", "AP50_P", "AP50_H", "AP50_L", "AP50_M", "AP50_S"]

    # K sweep over 1..4 (the prompt-count table shape), noisy backends
    k_out = tmp_path / "k_sweep.json"
    rc = main(
        ["ablate", *sum([["--scene", p] for p in ablation_suite], []),
         "-K", "1,2,3,4", "--strategies", "random", "--repeats", "3",
         "--seed", "42", "--vis", "noisy:0.1:2", "--amodal", "confusable",
         "--format", "json", "-o", str(k_out)]
    )
    assert rc == 0
    k_doc = json.loads(k_out.read_text())
    assert k_doc["metrics"] == expected_rows
    assert [c["label"] for c in k_doc["cells"]] == ["K=1", "K=2", "K=3", "K=4"]
    assert k_doc["repeats"] == 3
    for cell in k_doc["cells"]:
        defined = [k for k, v in cell["mean"].items() if v is not None]
        assert defined, cell["label"]
        for key in defined:
            assert cell["std"][key] is not None  # std present for R >= 2

    # strategy sweep with the confusable oracle + dilated noisy VIS
    s_out = tmp_path / "strategy_sweep.json"
    rc = main(
        ["ablate", *sum([["--scene", p] for p in ablation_suite], []),
         "-K", "1", "--strategies", "random,saliency,erosion:3,erosion:7",
         "--repeats", "3", "--seed", "42",
         "--vis", "noisy:0.1:2", "--amodal", "confusable", "--tracker", "oracle",
         "--format", "json", "-o", str(s_out)]
    )
    assert rc == 0
    s_doc = json.loads(s_out.read_text())
    assert s_doc["metrics"] == expected_rows
    labels = [c["label"] for c in s_doc["cells"]]
    assert labels == ["random", "saliency", "erosion:3", "erosion:7"]
    ap = {c["label"]: c["mean"]["AP"] for c in s_doc["cells"]}
    assert ap["erosion:7"] >= ap["erosion:3"] >= ap["random"], ap
    capsys.readouterr()
    _passed(
        "ablation-harness (AP random={:.3f} <= erosion3={:.3f} <= erosion7={:.3f})".format(
            ap["random"], ap["erosion:3"], ap["erosion:7"]
        )
    )


def test_oracle_ablation_cells_are_perfect(ablation_suite, tmp_path, capsys):
    """With oracle backends every defined ablation cell is 1.0 +- 0.0."""
    out = tmp_path / "oracle_grid.json"
    rc = main(
        ["ablate", "--scene", ablation_suite[0], "-K", "1,2",
         "--strategies", "random,erosion:3", "--repeats", "3", "--seed", "1",
         "--format", "json", "-o", str(out)]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    for cell in doc["cells"]:
        for key, mean in cell["mean"].items():
            if mean is not None:
                assert mean == 1.0, (cell["label"], key, mean)
                assert cell["std"][key] == 0.0
    capsys.readouterr()
    _passed("ablation-oracle-closure (all defined cells 1.0 +- 0.0)")


def test_end_to_end_determinism(tmp_path):
    """Two full generate -> run -> eval executions with identical seeds:
    byte-identical prediction streams and reports."""
    outputs = []
    for attempt in ("first", "second"):
        base = tmp_path / attempt
        base.mkdir()
        scene = base / "scene.json"
        preds = base / "preds.jsonl"
        report = base / "report.json"
        assert main(["generate", "--gt-out", str(scene), "--seed", "31", "--name", "det"]) == 0
        assert main(
            ["run", "--scene", str(scene), "-o", str(preds), "--seed", "9",
             "--points", "erosion:3", "-K", "2"]
        ) == 0
        assert main(
            ["eval", "--pred", str(preds), "--gt", str(scene), "-o", str(report)]
        ) == 0
        outputs.append(
            (scene.read_bytes(), preds.read_bytes(), report.read_bytes())
        )
    assert outputs[0] == outputs[1]
    _passed("end-to-end-determinism (byte-identical streams and reports)")


def test_online_causality():
    """10 scenes: per-frame outputs are invariant to truncating future
    frames (bit-exact prefix of the prediction stream)."""
    checked = 0
    for seed in range(1, 11):
        spec = scenegen.random_scene_spec(seed=seed, frames=10, n_objects=3)
        full_video = scenegen.generate(spec)
        cfg = PipelineConfig(seed=17)
        full = run_sequence(full_video, oracle_backends(full_video), cfg)
        full_records = formats.records_from_run(full, spec.name)
        cut = 6
        truncated = scenegen.generate(
            SceneSpec(spec.dims, cut, spec.objects, spec.seed, spec.name)
        )
        part = run_sequence(truncated, oracle_backends(truncated), cfg)
        part_records = formats.records_from_run(part, spec.name)
        assert part_records == [r for r in full_records if r.t <= cut]
        checked += 1
    assert checked == 10
    _passed("online-causality (10 scenes, truncation-invariant)")
