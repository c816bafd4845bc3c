from __future__ import annotations

import numpy as np
import pytest

from samodal import backends, masks, scenegen
from samodal.backends import (
    ConfusableOracleAmodal,
    NoisyTracker,
    NoisyVisible,
    OracleAmodal,
    OracleTracker,
    OracleVisible,
)
from samodal.sampling import PointTuple
from samodal.scenegen import ObjectSpec, SceneSpec, Shape


@pytest.fixture
def occluded_scene():
    # instance 1 moves right under a static closer occluder (instance 2);
    # fully occluded on the middle frames
    mover = ObjectSpec(1, Shape("rect", 3, 3), (4.0, 0.0), depth=1, class_label=1,
                       velocity=(0.0, 1.0))
    blocker = ObjectSpec(2, Shape("rect", 7, 7), (2.0, 4.0), depth=2, class_label=2)
    return scenegen.generate(SceneSpec((12, 16), 10, (mover, blocker)))


def first_pixel(mask):
    return int(masks.mask_pixels(mask)[0])


def test_oracle_visible_skips_fully_occluded(occluded_scene):
    video = occluded_scene
    oracle = OracleVisible(video)
    report = scenegen.occlusion_report(video)[1]
    for t in range(1, video.length + 1):
        ids = {p.instance for p in oracle.predict(t, video.frames[t - 1])}
        assert (1 in ids) == (not report.fully_occluded[t - 1])
        assert 2 in ids


def test_oracle_visible_emits_gt_masks(occluded_scene):
    video = occluded_scene
    for pred in OracleVisible(video).predict(1, video.frames[0]):
        track = video.track(pred.instance)
        assert np.array_equal(pred.mask, track.visible[0])
        assert pred.score == 1.0
        assert pred.class_label == track.spec.class_label


def test_visible_fraction_threshold(occluded_scene):
    video = occluded_scene
    report = scenegen.occlusion_report(video)[1]
    t = next(i for i, r in enumerate(report.rates) if r is not None and 0 < r < 1) + 1
    assert 1 in {p.instance for p in OracleVisible(video, 0.0).predict(t, None)}
    # a threshold above the visible fraction suppresses the instance
    fraction = 1.0 - report.rates[t - 1]
    assert 1 not in {
        p.instance for p in OracleVisible(video, fraction + 0.01).predict(t, None)
    }


def test_noisy_visible_drop_extremes(occluded_scene):
    video = occluded_scene
    assert all(
        NoisyVisible(video, 1.0, seed=3).predict(t, None) == []
        for t in range(1, video.length + 1)
    )
    clean = OracleVisible(video)
    noisy = NoisyVisible(video, 0.0, seed=3)
    for t in range(1, video.length + 1):
        a = clean.predict(t, video.frames[t - 1])
        b = noisy.predict(t, video.frames[t - 1])
        assert [p.instance for p in a] == [p.instance for p in b]
        assert all(np.array_equal(x.mask, y.mask) for x, y in zip(a, b))


def test_noisy_visible_drops_are_seeded_and_stable(occluded_scene):
    video = occluded_scene
    a = [p.instance for p in NoisyVisible(video, 0.5, seed=1).predict(3, None)]
    b = [p.instance for p in NoisyVisible(video, 0.5, seed=1).predict(3, None)]
    assert a == b


def test_noisy_visible_dilation_bleeds_past_boundary(occluded_scene):
    video = occluded_scene
    noisy = NoisyVisible(video, 0.0, dilate=2, seed=0)
    preds = noisy.predict(1, video.frames[0])
    gt = video.track(preds[0].instance).visible[0]
    assert masks.area(preds[0].mask) > masks.area(gt)
    assert not np.any(gt & ~preds[0].mask)  # dilation only grows


def test_oracle_amodal_returns_declared_instance(occluded_scene):
    video = occluded_scene
    oracle = OracleAmodal(video)
    prompt = PointTuple((first_pixel(video.track(1).visible[0]),), (1,))
    out = oracle.predict(1, video.frames[0], prompt, declared=1)
    assert np.array_equal(out, video.track(1).amodal[0])
    # prompt-position invariance within the instance's visible region
    for p in masks.mask_pixels(video.track(1).visible[0]):
        out2 = oracle.predict(1, video.frames[0], PointTuple((int(p),), (1,)), declared=1)
        assert np.array_equal(out2, out)


def test_confusable_resolves_by_pixel_owner(occluded_scene):
    video = occluded_scene
    confusable = ConfusableOracleAmodal(video)
    own = PointTuple((first_pixel(video.track(1).visible[0]),), (1,))
    other = PointTuple((first_pixel(video.track(2).visible[0]),), (1,))
    assert np.array_equal(
        confusable.predict(1, video.frames[0], own), video.track(1).amodal[0]
    )
    # a prompt on a pixel owned by another instance returns that instance's mask
    assert np.array_equal(
        confusable.predict(1, video.frames[0], other), video.track(2).amodal[0]
    )


def test_confusable_background_prompt_is_empty(occluded_scene):
    video = occluded_scene
    background = int(np.flatnonzero(video.frames[0].ravel() == 0)[0]) + 1
    out = ConfusableOracleAmodal(video).predict(
        1, video.frames[0], PointTuple((background,), (1,))
    )
    assert masks.area(out) == 0


def test_oracle_tracker_moves_by_gt_displacement(occluded_scene):
    video = occluded_scene
    tracker = OracleTracker(video)
    w = video.dims[1]
    queries = PointTuple(tuple(int(p) for p in masks.mask_pixels(video.track(1).visible[0])[:3]), (1, 1, 1))
    result = tracker.track(2, video.frames[1], queries, instance=1)
    for q, p in zip(queries.points, result.points):
        qr, qc = masks.pixel_to_rowcol(q, w)
        pr, pc = masks.pixel_to_rowcol(p, w)
        assert (pr - qr, pc - qc) == (0, 1)  # the mover's velocity
    # occlusion flag reflects GT visibility of the landing pixel
    vis = video.track(1).visible[1]
    for p, o in zip(result.points, result.occluded):
        r, c = masks.pixel_to_rowcol(p, w)
        assert o == (0 if vis[r - 1, c - 1] else 1)


def test_stationary_object_points_unmoved(occluded_scene):
    video = occluded_scene
    queries = PointTuple((first_pixel(video.track(2).visible[0]),), (1,))
    result = OracleTracker(video).track(2, video.frames[1], queries, instance=2)
    assert result.points == queries.points
    assert result.occluded == (0,)


def test_tracker_clips_to_grid():
    obj = ObjectSpec(1, Shape("rect", 2, 2), (0.0, 0.0), depth=1, velocity=(-2.0, 0.0))
    video = scenegen.generate(SceneSpec((6, 6), 2, (obj,)))
    queries = PointTuple((1,), (1,))  # top-left pixel
    result = OracleTracker(video).track(2, video.frames[1], queries, instance=1)
    r, c = masks.pixel_to_rowcol(result.points[0], 6)
    assert (r, c) == (1, 1)
    assert result.clipped == (1,)


def test_noisy_tracker_sigma_zero_matches_oracle(occluded_scene):
    video = occluded_scene
    queries = PointTuple((first_pixel(video.track(1).visible[0]),), (1,))
    a = OracleTracker(video).track(2, video.frames[1], queries, 1)
    b = NoisyTracker(video, 0.0, seed=9).track(2, video.frames[1], queries, 1)
    assert a == b
    c = NoisyTracker(video, 3.0, seed=9).track(2, video.frames[1], queries, 1)
    d = NoisyTracker(video, 3.0, seed=9).track(2, video.frames[1], queries, 1)
    assert c == d  # deterministic given seed


def test_build_specs(occluded_scene):
    video = occluded_scene
    assert isinstance(backends.build_visible("oracle", video, 0), OracleVisible)
    assert backends.build_visible("oracle:0.3", video, 0).min_visible_fraction == 0.3
    noisy = backends.build_visible("noisy:0.2:1", video, 7)
    assert (noisy.drop_rate, noisy.dilate, noisy.seed) == (0.2, 1, 7)
    assert isinstance(backends.build_amodal("confusable", video), ConfusableOracleAmodal)
    assert isinstance(backends.build_tracker("noisy:0.5", video, 0), NoisyTracker)
    with pytest.raises(ValueError):
        backends.build_visible("nope", video, 0)
    with pytest.raises(ValueError):
        backends.build_amodal("nope", video)
    with pytest.raises(ValueError):
        backends.build_tracker("nope", video, 0)


def test_oracle_visible_masks_are_pairwise_disjoint(occluded_scene):
    video = occluded_scene
    oracle = OracleVisible(video)
    for t in range(1, video.length + 1):
        preds = oracle.predict(t, video.frames[t - 1])
        for i, a in enumerate(preds):
            for b in preds[i + 1 :]:
                assert not np.any(a.mask & b.mask)
