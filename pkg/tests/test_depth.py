"""Tests for grouped correlation, cost volumes, and depth regression."""

import numpy as np
import pytest

from triview.depth import (
    BadGrouping,
    CostVolume,
    ShapeMismatch,
    build_cost_volume,
    estimate_alpha,
    group_correlation,
    regress_depth,
)
from triview.fuse import ViewWeights
from triview.sweep import HypothesisSet, WarpedFeature, coarse_hypotheses


def warped(feature, valid=None):
    feature = np.asarray(feature, dtype=np.float32)
    if valid is None:
        valid = np.ones(feature.shape[:2], dtype=bool)
    return WarpedFeature(feature=feature, validity=valid, mask=valid.copy(), inbounds=np.ones_like(valid))


class TestGroupCorrelation:
    def test_all_ones_self(self):
        f = np.ones(8)
        np.testing.assert_allclose(group_correlation(f, f), np.ones(4))

    def test_orthogonal_group(self):
        fa = np.zeros(8)
        fb = np.zeros(8)
        fa[0] = 1.0
        fb[1] = 1.0  # same group, orthogonal channels
        assert group_correlation(fa, fb)[0] == 0.0

    def test_hand_example(self):
        fa = np.array([1.0, 1, 0, 0, 0, 0, 0, 0])
        fb = np.array([1.0, 0, 0, 0, 0, 0, 0, 0])
        scores = group_correlation(fa, fb)
        assert scores[0] == pytest.approx(0.5)
        np.testing.assert_allclose(scores[1:], 0.0)

    def test_symmetry_exact(self):
        rng = np.random.default_rng(0)
        fa = rng.normal(size=(5, 5, 8))
        fb = rng.normal(size=(5, 5, 8))
        assert np.array_equal(group_correlation(fa, fb), group_correlation(fb, fa))

    def test_bad_grouping(self):
        with pytest.raises(BadGrouping):
            group_correlation(np.ones(6), np.ones(6), groups=4)


class TestBuildCostVolume:
    def test_identical_valid_views(self):
        rng = np.random.default_rng(1)
        f = rng.uniform(-1, 1, size=(4, 4, 8)).astype(np.float32)
        vol = build_cost_volume([[warped(f)], [warped(f)], [warped(f)]])
        expected = group_correlation(f, f).mean(axis=-1)
        np.testing.assert_allclose(vol.scores[0], expected, atol=1e-6)
        np.testing.assert_allclose(vol.validity[0], 1.0)

    def test_one_view_invalid(self):
        f = np.ones((2, 2, 8), dtype=np.float32)
        invalid = np.zeros((2, 2), dtype=bool)
        vol = build_cost_volume([[warped(f)], [warped(f)], [warped(f, invalid)]])
        np.testing.assert_allclose(vol.validity[0], 1.0 / 3.0)
        np.testing.assert_allclose(vol.scores[0], 1.0)

    def test_all_views_invalid(self):
        f = np.ones((2, 2, 8), dtype=np.float32)
        invalid = np.zeros((2, 2), dtype=bool)
        vol = build_cost_volume([[warped(f, invalid)]] * 3)
        np.testing.assert_allclose(vol.scores[0], 0.0)
        np.testing.assert_allclose(vol.validity[0], 0.0)

    def test_shape_mismatch(self):
        f = np.ones((2, 2, 8), dtype=np.float32)
        g = np.ones((3, 2, 8), dtype=np.float32)
        with pytest.raises(ShapeMismatch):
            build_cost_volume([[warped(f)], [warped(g)], [warped(f)]])


def volume_from_scores(scores, validity=None):
    scores = np.asarray(scores, dtype=np.float32)
    if validity is None:
        validity = np.ones_like(scores)
    return CostVolume(level=6, scores=scores, validity=validity)


class TestRegressDepth:
    def test_argmax_limit(self):
        hyps = coarse_hypotheses(count=8)
        scores = -np.ones((8, 1, 1), dtype=np.float32)
        scores[5] = 1.0
        depth, conf = regress_depth(volume_from_scores(scores), hyps, temperature=200.0)
        assert depth.values[0, 0] == pytest.approx(hyps.shared[5], abs=1e-9)
        assert conf[0, 0] > 0.999

    def test_uniform_scores_give_mean(self):
        hyps = coarse_hypotheses(count=8)
        scores = np.full((8, 2, 2), 0.25, dtype=np.float32)
        depth, conf = regress_depth(volume_from_scores(scores), hyps, 10.0)
        np.testing.assert_allclose(depth.values, hyps.shared.mean())
        np.testing.assert_allclose(conf, 1.0 / 8.0)

    def test_invalid_pixels(self):
        hyps = coarse_hypotheses(count=4)
        scores = np.zeros((4, 2, 2), dtype=np.float32)
        validity = np.ones_like(scores)
        validity[:, 0, 0] = 0.0
        depth, _ = regress_depth(volume_from_scores(scores, validity), hyps, 10.0)
        assert np.isnan(depth.values[0, 0])
        assert np.isfinite(depth.values[1, 1])

    def test_high_temperature_matches_argmax(self):
        rng = np.random.default_rng(3)
        hyps = coarse_hypotheses(count=16)
        scores = rng.uniform(-1, 1, size=(16, 32, 32)).astype(np.float32)
        depth, _ = regress_depth(volume_from_scores(scores), hyps, temperature=1e4)
        brute = hyps.shared[np.argmax(scores, axis=0)]
        agree = np.abs(depth.values - brute) < 1e-6
        assert agree.mean() > 0.99

    def test_refinement_mode_depths(self):
        base = np.full((2, 2), 3.0)
        hyps = HypothesisSet(level=1, base=base, offsets=np.array([-0.02, 0.0, 0.02]))
        scores = np.zeros((3, 2, 2), dtype=np.float32)
        scores[2] = 1.0
        depth, _ = regress_depth(volume_from_scores(scores), hyps, temperature=500.0)
        np.testing.assert_allclose(depth.values, 3.02, atol=1e-6)


class TestEstimateAlpha:
    def test_full_masks(self):
        masks = np.ones((3, 2, 2))
        weights = ViewWeights(
            weights=np.full((3, 2, 2), 1.0 / 3.0), valid=np.ones((2, 2), dtype=bool)
        )
        np.testing.assert_allclose(estimate_alpha(masks, weights).values, 1.0)

    def test_empty_masks(self):
        masks = np.zeros((3, 2, 2))
        weights = ViewWeights(
            weights=np.full((3, 2, 2), 1.0 / 3.0), valid=np.ones((2, 2), dtype=bool)
        )
        np.testing.assert_allclose(estimate_alpha(masks, weights).values, 0.0)

    def test_partial_masks_uniform_weights(self):
        masks = np.stack([np.ones((2, 2)), np.ones((2, 2)), np.zeros((2, 2))])
        weights = ViewWeights(
            weights=np.full((3, 2, 2), 1.0 / 3.0), valid=np.ones((2, 2), dtype=bool)
        )
        np.testing.assert_allclose(estimate_alpha(masks, weights).values, 2.0 / 3.0)

    def test_inbounds_fallback(self):
        masks = np.stack([np.ones((1, 2)), np.zeros((1, 2)), np.zeros((1, 2))])
        weights = ViewWeights(weights=np.zeros((3, 1, 2)), valid=np.zeros((1, 2), dtype=bool))
        inb = np.ones((3, 1, 2), dtype=bool)
        np.testing.assert_allclose(
            estimate_alpha(masks, weights, inbounds=inb).values, 1.0 / 3.0
        )
