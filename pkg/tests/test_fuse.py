"""Tests for view metadata, confidence weighting, fusion, and pull-push."""

import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from triview.camera import CameraIntrinsics, CameraPose
from triview.fuse import (
    FusedPlane,
    ViewMeta,
    ViewWeights,
    composite_on_black,
    confidence_weights,
    fuse_features,
    pull_push,
    synthesize,
    view_meta,
)
from triview.pyramid import AlphaMap
from triview.sweep import WarpedFeature


def pose_with_rotation(rotation):
    intr = CameraIntrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=100, height=100)
    return CameraPose(rotation=rotation, translation=np.zeros(3), intrinsics=intr)


def warped(feature, valid=None):
    feature = np.asarray(feature, dtype=np.float32)
    if valid is None:
        valid = np.ones(feature.shape[:2], dtype=bool)
    return WarpedFeature(feature=feature, validity=valid, mask=valid.copy(), inbounds=np.ones_like(valid))


class TestViewMeta:
    def test_same_pose(self):
        pose = pose_with_rotation(np.eye(3))
        meta = view_meta(pose, pose)
        assert meta.azimuth == 0.0
        assert meta.elevation == 0.0

    def test_quarter_turn_about_up(self):
        # Source looks along world +x while the target looks along +z.
        source = pose_with_rotation(np.array([[0.0, 0, -1], [0, 1, 0], [1, 0, 0]]))
        target = pose_with_rotation(np.eye(3))
        meta = view_meta(source, target)
        assert meta.azimuth == pytest.approx(math.pi / 2, abs=1e-9)
        assert meta.elevation == pytest.approx(0.0, abs=1e-9)

    def test_pitched_up(self):
        r = Rotation.from_euler("x", -30, degrees=True).as_matrix()
        meta = view_meta(pose_with_rotation(r), pose_with_rotation(np.eye(3)))
        assert meta.elevation == pytest.approx(math.pi / 6, abs=1e-9)
        assert meta.azimuth == pytest.approx(0.0, abs=1e-9)


class TestConfidenceWeights:
    def test_symmetric_views(self):
        f = np.full((4, 4, 8), 0.5, dtype=np.float32)
        metas = [ViewMeta(0.1, 0.0)] * 3
        w = confidence_weights([warped(f)] * 3, metas)
        np.testing.assert_allclose(w.weights, 1.0 / 3.0, atol=1e-12)
        assert w.valid.all()

    def test_single_valid_view(self):
        f = np.full((2, 2, 8), 0.5, dtype=np.float32)
        none = np.zeros((2, 2), dtype=bool)
        views = [warped(f), warped(f, none), warped(f, none)]
        w = confidence_weights(views, [ViewMeta(0.0, 0.0)] * 3)
        np.testing.assert_allclose(w.weights[0], 1.0)
        np.testing.assert_allclose(w.weights[1:], 0.0)

    def test_angular_ratio(self):
        f = np.full((2, 2, 8), 0.5, dtype=np.float32)
        metas = [ViewMeta(0.0, 0.0), ViewMeta(0.5, 0.0), ViewMeta(0.0, 0.0)]
        w = confidence_weights([warped(f)] * 3, metas, kappa_photo=5.0, kappa_ang=2.0)
        ratio = w.weights[0, 0, 0] / w.weights[1, 0, 0]
        assert ratio == pytest.approx(math.e, rel=1e-9)

    def test_sum_is_zero_or_one(self):
        rng = np.random.default_rng(2)
        f = [rng.uniform(-1, 1, (6, 6, 8)).astype(np.float32) for _ in range(3)]
        valid = [rng.uniform(size=(6, 6)) > 0.4 for _ in range(3)]
        w = confidence_weights(
            [warped(fi, vi) for fi, vi in zip(f, valid)],
            [ViewMeta(0.1, 0.05)] * 3,
        )
        total = w.weights.sum(axis=0)
        assert np.all((np.abs(total - 1.0) < 1e-6) | (total == 0.0))


class TestFuseFeatures:
    def test_one_hot(self):
        rng = np.random.default_rng(5)
        views = [warped(rng.uniform(-1, 1, (3, 3, 8)).astype(np.float32)) for _ in range(3)]
        w = np.zeros((3, 3, 3))
        w[2] = 1.0
        fused = fuse_features(views, ViewWeights(weights=w, valid=np.ones((3, 3), bool)))
        np.testing.assert_array_equal(fused.values, views[2].feature)

    def test_identical_views(self):
        rng = np.random.default_rng(6)
        f = rng.uniform(-1, 1, (4, 4, 8)).astype(np.float32)
        w = rng.dirichlet([1, 1, 1], size=(4, 4)).transpose(2, 0, 1)
        fused = fuse_features([warped(f)] * 3, ViewWeights(weights=w, valid=np.ones((4, 4), bool)))
        np.testing.assert_allclose(fused.values, f, atol=1e-12)

    def test_half_half(self):
        views = [
            warped(np.full((2, 2, 1), v, dtype=np.float32)) for v in (0.0, 1.0, 7.0)
        ]
        w = np.stack([np.full((2, 2), 0.5), np.full((2, 2), 0.5), np.zeros((2, 2))])
        fused = fuse_features(views, ViewWeights(weights=w, valid=np.ones((2, 2), bool)))
        np.testing.assert_allclose(fused.values[..., 0], 0.5)


class TestPullPush:
    def test_no_holes_identity(self):
        rng = np.random.default_rng(7)
        values = rng.uniform(size=(16, 16, 3))
        out = pull_push(values, np.ones((16, 16), dtype=bool))
        np.testing.assert_array_equal(out, values)

    def test_fully_invalid(self):
        out = pull_push(np.ones((8, 8, 3)), np.zeros((8, 8), dtype=bool))
        np.testing.assert_allclose(out, 0.0)

    def test_single_pixel_hole_constant_field(self):
        values = np.full((16, 16, 3), 0.7)
        valid = np.ones((16, 16), dtype=bool)
        valid[8, 8] = False
        out = pull_push(values, valid)
        np.testing.assert_allclose(out[8, 8], 0.7, atol=1e-9)
        np.testing.assert_array_equal(out[valid], values[valid])

    def test_2d_plane(self):
        values = np.full((8, 8), 0.25)
        valid = np.ones((8, 8), dtype=bool)
        valid[2, 3] = False
        out = pull_push(values, valid)
        assert out.shape == (8, 8)
        np.testing.assert_allclose(out[2, 3], 0.25, atol=1e-9)


class TestSynthesize:
    def make_fused(self, rgb, valid):
        # Feature channels store RGB mapped into [-1, 1].
        values = np.concatenate(
            [2.0 * rgb - 1.0, np.zeros(rgb.shape[:2] + (5,))], axis=-1
        ).astype(np.float32)
        return FusedPlane(values=values, valid=valid)

    def test_no_holes(self):
        rng = np.random.default_rng(9)
        rgb = rng.uniform(size=(8, 8, 3))
        fused = self.make_fused(rgb, np.ones((8, 8), dtype=bool))
        alpha = AlphaMap(values=np.ones((8, 8)))
        out, out_alpha = synthesize([fused], [alpha])
        np.testing.assert_allclose(out, rgb, atol=1e-6)
        np.testing.assert_allclose(out_alpha.values, 1.0)

    def test_fully_invalid(self):
        fused = self.make_fused(np.zeros((8, 8, 3)), np.zeros((8, 8), dtype=bool))
        alpha = AlphaMap(values=np.zeros((8, 8)))
        out, out_alpha = synthesize([fused], [alpha])
        np.testing.assert_allclose(out, 0.0)
        np.testing.assert_allclose(out_alpha.values, 0.0)

    def test_hole_filled_with_surrounding_color(self):
        rgb = np.full((16, 16, 3), 0.6)
        valid = np.ones((16, 16), dtype=bool)
        valid[5, 5] = False
        fused = self.make_fused(rgb, valid)
        alpha = AlphaMap(values=np.ones((16, 16)))
        out, _ = synthesize([fused], [alpha])
        np.testing.assert_allclose(out[5, 5], 0.6, atol=1e-6)

    def test_composite_on_black(self):
        rgb = np.full((4, 4, 3), 0.8)
        alpha = AlphaMap(values=np.zeros((4, 4)))
        np.testing.assert_allclose(composite_on_black(rgb, alpha), 0.0)
