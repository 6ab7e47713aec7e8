"""Tests for depth hypotheses, plane-induced homographies, and warping."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from triview.camera import (
    CameraIntrinsics,
    CameraPose,
    NonPositiveDepth,
    project,
    unproject,
)
from triview.sweep import (
    LevelOutOfRange,
    SingularHomography,
    coarse_hypotheses,
    plane_homography,
    refinement_hypotheses,
    warp,
    warp_at_depth,
    window_epsilon,
    window_offsets,
)


def make_pose(rotation=None, translation=None, fx=100.0, cx=50.0, size=100):
    return CameraPose(
        rotation=np.eye(3) if rotation is None else rotation,
        translation=np.zeros(3) if translation is None else np.asarray(translation, float),
        intrinsics=CameraIntrinsics(fx=fx, fy=fx, cx=cx, cy=cx, width=size, height=size),
    )


class TestCoarseHypotheses:
    def test_endpoints_and_count(self):
        hyps = coarse_hypotheses()
        assert hyps.shared[0] == 0.5
        assert hyps.shared[-1] == 8.5
        assert hyps.count == 32

    def test_spacing(self):
        hyps = coarse_hypotheses()
        np.testing.assert_allclose(np.diff(hyps.shared), 8.0 / 31.0)


class TestWindowOffsets:
    def test_level_one(self):
        np.testing.assert_allclose(
            window_offsets(1), [-0.02, -0.01, 0.0, 0.01, 0.02], atol=1e-15
        )

    def test_epsilon_values(self):
        assert window_epsilon(0) == pytest.approx(0.01)
        assert window_epsilon(5) == pytest.approx(0.32)

    def test_epsilon_doubles(self):
        for level in range(5):
            assert window_epsilon(level + 1) / window_epsilon(level) == 2.0

    def test_level_out_of_range(self):
        with pytest.raises(LevelOutOfRange):
            window_offsets(6)

    def test_even_count_rejected(self):
        with pytest.raises(ValueError):
            window_offsets(1, count=4)


class TestPlaneHomography:
    def test_identity_for_same_pose(self):
        pose = make_pose()
        for d in (0.5, 1.0, 7.0):
            h = plane_homography(pose, pose, d)
            h = h / h[2, 2]
            np.testing.assert_allclose(h, np.eye(3), atol=1e-12)

    def test_stereo_disparity(self):
        # Source shifted by baseline b along target x: pixel moves by -fx*b/d.
        b, d, fx = 0.3, 2.0, 100.0
        target = make_pose(fx=fx)
        source = make_pose(translation=[-b, 0.0, 0.0], fx=fx)
        h = plane_homography(source, target, d)
        p = h @ np.array([30.0, 40.0, 1.0])
        p = p[:2] / p[2]
        np.testing.assert_allclose(p, [30.0 - fx * b / d, 40.0], atol=1e-12)

    def test_nonpositive_depth(self):
        pose = make_pose()
        with pytest.raises(NonPositiveDepth):
            plane_homography(pose, pose, 0.0)

    def test_against_unproject_project_composition(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            r_t = Rotation.from_rotvec(0.2 * rng.normal(size=3)).as_matrix()
            r_s = Rotation.from_rotvec(0.2 * rng.normal(size=3)).as_matrix()
            target = make_pose(rotation=r_t, translation=0.3 * rng.normal(size=3))
            source = make_pose(rotation=r_s, translation=0.3 * rng.normal(size=3))
            d = rng.uniform(2.0, 6.0)
            h = plane_homography(source, target, d)
            for _ in range(20):
                pixel = rng.uniform(5.0, 95.0, size=2)
                point = unproject(target, pixel, d)
                expected, _ = project(source, point)
                q = h @ np.array([pixel[0], pixel[1], 1.0])
                got = q[:2] / q[2]
                assert np.max(np.abs(got - expected)) < 1e-6


class TestWarp:
    def test_identity_bit_exact(self):
        rng = np.random.default_rng(3)
        feat = rng.uniform(-1, 1, size=(20, 24, 8)).astype(np.float32)
        mask = rng.uniform(size=(20, 24)) > 0.2
        out = warp(feat, mask, np.eye(3), (20, 24))
        assert np.array_equal(out.feature[mask], feat[mask])
        assert np.array_equal(out.validity, mask)

    def test_integer_translation(self):
        feat = np.arange(16 * 16, dtype=np.float32).reshape(16, 16, 1)
        mask = np.ones((16, 16), dtype=bool)
        # Map target pixel x to source pixel x + 2.
        h = np.eye(3)
        h[0, 2] = 2.0
        out = warp(feat, mask, h, (16, 16))
        assert np.array_equal(out.feature[:, :-2, 0], feat[:, 2:, 0])
        assert not out.validity[:, -2:].any()
        assert out.validity[:, :-2].all()

    def test_half_pixel_translation_blends(self):
        feat = np.zeros((8, 8, 1), dtype=np.float32)
        feat[:, 4:] = 1.0
        h = np.eye(3)
        h[0, 2] = 0.5
        out = warp(feat, np.ones((8, 8), dtype=bool), h, (8, 8))
        np.testing.assert_allclose(out.feature[:, 3, 0], 0.5)
        np.testing.assert_allclose(out.feature[:, 2, 0], 0.0)
        np.testing.assert_allclose(out.feature[:, 4:7, 0], 1.0)

    def test_singular_homography(self):
        with pytest.raises(SingularHomography):
            warp(np.zeros((4, 4, 1), np.float32), np.ones((4, 4), bool), np.zeros((3, 3)), (4, 4))

    def test_roundtrip_on_integer_aligned_shift(self):
        # fx*b/d = 100*0.04/2 = 2 px exactly; forward then back is identity.
        target = make_pose()
        source = make_pose(translation=[-0.04, 0.0, 0.0])
        d = 2.0
        h_fwd = plane_homography(source, target, d)
        h_back = plane_homography(target, source, d)
        rng = np.random.default_rng(5)
        feat = rng.uniform(-1, 1, size=(32, 32, 4)).astype(np.float32)
        mask = np.ones((32, 32), dtype=bool)
        to_source = warp(feat, mask, h_back, (32, 32))
        back = warp(to_source.feature, to_source.validity, h_fwd, (32, 32))
        both = back.validity & mask
        assert both.sum() > 0.5 * mask.sum()
        assert np.max(np.abs(back.feature[both] - feat[both])) < 1e-4


class TestWarpAtDepth:
    def test_matches_homography_at_constant_depth(self):
        target = make_pose()
        source = make_pose(
            rotation=Rotation.from_rotvec([0.0, 0.1, 0.0]).as_matrix(),
            translation=[-0.2, 0.05, 0.0],
        )
        rng = np.random.default_rng(6)
        feat = rng.uniform(-1, 1, size=(40, 40, 8)).astype(np.float32)
        mask = np.ones((40, 40), dtype=bool)
        d = 3.0
        via_h = warp(feat, mask, plane_homography(source, target, d), (40, 40))
        via_d = warp_at_depth(feat, mask, source, target, np.full((40, 40), d))
        assert np.array_equal(via_h.validity, via_d.validity)
        np.testing.assert_allclose(via_h.feature, via_d.feature, atol=1e-5)

    def test_nan_depth_invalid(self):
        pose = make_pose()
        depth = np.full((8, 8), np.nan)
        out = warp_at_depth(np.ones((8, 8, 1), np.float32), np.ones((8, 8), bool), pose, pose, depth)
        assert not out.validity.any()
        np.testing.assert_allclose(out.feature, 0.0)


class TestHypothesisSet:
    def test_refinement_symmetric(self):
        base = np.full((4, 4), 3.0)
        hyps = refinement_hypotheses(base, level=2)
        assert hyps.count == 5
        np.testing.assert_allclose(hyps.depth_plane(2), 3.0)
        np.testing.assert_allclose(hyps.depth_plane(0), 3.0 - window_epsilon(2))

    def test_coarse_plane(self):
        hyps = coarse_hypotheses(count=4)
        plane = hyps.depth_plane(0, shape=(2, 2))
        np.testing.assert_allclose(plane, 0.5)


class TestFrontoparallelPlaneScene:
    def test_warp_reproduces_target_on_plane(self):
        # A scene that IS the swept plane: warping a source render at the true
        # depth must reproduce the target render (bilinear noise only).
        from triview.pyramid import feature_channels
        from triview.scene import CheckerPlane, SceneSpec, look_at_pose, render

        intr = CameraIntrinsics(fx=240.0, fy=240.0, cx=64.0, cy=64.0, width=128, height=128)
        spec = SceneSpec(
            plane=CheckerPlane(
                cell_size=1.5, color_a=(0.7, 0.7, 0.7), color_b=(0.55, 0.55, 0.55)
            ),
            spheres=(),
            stage=((-2.0, 2.0), (-2.0, 2.0), (0.0, 2.0)),
        )
        target = look_at_pose([0.0, 0.0, 3.0], [0.0, 0.0, 0.0], intr, up=(0, 1, 0))
        source = look_at_pose([0.25, 0.0, 3.0], [0.0, 0.0, 0.0], intr, up=(0, 1, 0))
        rgb_t, depth_t, mask_t = render(spec, target)
        rgb_s, _, mask_s = render(spec, source)

        h = plane_homography(source, target, 3.0)
        out = warp(rgb_s.astype(np.float32), mask_s, h, (128, 128))
        valid = out.validity & mask_t
        assert valid.mean() > 0.5
        mae = np.abs(out.feature[valid] - rgb_t[valid]).mean()
        assert mae < 1e-3
