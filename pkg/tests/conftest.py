"""Shared helpers for the test suite."""

import numpy as np

from triview.camera import CameraIntrinsics
from triview.rig import RigTriangulation
from triview.scene import look_at_pose


def pose_for_plane_point(tri: RigTriangulation, uv, intrinsics=None, pull_in=0.8):
    """Camera pose whose center projects exactly onto 2D plane point ``uv``.

    Inverts the rig projection: a point maps to ``uv`` iff it shares the
    azimuth of ``uv`` and sits at the axial height whose cylinder point lies
    on the ray from the shared origin through the lifted plane point. The
    center is pulled radially inward by ``pull_in`` (projection is invariant
    to radial distance).
    """
    uv = np.asarray(uv, dtype=np.float64)
    radius_2d = np.linalg.norm(uv)
    if radius_2d < 1e-9:
        raise ValueError("plane point on the axis has no unique azimuth")
    origin = tri.ray_origin
    lifted = tri.lift(uv)
    s = tri.fit.radius / radius_2d
    p_cyl = origin + s * (lifted - origin)
    axial = np.dot(p_cyl - tri.fit.base, tri.fit.axis)
    axis_point = tri.fit.base + axial * tri.fit.axis
    center = axis_point + pull_in * (p_cyl - axis_point)
    if intrinsics is None:
        intrinsics = CameraIntrinsics(
            fx=300.0, fy=300.0, cx=128.0, cy=128.0, width=256, height=256
        )
    target = tri.fit.base + 0.5 * tri.fit.height * tri.fit.axis
    return look_at_pose(center, target, intrinsics)


def sample_interior_plane_points(tri: RigTriangulation, count: int, rng):
    """Uniform samples over the interior of the triangulated hull."""
    pts = tri.points2d
    areas = []
    for a, b, c in tri.faces:
        areas.append(
            0.5
            * abs(
                (pts[b, 0] - pts[a, 0]) * (pts[c, 1] - pts[a, 1])
                - (pts[b, 1] - pts[a, 1]) * (pts[c, 0] - pts[a, 0])
            )
        )
    areas = np.asarray(areas)
    chosen = rng.choice(len(tri.faces), size=count, p=areas / areas.sum())
    out = []
    for f in chosen:
        a, b, c = (pts[i] for i in tri.faces[f])
        r1, r2 = rng.uniform(size=2)
        sqrt_r1 = np.sqrt(r1)
        w = np.array([1.0 - sqrt_r1, sqrt_r1 * (1.0 - r2), sqrt_r1 * r2])
        out.append(w[0] * a + w[1] * b + w[2] * c)
    return np.asarray(out)
