"""Pinhole camera model: projection, unprojection, and pose interpolation.

Conventions used throughout the package:

- Rotations are world-to-camera; camera frame is x-right, y-down, z-forward.
- Continuous pixel coordinates place the center of array pixel (row i, col j)
  at (u, v) = (j + 0.5, i + 0.5).
- All lengths are meters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np


class BehindCamera(ValueError):
    """Point has non-positive depth in the camera frame."""


class NonPositiveDepth(ValueError):
    """Requested depth is not strictly positive."""


class DegenerateWeights(ValueError):
    """Barycentric weights are negative or do not sum to one."""


class RigError(ValueError):
    """Rig file is malformed or contains an invalid camera."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        if not (0 < self.cx < self.width) or not (0 < self.cy < self.height):
            raise ValueError("principal point must lie strictly inside the image")

    @property
    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def scaled(self, level: int) -> "CameraIntrinsics":
        """Intrinsics for pyramid level ``level`` (each level halves resolution)."""
        s = 2.0**level
        return CameraIntrinsics(
            fx=self.fx / s,
            fy=self.fy / s,
            cx=self.cx / s,
            cy=self.cy / s,
            width=-(-self.width // int(s)),
            height=-(-self.height // int(s)),
        )


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera extrinsics plus intrinsics of one pinhole camera."""

    rotation: np.ndarray
    translation: np.ndarray
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def optical_axis(self) -> np.ndarray:
        """Unit forward (camera +z) direction expressed in world coordinates."""
        return self.rotation[2].copy()

    def at_level(self, level: int) -> "CameraPose":
        """Same pose with intrinsics scaled for pyramid level ``level``."""
        return replace(self, intrinsics=self.intrinsics.scaled(level))


@dataclass(frozen=True)
class Ray:
    """Ray with unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("ray direction must be unit length")
        o.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


def camera_center(pose: CameraPose) -> np.ndarray:
    """World position of the camera center, -R^T t."""
    return -pose.rotation.T @ pose.translation


def project(pose: CameraPose, point: np.ndarray) -> tuple[np.ndarray, float]:
    """Project a world point into the camera.

    Args:
        point: World point, shape (3,).

    Returns:
        ``(pixel, depth)`` where pixel is (u, v) and depth is the camera-frame z.

    Raises:
        BehindCamera: If the point has camera-frame z <= 0.
    """
    p_cam = pose.rotation @ np.asarray(point, dtype=np.float64).reshape(3) + pose.translation
    z = p_cam[2]
    if z <= 0:
        raise BehindCamera(f"point has camera-frame depth {z:.6g} <= 0")
    k = pose.intrinsics
    pixel = np.array([k.fx * p_cam[0] / z + k.cx, k.fy * p_cam[1] / z + k.cy])
    return pixel, float(z)


def unproject(pose: CameraPose, pixel: np.ndarray, depth: float) -> np.ndarray:
    """World point at ``depth`` along the viewing ray through ``pixel``.

    Raises:
        NonPositiveDepth: If depth <= 0.
    """
    if depth <= 0:
        raise NonPositiveDepth(f"depth must be > 0, got {depth}")
    u, v = np.asarray(pixel, dtype=np.float64).reshape(2)
    k = pose.intrinsics
    p_cam = np.array([(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth])
    return pose.rotation.T @ (p_cam - pose.translation)


def rotation_to_quaternion(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) for a rotation matrix (Shepperd's method)."""
    r = np.asarray(r, dtype=np.float64)
    trace = r[0, 0] + r[1, 1] + r[2, 2]
    if trace > 0:
        s = np.sqrt(trace + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        )
    elif r[1, 1] >= r[2, 2]:
        s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array(
            [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array(
            [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
        )
    return q / np.linalg.norm(q)


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix for a unit quaternion (w, x, y, z)."""
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def interpolate_pose(
    triplet: Sequence[CameraPose],
    bary: np.ndarray,
    forward_jitter: float = 0.0,
) -> CameraPose:
    """Barycentric pose between three cameras, with optional forward offset.

    The rotation is a hemisphere-aligned weighted quaternion blend; the center
    is the barycentric combination of camera centers, shifted by
    ``forward_jitter`` along the blended optical axis. Intrinsics are copied
    from the first triplet member (rigs in scope are homogeneous).

    Args:
        triplet: Exactly three camera poses.
        bary: Three nonnegative weights summing to one.
        forward_jitter: Offset in meters along the blended forward axis.

    Raises:
        DegenerateWeights: If any weight < -1e-9 or the sum deviates from one
            by more than 1e-6.
    """
    if len(triplet) != 3:
        raise ValueError(f"expected 3 poses, got {len(triplet)}")
    w = np.asarray(bary, dtype=np.float64).reshape(3)
    if np.any(w < -1e-9) or abs(w.sum() - 1.0) > 1e-6:
        raise DegenerateWeights(f"invalid barycentric weights {w.tolist()}")

    quats = [rotation_to_quaternion(p.rotation) for p in triplet]
    for i in (1, 2):
        if np.dot(quats[i], quats[0]) < 0:
            quats[i] = -quats[i]
    q = w[0] * quats[0] + w[1] * quats[1] + w[2] * quats[2]
    norm = np.linalg.norm(q)
    if norm < 1e-12:
        raise DegenerateWeights("blended quaternion vanishes (antipodal rotations)")
    rotation = quaternion_to_rotation(q / norm)

    center = sum(wi * camera_center(p) for wi, p in zip(w, triplet))
    center = center + forward_jitter * rotation[2]
    translation = -rotation @ center
    return CameraPose(rotation=rotation, translation=translation, intrinsics=triplet[0].intrinsics)


def _parse_camera(entry: dict) -> tuple[str, CameraPose]:
    try:
        cam_id = str(entry["id"])
        k = np.asarray(entry["K"], dtype=np.float64).reshape(3, 3)
        r = np.asarray(entry["R"], dtype=np.float64).reshape(3, 3)
        t = np.asarray(entry["t"], dtype=np.float64).reshape(3)
        width = int(entry["width"])
        height = int(entry["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RigError(f"malformed camera entry: {exc}") from exc

    off_diag = np.array([k[0, 1], k[1, 0], k[2, 0], k[2, 1]])
    if np.max(np.abs(off_diag)) > 1e-9 or abs(k[2, 2] - 1.0) > 1e-9:
        raise RigError(f"camera {cam_id!r}: K is not an upper-triangular pinhole matrix")
    if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-6:
        raise RigError(f"camera {cam_id!r}: R is not orthonormal (tolerance 1e-6)")
    if np.linalg.det(r) < 0:
        raise RigError(f"camera {cam_id!r}: R is a reflection")

    # Re-orthonormalize so downstream code sees a clean rotation.
    u, _, vt = np.linalg.svd(r)
    r = u @ vt
    try:
        intr = CameraIntrinsics(
            fx=float(k[0, 0]), fy=float(k[1, 1]), cx=float(k[0, 2]), cy=float(k[1, 2]),
            width=width, height=height,
        )
        pose = CameraPose(rotation=r, translation=t, intrinsics=intr)
    except ValueError as exc:
        raise RigError(f"camera {cam_id!r}: {exc}") from exc
    return cam_id, pose


def load_rig(path: str | Path) -> tuple[list[str], list[CameraPose]]:
    """Load a rig JSON file.

    The document is ``{"cameras": [{"id", "K", "R", "t", "width", "height"}]}``
    with K and R row-major and R world-to-camera.

    Returns:
        ``(ids, poses)`` in file order.

    Raises:
        RigError: On schema violations or non-orthonormal rotations.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise RigError(f"invalid JSON: {exc}") from exc
    cameras = doc.get("cameras")
    if not isinstance(cameras, list) or not cameras:
        raise RigError("rig file must contain a non-empty 'cameras' list")
    ids, poses = [], []
    for entry in cameras:
        cam_id, pose = _parse_camera(entry)
        ids.append(cam_id)
        poses.append(pose)
    return ids, poses


def camera_to_dict(cam_id: str, pose: CameraPose) -> dict:
    """JSON-serializable dict for one camera, matching the rig file schema."""
    return {
        "id": cam_id,
        "K": pose.intrinsics.matrix.reshape(-1).tolist(),
        "R": pose.rotation.reshape(-1).tolist(),
        "t": pose.translation.tolist(),
        "width": pose.intrinsics.width,
        "height": pose.intrinsics.height,
    }


def save_rig(path: str | Path, ids: Sequence[str], poses: Sequence[CameraPose]) -> None:
    """Write a rig JSON file (inverse of :func:`load_rig`)."""
    doc = {"cameras": [camera_to_dict(i, p) for i, p in zip(ids, poses)]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_pose(path: str | Path) -> CameraPose:
    """Load a single camera pose stored in the rig-entry schema."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise RigError(f"invalid JSON: {exc}") from exc
    entry = doc["camera"] if "camera" in doc else doc
    _, pose = _parse_camera(entry)
    return pose


def save_pose(path: str | Path, pose: CameraPose, cam_id: str = "target") -> None:
    """Write a single camera pose as JSON."""
    Path(path).write_text(
        json.dumps({"camera": camera_to_dict(cam_id, pose)}, indent=2, sort_keys=True) + "\n"
    )
