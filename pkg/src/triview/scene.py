"""Analytic test scenes: deterministic rigs and a closed-form ray-cast renderer.

The renderer produces exact RGB, metric depth, and foreground masks for
checkered ground quads and two-tone spheres under fixed Lambertian lighting,
so pipeline stages can be verified against ground truth with no external
assets. Everything here is deterministic; no RNG is used on the oracle path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .camera import CameraIntrinsics, CameraPose
from .pyramid import DepthMap

LIGHT_DIRECTION = np.array([1.0, 1.0, -2.0]) / np.linalg.norm([1.0, 1.0, -2.0])
AMBIENT = 0.2
DIFFUSE = 0.8

DEFAULT_STAGE = ((-2.0, 2.0), (-2.0, 2.0), (0.0, 2.0))


@dataclass(frozen=True)
class CheckerPlane:
    """Checkered ground quad at z = 0, clipped to the stage footprint."""

    cell_size: float = 0.5
    color_a: tuple[float, float, float] = (0.85, 0.82, 0.78)
    color_b: tuple[float, float, float] = (0.45, 0.52, 0.60)

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be > 0")


@dataclass(frozen=True)
class Sphere:
    """Two-tone sphere; tone cells follow azimuth/polar angle parity."""

    center: tuple[float, float, float]
    radius: float
    color_a: tuple[float, float, float] = (0.85, 0.55, 0.40)
    color_b: tuple[float, float, float] = (0.50, 0.60, 0.85)
    bands: int = 6

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be > 0")


@dataclass(frozen=True)
class SceneSpec:
    """Composition of a ground plane and spheres inside a stage volume."""

    plane: Optional[CheckerPlane] = CheckerPlane()
    spheres: tuple[Sphere, ...] = ()
    stage: tuple[tuple[float, float], ...] = DEFAULT_STAGE

    def __post_init__(self):
        (x0, x1), (y0, y1), (z0, z1) = self.stage
        for s in self.spheres:
            c, r = np.asarray(s.center), s.radius
            inside = (
                x0 <= c[0] - r and c[0] + r <= x1
                and y0 <= c[1] - r and c[1] + r <= y1
                and z0 <= c[2] - r and c[2] + r <= z1
            )
            if not inside:
                raise ValueError(f"sphere at {s.center} exceeds the stage bounds")


def scene_to_dict(spec: SceneSpec) -> dict:
    doc: dict = {"stage": [list(b) for b in spec.stage]}
    doc["plane"] = (
        None
        if spec.plane is None
        else {
            "cell_size": spec.plane.cell_size,
            "color_a": list(spec.plane.color_a),
            "color_b": list(spec.plane.color_b),
        }
    )
    doc["spheres"] = [
        {
            "center": list(s.center),
            "radius": s.radius,
            "color_a": list(s.color_a),
            "color_b": list(s.color_b),
            "bands": s.bands,
        }
        for s in spec.spheres
    ]
    return doc


def scene_from_dict(doc: dict) -> SceneSpec:
    plane = None
    if doc.get("plane") is not None:
        p = doc["plane"]
        plane = CheckerPlane(
            cell_size=float(p["cell_size"]),
            color_a=tuple(p.get("color_a", CheckerPlane.color_a)),
            color_b=tuple(p.get("color_b", CheckerPlane.color_b)),
        )
    spheres = tuple(
        Sphere(
            center=tuple(s["center"]),
            radius=float(s["radius"]),
            color_a=tuple(s.get("color_a", Sphere.color_a)),
            color_b=tuple(s.get("color_b", Sphere.color_b)),
            bands=int(s.get("bands", 6)),
        )
        for s in doc.get("spheres", [])
    )
    stage = tuple(tuple(b) for b in doc.get("stage", DEFAULT_STAGE))
    return SceneSpec(plane=plane, spheres=spheres, stage=stage)


def load_scene(path: str | Path) -> SceneSpec:
    """Read a scene JSON document."""
    return scene_from_dict(json.loads(Path(path).read_text()))


def save_scene(path: str | Path, spec: SceneSpec) -> None:
    """Write a scene JSON document."""
    Path(path).write_text(json.dumps(scene_to_dict(spec), indent=2, sort_keys=True) + "\n")


def look_at_pose(
    center: np.ndarray,
    target: np.ndarray,
    intrinsics: CameraIntrinsics,
    up: np.ndarray = (0.0, 0.0, 1.0),
) -> CameraPose:
    """Camera at ``center`` looking at ``target`` with world-up roll stabilization."""
    center = np.asarray(center, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - center
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("camera center coincides with the look-at target")
    forward = forward / norm
    up = np.asarray(up, dtype=np.float64)
    x = np.cross(forward, up)
    xn = np.linalg.norm(x)
    if xn < 1e-9:
        raise ValueError("viewing direction is parallel to the up vector")
    x = x / xn
    y = np.cross(forward, x)
    r = np.stack([x, y, forward])
    return CameraPose(rotation=r, translation=-r @ center, intrinsics=intrinsics)


def make_rig(
    n_per_ring: int,
    rings: int,
    radius: float,
    heights: Sequence[float],
    look_at: np.ndarray,
    intrinsics: Optional[CameraIntrinsics] = None,
    stagger: bool = True,
) -> list[CameraPose]:
    """Evenly spaced inward-looking cameras on one or more rings.

    Args:
        n_per_ring: Cameras per ring (>= 3).
        rings: Number of rings; must equal ``len(heights)``.
        radius: Ring radius in meters.
        heights: One z height per ring.
        look_at: Common world point all optical axes pass through.
        intrinsics: Shared intrinsics; defaults to a 256x256 f=300 camera.
        stagger: Offset successive rings by half a camera spacing.
    """
    if n_per_ring < 3:
        raise ValueError("need at least 3 cameras per ring")
    if rings != len(heights):
        raise ValueError(f"rings={rings} but {len(heights)} heights given")
    if intrinsics is None:
        intrinsics = CameraIntrinsics(fx=300.0, fy=300.0, cx=128.0, cy=128.0, width=256, height=256)
    poses = []
    for ring, z in enumerate(heights):
        offset = 0.5 * ring if stagger else 0.0
        for k in range(n_per_ring):
            ang = 2.0 * np.pi * (k + offset) / n_per_ring
            center = np.array([radius * np.cos(ang), radius * np.sin(ang), z])
            poses.append(look_at_pose(center, look_at, intrinsics))
    return poses


def canonical_rig(intrinsics: Optional[CameraIntrinsics] = None) -> list[CameraPose]:
    """The 16-camera two-ring rig used throughout the test suite."""
    return make_rig(
        n_per_ring=8,
        rings=2,
        radius=3.0,
        heights=(0.8, 1.8),
        look_at=np.array([0.0, 0.0, 0.9]),
        intrinsics=intrinsics,
    )


def _checker_parity(u: np.ndarray, v: np.ndarray, cell: float) -> np.ndarray:
    return (np.floor(u / cell) + np.floor(v / cell)).astype(np.int64) % 2 == 0


def render(
    spec: SceneSpec, pose: CameraPose
) -> tuple[np.ndarray, DepthMap, np.ndarray]:
    """Ray-cast the scene from ``pose``.

    One primary ray per pixel center, nearest analytic hit, fixed directional
    Lambertian light. Background pixels are black with invalid depth and
    mask 0.

    Returns:
        ``(rgb, depth, mask)`` with rgb (H, W, 3) in [0, 1], depth a
        :class:`DepthMap` holding camera-frame z, and mask (H, W) bool.
    """
    k = pose.intrinsics
    h, w = k.height, k.width
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    u = jj + 0.5
    v = ii + 0.5
    d_cam = np.stack(
        [(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1
    )
    d_cam /= np.linalg.norm(d_cam, axis=-1, keepdims=True)
    d_world = d_cam @ pose.rotation  # each ray: R^T @ d_cam
    origin = -pose.rotation.T @ pose.translation

    t_hit = np.full((h, w), np.inf)
    rgb = np.zeros((h, w, 3))
    normal = np.zeros((h, w, 3))
    base = np.zeros((h, w, 3))
    hit_any = np.zeros((h, w), dtype=bool)

    if spec.plane is not None:
        dz = d_world[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(np.abs(dz) > 1e-12, -origin[2] / dz, np.inf)
        px = origin[0] + t * d_world[..., 0]
        py = origin[1] + t * d_world[..., 1]
        (x0, x1), (y0, y1), _ = spec.stage
        ok = (t > 1e-9) & (px >= x0) & (px <= x1) & (py >= y0) & (py <= y1)
        closer = ok & (t < t_hit)
        t_hit = np.where(closer, t, t_hit)
        parity = _checker_parity(px, py, spec.plane.cell_size)
        color = np.where(
            parity[..., None], np.array(spec.plane.color_a), np.array(spec.plane.color_b)
        )
        base = np.where(closer[..., None], color, base)
        normal = np.where(closer[..., None], np.array([0.0, 0.0, 1.0]), normal)
        hit_any |= closer

    for s in spec.spheres:
        c = np.asarray(s.center, dtype=np.float64)
        oc = origin - c
        b = np.einsum("ijk,k->ij", d_world, oc)
        disc = b * b - (np.dot(oc, oc) - s.radius**2)
        with np.errstate(invalid="ignore"):
            sq = np.sqrt(np.maximum(disc, 0.0))
        t = -b - sq
        ok = (disc > 0) & (t > 1e-9)
        closer = ok & (t < t_hit)
        t_hit = np.where(closer, t, t_hit)
        hit = origin + t[..., None] * d_world
        n = (hit - c) / s.radius
        az = np.arctan2(n[..., 1], n[..., 0])
        pol = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
        sector = np.pi / s.bands
        parity = (np.floor((az + np.pi) / sector) + np.floor(pol / sector)).astype(
            np.int64
        ) % 2 == 0
        color = np.where(parity[..., None], np.array(s.color_a), np.array(s.color_b))
        base = np.where(closer[..., None], color, base)
        normal = np.where(closer[..., None], n, normal)
        hit_any |= closer

    shade = AMBIENT + DIFFUSE * np.maximum(0.0, -normal @ LIGHT_DIRECTION)
    rgb = np.clip(base * shade[..., None], 0.0, 1.0)
    rgb[~hit_any] = 0.0

    depth_values = np.where(hit_any, t_hit * d_cam[..., 2], np.nan)
    return rgb, DepthMap(values=depth_values, level=0), hit_any


@dataclass(frozen=True)
class RenderedView:
    """One rendered camera: pose plus its ground-truth planes."""

    pose: CameraPose
    rgb: np.ndarray
    depth: DepthMap
    mask: np.ndarray


def render_view(spec: SceneSpec, pose: CameraPose) -> RenderedView:
    rgb, depth, mask = render(spec, pose)
    return RenderedView(pose=pose, rgb=rgb, depth=depth, mask=mask)
