"""Camera-triplet selection for inward-facing rigs.

Camera centers are fit with a cylinder, radially normalized onto its surface,
perspectively mapped onto a plane above the top cap, and triangulated in 2D.
A query view is assigned the triangle its projection falls into, giving three
supporting cameras that bracket it angularly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .camera import CameraPose, Ray, camera_center


class DegenerateRig(ValueError):
    """All camera centers lie on the cylinder axis."""


class OnAxis(ValueError):
    """Point lies on the cylinder axis and has no radial direction."""


class RayParallelOrDescending(ValueError):
    """Projection ray does not ascend toward the mapping plane."""


class Collinear(ValueError):
    """Points to triangulate are collinear."""


class DuplicatePoints(ValueError):
    """Two points to triangulate coincide."""


class DegenerateTriangle(ValueError):
    """Triangle has (near-)zero area."""


class OutsideCoverage(ValueError):
    """Query projects outside the triangulated camera hull."""


@dataclass(frozen=True)
class CylinderFit:
    """Cylinder with unit axis, bottom-cap center, radius and height."""

    axis: np.ndarray
    base: np.ndarray
    radius: float
    height: float

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError("cylinder axis must be unit length")
        if self.radius <= 0 or self.height < 0:
            raise ValueError("cylinder needs radius > 0 and height >= 0")
        o = np.asarray(self.base, dtype=np.float64).reshape(3)
        a.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "axis", a)
        object.__setattr__(self, "base", o)


@dataclass(frozen=True)
class ProjectionConfig:
    """Offsets for the perspective mapping.

    The ray origin sits ``origin_offset`` below the bottom cap along the axis
    and the mapping plane ``plane_offset`` above the top cap. The 1m/1m
    defaults are the configuration found to give the most balanced triangles
    on capture-stage rigs.
    """

    origin_offset: float = 1.0
    plane_offset: float = 1.0

    def __post_init__(self):
        if self.origin_offset <= 0:
            raise ValueError("origin_offset must be > 0")


@dataclass(frozen=True)
class TriangleQuality:
    """Shape statistics of one triangulation face."""

    min_angle: float
    aspect_ratio: float
    area: float


@dataclass(frozen=True)
class RigTriangulation:
    """Projected camera layout plus its Delaunay faces."""

    fit: CylinderFit
    config: ProjectionConfig
    points2d: np.ndarray
    faces: tuple[tuple[int, int, int], ...]
    plane_basis: tuple[np.ndarray, np.ndarray] = field(repr=False)

    @property
    def plane_center(self) -> np.ndarray:
        """World point where the mapping plane meets the axis."""
        lift = self.fit.height + self.config.plane_offset
        return self.fit.base + lift * self.fit.axis

    @property
    def ray_origin(self) -> np.ndarray:
        """Shared origin of all projection rays (below the bottom cap)."""
        return self.fit.base - self.config.origin_offset * self.fit.axis

    def lift(self, uv: np.ndarray) -> np.ndarray:
        """3D position of a 2D plane point."""
        e1, e2 = self.plane_basis
        uv = np.asarray(uv, dtype=np.float64)
        return self.plane_center + uv[0] * e1 + uv[1] * e2


def plane_basis(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal basis (e1, e2) of the plane normal to ``axis``.

    e1 derives from the world axis least aligned with ``axis`` (lowest index
    on ties), e2 = axis x e1.
    """
    a = np.asarray(axis, dtype=np.float64)
    pick = int(np.argmin(np.abs(a)))
    seed = np.zeros(3)
    seed[pick] = 1.0
    e1 = seed - np.dot(seed, a) * a
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    return e1, e2


def fit_cylinder(centers: Sequence[np.ndarray], up_hint: np.ndarray = (0.0, 0.0, 1.0)) -> CylinderFit:
    """Fit a gravity-aligned cylinder to camera centers.

    The axis is the (normalized) caller-provided up hint; base combines the
    mean in-plane position with the lowest axial component; radius is the mean
    radial distance. PCA is deliberately not used: it is unstable for
    single-ring rigs with no axial variance.

    Raises:
        DegenerateRig: If all centers lie on the axis.
    """
    pts = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] < 3:
        raise ValueError(f"need at least 3 centers, got {pts.shape[0]}")
    a = np.asarray(up_hint, dtype=np.float64).reshape(3)
    a = a / np.linalg.norm(a)

    axial = pts @ a
    perp = pts - np.outer(axial, a)
    mean_perp = perp.mean(axis=0)
    base = mean_perp + axial.min() * a
    radii = np.linalg.norm(perp - mean_perp, axis=1)
    radius = float(radii.mean())
    if radius < 1e-12:
        raise DegenerateRig("all camera centers lie on the cylinder axis")
    return CylinderFit(axis=a, base=base, radius=radius, height=float(axial.max() - axial.min()))


def project_radial(fit: CylinderFit, p: np.ndarray) -> np.ndarray:
    """Radially normalize ``p`` onto the cylinder surface.

    Raises:
        OnAxis: If ``p`` lies on the axis line.
    """
    p = np.asarray(p, dtype=np.float64).reshape(3)
    rel = p - fit.base
    axial = np.dot(rel, fit.axis)
    v_perp = rel - axial * fit.axis
    norm = np.linalg.norm(v_perp)
    if norm <= 1e-9:
        raise OnAxis("point lies on the cylinder axis")
    return fit.base + axial * fit.axis + fit.radius * (v_perp / norm)


def map_to_plane(fit: CylinderFit, config: ProjectionConfig, p_cyl: np.ndarray) -> np.ndarray:
    """Perspectively map a cylinder-surface point onto the 2D plane.

    A ray from the shifted origin through ``p_cyl`` is intersected with the
    plane ``plane_offset`` above the top cap; the hit is returned in (e1, e2)
    coordinates centered on the axis.

    Raises:
        RayParallelOrDescending: If the ray does not ascend toward the plane.
    """
    p_cyl = np.asarray(p_cyl, dtype=np.float64).reshape(3)
    origin = fit.base - config.origin_offset * fit.axis
    direction = p_cyl - origin
    ascent = np.dot(direction, fit.axis)
    if ascent <= 1e-9:
        raise RayParallelOrDescending("ray toward the plane is parallel or descending")
    total_lift = fit.height + config.origin_offset + config.plane_offset
    hit = origin + (total_lift / ascent) * direction
    e1, e2 = plane_basis(fit.axis)
    rel = hit - (fit.base + (fit.height + config.plane_offset) * fit.axis)
    return np.array([np.dot(rel, e1), np.dot(rel, e2)])


def _circumcircle(pts: np.ndarray, tri: tuple[int, int, int]) -> tuple[float, float, float]:
    """Circumcenter (cx, cy) and squared radius; infinite for degenerate faces."""
    ax, ay = pts[tri[0]]
    bx, by = pts[tri[1]]
    cx, cy = pts[tri[2]]
    d = 2.0 * ((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))
    if abs(d) < 1e-300:
        return 0.0, 0.0, math.inf
    b2 = (bx - ax) ** 2 + (by - ay) ** 2
    c2 = (cx - ax) ** 2 + (cy - ay) ** 2
    ux = ax + ((cy - ay) * b2 - (by - ay) * c2) / d
    uy = ay + ((bx - ax) * c2 - (cx - ax) * b2) / d
    r2 = (ux - ax) ** 2 + (uy - ay) ** 2
    return ux, uy, r2


def _orient(pts: np.ndarray, i: int, j: int, k: int) -> float:
    return (pts[j, 0] - pts[i, 0]) * (pts[k, 1] - pts[i, 1]) - (
        pts[j, 1] - pts[i, 1]
    ) * (pts[k, 0] - pts[i, 0])


def delaunay_2d(points: np.ndarray) -> list[tuple[int, int, int]]:
    """Delaunay triangulation of 2D points (incremental Bowyer-Watson).

    Points are inserted in input order inside a super-triangle 100x the
    bounding box. The in-circle test is strict with a relative tolerance, so
    cocircular configurations keep the faces built first; with in-order
    insertion that resolves ties toward diagonals incident to the lowest
    index. Output faces are counter-clockwise, canonically rotated, and
    sorted, so identical input yields identical output.

    Raises:
        Collinear: If all points are collinear.
        DuplicatePoints: If two points are closer than 1e-9.
    """
    pts_in = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = pts_in.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")

    for i in range(n):
        d2 = np.sum((pts_in[i + 1 :] - pts_in[i]) ** 2, axis=1)
        if d2.size and d2.min() < 1e-18:
            j = i + 1 + int(np.argmin(d2))
            raise DuplicatePoints(f"points {i} and {j} coincide")

    span = pts_in.max(axis=0) - pts_in.min(axis=0)
    scale = float(max(span.max(), 1e-9))
    if np.all(np.abs([_orient(pts_in, 0, 1, k) for k in range(2, n)]) <= 1e-12 * scale**2):
        raise Collinear("all points are collinear")

    mid = (pts_in.max(axis=0) + pts_in.min(axis=0)) / 2.0
    m = 100.0 * scale
    super_pts = np.array(
        [[mid[0] - 2 * m, mid[1] - m], [mid[0] + 2 * m, mid[1] - m], [mid[0], mid[1] + 2 * m]]
    )
    pts = np.vstack([pts_in, super_pts])
    scale2 = scale * scale

    triangles: list[tuple[int, int, int]] = [(n, n + 1, n + 2)]
    circles = [_circumcircle(pts, triangles[0])]

    for p in range(n):
        px, py = pts[p]
        bad = [
            t
            for t, (ux, uy, r2) in enumerate(circles)
            if (px - ux) ** 2 + (py - uy) ** 2 < r2 - 1e-9 * max(r2, scale2)
            or math.isinf(r2)
        ]
        # Boundary = directed edges of the bad region that appear exactly once.
        edge_count: dict[tuple[int, int], int] = {}
        for t in bad:
            a, b, c = triangles[t]
            for e in ((a, b), (b, c), (c, a)):
                key = (min(e), max(e))
                edge_count[key] = edge_count.get(key, 0) + 1
        boundary = []
        for t in bad:
            a, b, c = triangles[t]
            for e in ((a, b), (b, c), (c, a)):
                if edge_count[(min(e), max(e))] == 1:
                    boundary.append(e)
        for t in sorted(bad, reverse=True):
            del triangles[t]
            del circles[t]
        for a, b in boundary:
            tri = (p, a, b) if _orient(pts, p, a, b) > 0 else (p, b, a)
            triangles.append(tri)
            circles.append(_circumcircle(pts, tri))

    faces = []
    for tri in triangles:
        if any(v >= n for v in tri):
            continue
        if abs(_orient(pts, *tri)) <= 1e-12 * scale2:
            continue
        rot = int(np.argmin(tri))
        faces.append((tri[rot], tri[(rot + 1) % 3], tri[(rot + 2) % 3]))
    faces.sort()
    return faces


def ray_triangle_intersect(
    ray: Ray, v0: np.ndarray, v1: np.ndarray, v2: np.ndarray
) -> Optional[tuple[float, np.ndarray]]:
    """Moeller-Trumbore ray/triangle intersection.

    Returns:
        ``(t, bary)`` with hit = origin + t*direction = sum(bary_i * v_i),
        or None when the ray misses or is parallel to the triangle plane.
        Barycentric components down to -1e-9 count as hits (edge grazing).

    Raises:
        DegenerateTriangle: If the triangle area is <= 1e-12.
    """
    v0 = np.asarray(v0, dtype=np.float64).reshape(3)
    v1 = np.asarray(v1, dtype=np.float64).reshape(3)
    v2 = np.asarray(v2, dtype=np.float64).reshape(3)
    edge1 = v1 - v0
    edge2 = v2 - v0
    normal = np.cross(edge1, edge2)
    if 0.5 * np.linalg.norm(normal) <= 1e-12:
        raise DegenerateTriangle("triangle area is below 1e-12")

    pvec = np.cross(ray.direction, edge2)
    det = np.dot(edge1, pvec)
    if abs(det) < 1e-12:
        return None
    inv_det = 1.0 / det
    tvec = ray.origin - v0
    u = np.dot(tvec, pvec) * inv_det
    if u < -1e-9 or u > 1 + 1e-9:
        return None
    qvec = np.cross(tvec, edge1)
    v = np.dot(ray.direction, qvec) * inv_det
    if v < -1e-9 or u + v > 1 + 1e-9:
        return None
    t = np.dot(edge2, qvec) * inv_det
    if t <= 0:
        return None
    return float(t), np.array([1.0 - u - v, u, v])


def build_triangulation(
    poses: Sequence[CameraPose],
    up_hint: np.ndarray = (0.0, 0.0, 1.0),
    config: ProjectionConfig = ProjectionConfig(),
) -> RigTriangulation:
    """Fit, project, and triangulate a rig's camera centers."""
    centers = [camera_center(p) for p in poses]
    fit = fit_cylinder(centers, up_hint)
    uv = np.array([map_to_plane(fit, config, project_radial(fit, c)) for c in centers])
    faces = delaunay_2d(uv)
    return RigTriangulation(
        fit=fit,
        config=config,
        points2d=uv,
        faces=tuple(faces),
        plane_basis=plane_basis(fit.axis),
    )


def select_triplet(
    tri: RigTriangulation, query: CameraPose
) -> tuple[tuple[int, int, int], np.ndarray]:
    """Find the camera triplet whose projected triangle encloses ``query``.

    The query center is projected like the rig cameras and a ray from the
    shared origin is cast against the faces lifted back onto the mapping
    plane; the first face hit (in the deterministic face order) is returned
    with the barycentric coordinates of the hit.

    Raises:
        OutsideCoverage: If no face is hit.
    """
    if not tri.faces:
        raise ValueError("triangulation has no faces")
    center = camera_center(query)
    p_cyl = project_radial(tri.fit, center)
    direction = p_cyl - tri.ray_origin
    ray = Ray(origin=tri.ray_origin, direction=direction / np.linalg.norm(direction))
    for face in tri.faces:
        verts = [tri.lift(tri.points2d[i]) for i in face]
        hit = ray_triangle_intersect(ray, *verts)
        if hit is not None:
            return face, hit[1]
    raise OutsideCoverage("query projects outside the camera hull")


def triangulation_quality(tri: RigTriangulation) -> list[TriangleQuality]:
    """Per-face minimum angle (degrees), aspect ratio, and area."""
    out = []
    for face in tri.faces:
        a, b, c = (tri.points2d[i] for i in face)
        sides = np.array(
            [np.linalg.norm(b - c), np.linalg.norm(c - a), np.linalg.norm(a - b)]
        )
        area = 0.5 * abs(
            (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        )
        angles = []
        for i in range(3):
            opp, s1, s2 = sides[i], sides[(i + 1) % 3], sides[(i + 2) % 3]
            cos = np.clip((s1**2 + s2**2 - opp**2) / (2 * s1 * s2), -1.0, 1.0)
            angles.append(math.degrees(math.acos(cos)))
        longest = float(sides.max())
        # Shortest altitude is 2*area / longest edge.
        aspect = math.inf if area == 0 else longest**2 / (2.0 * area)
        out.append(
            TriangleQuality(min_angle=min(angles), aspect_ratio=aspect, area=float(area))
        )
    return out
