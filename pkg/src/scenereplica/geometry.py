"""Point clouds, boxes, rigid-ish transforms, and floor-plan estimation.

The up axis is +z everywhere; ingestion is expected to rotate data into
this convention. All operations are pure functions over immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from shapely.geometry import MultiPoint, Point as ShapelyPoint, Polygon as ShapelyPolygon

from .errors import DegenerateHullError, EmptyCloudError, PreconditionError

TAU = 2.0 * np.pi

# Curvature below this is indistinguishable from flat at float64 precision.
PLANAR_EPS = 1e-9


@dataclass(frozen=True)
class PointCloud:
    """A cloud of 3D points in meters, with optional per-point RGB in [0, 1]."""

    points: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise PreconditionError(f"points must be (N, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise PreconditionError("points contain non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.colors is not None:
            cols = np.asarray(self.colors, dtype=np.float64)
            if cols.shape != pts.shape:
                raise PreconditionError(
                    f"colors shape {cols.shape} does not match points shape {pts.shape}"
                )
            if not np.isfinite(cols).all() or cols.min(initial=0.0) < 0.0 or cols.max(initial=0.0) > 1.0:
                raise PreconditionError("colors must be finite and within [0, 1]")
            object.__setattr__(self, "colors", cols)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def has_colors(self) -> bool:
        return self.colors is not None

    def centroid(self) -> np.ndarray:
        _require_nonempty(self)
        return self.points.mean(axis=0)

    def aabb(self) -> "Aabb":
        _require_nonempty(self)
        return Aabb(self.points.min(axis=0), self.points.max(axis=0))


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box, min <= max componentwise."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64).reshape(3)
        hi = np.asarray(self.max, dtype=np.float64).reshape(3)
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise PreconditionError("box bounds must be finite")
        if (lo > hi).any():
            raise PreconditionError(f"box min {lo} exceeds max {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def extents(self) -> np.ndarray:
        return self.max - self.min

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)

    def volume(self) -> float:
        return float(np.prod(self.extents))

    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extents))

    def longest_side(self) -> float:
        return float(self.extents.max())

    def translated(self, offset: Sequence[float]) -> "Aabb":
        off = np.asarray(offset, dtype=np.float64)
        return Aabb(self.min + off, self.max + off)

    def inflated(self, margin: float) -> "Aabb":
        return Aabb(self.min - margin, self.max + margin)

    def footprint_corners(self) -> np.ndarray:
        """The four (x, y) corners of the box projected onto the ground plane."""
        (x0, y0, _), (x1, y1, _) = self.min, self.max
        return np.array([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    def footprint_polygon(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.footprint_corners())

    def intersection_volume(self, other: "Aabb") -> float:
        overlap = np.minimum(self.max, other.max) - np.maximum(self.min, other.min)
        if (overlap <= 0).any():
            return 0.0
        return float(np.prod(overlap))

    @staticmethod
    def union_bounds(boxes: Sequence["Aabb"]) -> "Aabb":
        if not boxes:
            raise PreconditionError("union of zero boxes")
        mins = np.min([b.min for b in boxes], axis=0)
        maxs = np.max([b.max for b in boxes], axis=0)
        return Aabb(mins, maxs)

    @staticmethod
    def from_points(points: np.ndarray) -> "Aabb":
        pts = np.asarray(points, dtype=np.float64)
        if pts.size == 0:
            raise EmptyCloudError("cannot compute box of zero points")
        return Aabb(pts.min(axis=0), pts.max(axis=0))

    def to_list(self) -> list:
        return [self.min.tolist(), self.max.tolist()]

    @staticmethod
    def from_list(data: Sequence) -> "Aabb":
        return Aabb(np.asarray(data[0]), np.asarray(data[1]))


@dataclass(frozen=True)
class PoseTransform:
    """Translation + uniform scale + yaw about +z, applied as scale, then
    rotate, then translate: p -> R_yaw(scale * p) + translation."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0
    yaw: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.isfinite(t).all():
            raise PreconditionError("translation must be finite")
        s = float(self.scale)
        if not np.isfinite(s) or s <= 0.0:
            raise PreconditionError(f"scale must be positive, got {s}")
        y = float(self.yaw) % TAU
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "scale", s)
        object.__setattr__(self, "yaw", y)

    def rotation_matrix(self) -> np.ndarray:
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return (self.scale * pts) @ self.rotation_matrix().T + self.translation

    def inverse(self) -> "PoseTransform":
        inv_rot = self.rotation_matrix().T
        return PoseTransform(
            translation=-(inv_rot @ self.translation) / self.scale,
            scale=1.0 / self.scale,
            yaw=-self.yaw,
        )

    def to_dict(self) -> dict:
        return {
            "translation": [float(v) for v in self.translation],
            "scale": float(self.scale),
            "yaw_degrees": float(np.degrees(self.yaw)),
        }

    @staticmethod
    def from_dict(data: dict) -> "PoseTransform":
        return PoseTransform(
            translation=np.asarray(data["translation"], dtype=np.float64),
            scale=float(data["scale"]),
            yaw=float(np.radians(data["yaw_degrees"])),
        )


@dataclass(frozen=True)
class FloorPolygon:
    """Simple counterclockwise 2D polygon with positive area."""

    vertices: np.ndarray

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
            raise PreconditionError(f"polygon needs >= 3 (x, y) vertices, got {verts.shape}")
        poly = ShapelyPolygon(verts)
        if not poly.is_valid or poly.area <= 0.0:
            raise DegenerateHullError("polygon is self-intersecting or has zero area")
        # Normalize winding to counterclockwise.
        if _signed_area(verts) < 0:
            verts = verts[::-1].copy()
        object.__setattr__(self, "vertices", verts)

    def area(self) -> float:
        return abs(_signed_area(self.vertices))

    def shapely(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.vertices)

    def contains_point(self, x: float, y: float) -> bool:
        """Inclusive containment: boundary points count as inside."""
        return self.shapely().covers(ShapelyPoint(x, y))

    def contains_corners(self, corners: np.ndarray) -> bool:
        poly = self.shapely()
        return all(poly.covers(ShapelyPoint(x, y)) for x, y in np.asarray(corners))

    def to_list(self) -> list:
        return self.vertices.tolist()

    @staticmethod
    def from_list(data: Sequence) -> "FloorPolygon":
        return FloorPolygon(np.asarray(data, dtype=np.float64))


def _signed_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _require_nonempty(cloud: PointCloud):
    if len(cloud) == 0:
        raise EmptyCloudError("operation requires a non-empty point cloud")


def nearest_distance(query: PointCloud, target: PointCloud) -> np.ndarray:
    """Euclidean distance from each query point to its nearest target point.

    Exact (KD-tree backed), deterministic, one value per query point.
    """
    _require_nonempty(query)
    _require_nonempty(target)
    tree = cKDTree(target.points)
    dists, _ = tree.query(query.points, k=1)
    return np.asarray(dists, dtype=np.float64)


def estimate_curvature(cloud: PointCloud, k: int = 16) -> np.ndarray:
    """Per-point surface variation: lambda_min / (l1 + l2 + l3) of the
    covariance over the point plus its k nearest neighbors.

    Values lie in [0, 1/3]; exactly coplanar neighborhoods give 0 (up to
    float noise). Degenerate neighborhoods (all points coincident) give 0.
    """
    if k < 3:
        raise PreconditionError(f"k must be >= 3, got {k}")
    n = len(cloud)
    if n < k + 1:
        raise PreconditionError(f"cloud has {n} points, need at least k+1 = {k + 1}")
    tree = cKDTree(cloud.points)
    # k+1 because the query point is its own nearest neighbor.
    _, idx = tree.query(cloud.points, k=k + 1)
    neighborhoods = cloud.points[idx]  # (n, k+1, 3)
    centered = neighborhoods - neighborhoods.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / (k + 1)
    eigvals = np.linalg.eigvalsh(cov)  # ascending per row
    totals = eigvals.sum(axis=1)
    curv = np.zeros(n)
    nonzero = totals > 0
    curv[nonzero] = eigvals[nonzero, 0] / totals[nonzero]
    return np.clip(curv, 0.0, 1.0 / 3.0)


def estimate_floor_plan(boxes: Sequence[Aabb], mode: str = "hull") -> FloorPolygon:
    """Floor polygon covering every object footprint.

    Default mode "hull" is the 2D convex hull of all footprint corners.
    Mode "union" uses the union of footprint rectangles instead, for
    concave rooms; the result is the union's exterior ring.
    """
    if not boxes:
        raise PreconditionError("at least one box is required")
    if mode == "hull":
        corners = np.vstack([b.footprint_corners() for b in boxes])
        hull = MultiPoint([tuple(c) for c in corners]).convex_hull
        if hull.geom_type != "Polygon" or hull.area <= 0.0:
            raise DegenerateHullError("footprint corners are collinear; hull is degenerate")
        verts = np.asarray(hull.exterior.coords[:-1])
        return FloorPolygon(verts)
    if mode == "union":
        from shapely.ops import unary_union

        union = unary_union([b.footprint_polygon() for b in boxes])
        if union.geom_type == "MultiPolygon":
            # Disconnected footprints: fall back to the hull so one polygon
            # still covers everything.
            union = union.convex_hull
        if union.geom_type != "Polygon" or union.area <= 0.0:
            raise DegenerateHullError("footprint union is degenerate")
        return FloorPolygon(np.asarray(union.exterior.coords[:-1]))
    raise PreconditionError(f"unknown floor-plan mode {mode!r}")


def apply_transform(cloud: PointCloud, transform: PoseTransform) -> PointCloud:
    """Apply scale, then yaw, then translation to every point; colors pass through."""
    return PointCloud(points=transform.apply(cloud.points), colors=cloud.colors)


def farthest_point_sample(cloud: PointCloud, count: int) -> PointCloud:
    """Deterministic farthest-point downsample, seeded at point index 0.

    Returns the cloud unchanged when it already fits the budget.
    """
    _require_nonempty(cloud)
    if count <= 0:
        raise PreconditionError(f"sample count must be positive, got {count}")
    n = len(cloud)
    if n <= count:
        return cloud
    pts = cloud.points
    chosen = np.empty(count, dtype=np.intp)
    chosen[0] = 0
    min_d2 = np.sum((pts - pts[0]) ** 2, axis=1)
    for i in range(1, count):
        nxt = int(np.argmax(min_d2))
        chosen[i] = nxt
        d2 = np.sum((pts - pts[nxt]) ** 2, axis=1)
        np.minimum(min_d2, d2, out=min_d2)
    colors = cloud.colors[chosen] if cloud.colors is not None else None
    return PointCloud(points=pts[chosen], colors=colors)
