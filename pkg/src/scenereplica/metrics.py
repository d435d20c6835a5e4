"""Similarity and physics metrics.

Chamfer-style distances are computed on pre-normalized clouds: callers
translate both clouds to the scan's centroid and scale so the scan's
bounding-box diagonal is 1 (see ``normalize_pair``), making values
dimensionless and comparable across object sizes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import Point as ShapelyPoint

from .errors import EmptyCloudError, PreconditionError
from .geometry import (
    PLANAR_EPS,
    Aabb,
    PointCloud,
    estimate_curvature,
    nearest_distance,
)
from .scene import MicroScene, SceneLayout

# Downsampling budget applied by the pipeline before metric calls.
METRIC_POINT_BUDGET = 4096

# A pair of boxes counts as colliding only above this IoU, so that exact
# face contact (zero intersection volume) is not a collision.
COLLISION_IOU_EPS = 1e-6

COLOR_BINS = 8


def normalize_pair(reference: PointCloud, other: PointCloud) -> Tuple[PointCloud, PointCloud]:
    """Translate both clouds to the reference centroid and scale both so the
    reference bounding-box diagonal equals 1."""
    if len(reference) == 0 or len(other) == 0:
        raise EmptyCloudError("normalization requires non-empty clouds")
    center = reference.centroid()
    diag = reference.aabb().diagonal()
    if diag <= 0.0:
        raise PreconditionError("reference cloud has zero bounding-box diagonal")
    scale = 1.0 / diag

    def _apply(cloud: PointCloud) -> PointCloud:
        return PointCloud(points=(cloud.points - center) * scale, colors=cloud.colors)

    return _apply(reference), _apply(other)


def chamfer_distance(a: PointCloud, b: PointCloud) -> float:
    """Symmetric mean nearest-neighbor distance: half the sum of the two
    directed means. Uses plain Euclidean distance, not squared."""
    d_ab = nearest_distance(a, b)
    d_ba = nearest_distance(b, a)
    return 0.5 * (float(d_ab.mean()) + float(d_ba.mean()))


def _curvature_weights(cloud: PointCloud, k: int) -> np.ndarray:
    n = len(cloud)
    if n < 4:
        return np.ones(n)
    k_eff = min(k, n - 1)
    if k_eff < 3:
        return np.ones(n)
    curv = estimate_curvature(cloud, k=k_eff)
    cmax = float(curv.max())
    if cmax < PLANAR_EPS:
        # Effectively flat everywhere; weighting would only amplify noise.
        return np.ones(n)
    return 1.0 + curv / cmax


def enhanced_chamfer_distance(a: PointCloud, b: PointCloud, k: int = 16) -> float:
    """Curvature-weighted chamfer distance.

    Each directed per-point distance is weighted by 1 + curvature/max
    curvature of its own cloud, so high-detail regions count more. Weights
    are >= 1, hence ECD >= CD; flat clouds reduce to plain CD.
    """
    w_a = _curvature_weights(a, k)
    w_b = _curvature_weights(b, k)
    d_ab = nearest_distance(a, b) * w_a
    d_ba = nearest_distance(b, a) * w_b
    return 0.5 * (float(d_ab.mean()) + float(d_ba.mean()))


def bbox_iou(a: Aabb, b: Aabb) -> float:
    inter = a.intersection_volume(b)
    union = a.volume() + b.volume() - inter
    if union <= 0.0:
        raise PreconditionError("boxes have zero union volume")
    return inter / union


def _color_histogram(cloud: PointCloud, bins: int) -> np.ndarray:
    if not cloud.has_colors:
        raise PreconditionError("cloud has no colors")
    idx = np.minimum((cloud.colors * bins).astype(np.intp), bins - 1)
    flat = (idx[:, 0] * bins + idx[:, 1]) * bins + idx[:, 2]
    return np.bincount(flat, minlength=bins ** 3).astype(np.float64)


def color_histogram_kl(a: PointCloud, b: PointCloud, smoothing: bool = True, bins: int = COLOR_BINS) -> float:
    """KL(P || Q) over joint RGB histograms, P from a, Q from b.

    Add-one (Laplace) smoothing on both histograms by default; disabling it
    is only safe when b covers every bin a occupies.
    """
    counts_a = _color_histogram(a, bins)
    counts_b = _color_histogram(b, bins)
    return _kl_from_counts(counts_a, counts_b, smoothing)


def _kl_from_counts(counts_p: np.ndarray, counts_q: np.ndarray, smoothing: bool) -> float:
    p = counts_p.astype(np.float64)
    q = counts_q.astype(np.float64)
    if smoothing:
        p = p + 1.0
        q = q + 1.0
    p = p / p.sum()
    q = q / q.sum()
    mask = p > 0
    if (q[mask] <= 0).any():
        raise PreconditionError("KL undefined: P has mass where Q has none (enable smoothing)")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def size_error(aligned: Aabb, real: Aabb) -> float:
    """Absolute volume discrepancy in cubic meters."""
    return abs(aligned.volume() - real.volume())


def scale_error(scene_a: Sequence[Aabb], scene_b: Sequence[Aabb]) -> float:
    """Scene-level size discrepancy: absolute difference of the union-box
    diagonals, in meters."""
    if not scene_a or not scene_b:
        raise PreconditionError("scale_error requires non-empty scenes")
    return abs(Aabb.union_bounds(scene_a).diagonal() - Aabb.union_bounds(scene_b).diagonal())


def topk_accuracy(rankings: Sequence[Sequence[str]], truths: Sequence[str], k: int) -> float:
    """Fraction of objects whose true candidate appears in the first k entries."""
    if len(rankings) != len(truths):
        raise PreconditionError("rankings and truths must align")
    if not rankings:
        raise PreconditionError("no rankings given")
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    hits = 0
    for ranking, truth in zip(rankings, truths):
        if truth not in ranking:
            raise PreconditionError(f"truth {truth!r} missing from its candidate ranking")
        if truth in ranking[:k]:
            hits += 1
    return hits / len(rankings)


def category_kl(
    generated: Mapping[str, float],
    reference: Mapping[str, float],
    smoothing: bool = True,
) -> float:
    """KL(generated || reference) over category histograms with add-one
    smoothing. Both inputs are counts over the same category universe."""
    if set(generated) != set(reference):
        raise PreconditionError("category universes differ")
    cats = sorted(generated)
    gen = np.array([float(generated[c]) for c in cats])
    ref = np.array([float(reference[c]) for c in cats])
    return _kl_from_counts(gen, ref, smoothing)


def collision_rates(scene: SceneLayout) -> Dict[str, float]:
    """col_obj: fraction of objects whose box overlaps any other box with
    IoU above the collision epsilon. col_scene: 1.0 if any such pair exists."""
    boxes = scene.boxes()
    m = len(boxes)
    colliding = [False] * m
    for i in range(m):
        for j in range(i + 1, m):
            try:
                iou = bbox_iou(boxes[i], boxes[j])
            except PreconditionError:
                continue
            if iou > COLLISION_IOU_EPS:
                colliding[i] = True
                colliding[j] = True
    if m == 0:
        return {"col_obj": 0.0, "col_scene": 0.0}
    any_pair = any(colliding)
    return {"col_obj": sum(colliding) / m, "col_scene": 1.0 if any_pair else 0.0}


def out_of_plane_rate(micro: MicroScene) -> float:
    """Fraction of small objects whose footprint centroid lies outside the
    large object's top surface. Centroids exactly on the boundary count as
    inside."""
    if micro.top_surface is None:
        raise PreconditionError("micro-scene has no top-surface polygon")
    if not micro.small_objects:
        raise PreconditionError("micro-scene has no small objects")
    surface = micro.top_surface.shapely()
    outside = 0
    for obj in micro.small_objects:
        cx, cy, _ = obj.box.center
        if not surface.covers(ShapelyPoint(cx, cy)):
            outside += 1
    return outside / len(micro.small_objects)


_PER_OBJECT_KEYS = ("cd", "ecd", "iou", "color_hist_kl", "size_err_m3")
_PER_SCENE_KEYS = ("scale_err_m", "top1", "top5", "col_obj", "col_scene", "r_out", "ckl")


@dataclass
class MetricsReport:
    """Per-object and per-scene metric values with fixed serialization order.

    Missing values (for example color KL without colors) serialize as null.
    """

    per_object: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)
    per_scene: Dict[str, Optional[float]] = field(default_factory=dict)

    def validate(self) -> None:
        for oid, row in self.per_object.items():
            for key in ("cd", "ecd"):
                val = row.get(key)
                if val is not None and val < 0:
                    raise PreconditionError(f"{oid}: {key} must be >= 0")
            iou = row.get("iou")
            if iou is not None and not (0.0 <= iou <= 1.0):
                raise PreconditionError(f"{oid}: iou out of [0, 1]")
        top1, top5 = self.per_scene.get("top1"), self.per_scene.get("top5")
        if top1 is not None and top5 is not None and top5 < top1:
            raise PreconditionError("top5 must be >= top1")
        for key in ("col_obj", "col_scene", "r_out"):
            val = self.per_scene.get(key)
            if val is not None and not (0.0 <= val <= 1.0):
                raise PreconditionError(f"{key} out of [0, 1]")
        ckl = self.per_scene.get("ckl")
        if ckl is not None and ckl < 0:
            raise PreconditionError("ckl must be >= 0")

    def to_json_dict(self) -> dict:
        per_object = {
            oid: {key: self.per_object[oid].get(key) for key in _PER_OBJECT_KEYS}
            for oid in sorted(self.per_object)
        }
        per_scene = {key: self.per_scene.get(key) for key in _PER_SCENE_KEYS}
        return {"v": 1, "per_object": per_object, "per_scene": per_scene}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        """Flat table: one row per object plus one scene row."""
        lines = ["object_id," + ",".join(_PER_OBJECT_KEYS)]
        for oid in sorted(self.per_object):
            row = self.per_object[oid]
            cells = [_csv_cell(row.get(k)) for k in _PER_OBJECT_KEYS]
            lines.append(",".join([oid] + cells))
        lines.append("scene," + ",".join(_PER_SCENE_KEYS))
        lines.append(",".join([""] + [_csv_cell(self.per_scene.get(k)) for k in _PER_SCENE_KEYS]))
        return "\n".join(lines) + "\n"

    @staticmethod
    def merge(reports: Sequence["MetricsReport"]) -> "MetricsReport":
        """Deterministic merge: per-object rows collected sorted by id,
        per-scene values averaged over reports that define them."""
        merged = MetricsReport()
        for rep in reports:
            merged.per_object.update(rep.per_object)
        for key in _PER_SCENE_KEYS:
            vals = [r.per_scene[key] for r in reports if r.per_scene.get(key) is not None]
            merged.per_scene[key] = float(np.mean(vals)) if vals else None
        return merged


def _csv_cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))
