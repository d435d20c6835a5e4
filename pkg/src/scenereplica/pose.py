"""Pose alignment of a candidate asset cloud onto a scanned object cloud.

The fit is deliberately coarse: uniform scale from bounding-box extents,
yaw-only rotation picked from a fixed 30-degree grid, translation from
centroids. A dense optimizer would not survive the partial, noisy scans
this runs on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .errors import EmptyCloudError, PreconditionError
from .geometry import PointCloud, PoseTransform, farthest_point_sample
from .metrics import chamfer_distance, normalize_pair

YAW_STEP_DEGREES = 30.0
YAW_GRID = [np.deg2rad(YAW_STEP_DEGREES * k) for k in range(12)]
ALIGN_POINT_BUDGET = 2048
# Costs this close count as tied; a symmetric object then lands on the
# smallest angle instead of whichever bucket float noise favours.
YAW_TIE_TOLERANCE = 1e-6


@dataclass
class AlignmentResult:
    transform: PoseTransform
    cost: float
    cost_by_yaw: Dict[float, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "transform": self.transform.to_dict(),
            "cost": float(self.cost),
            "cost_by_yaw": {f"{np.rad2deg(k):.0f}": float(v) for k, v in self.cost_by_yaw.items()},
        }


def _scale_from_boxes(scan: PointCloud, asset: PointCloud) -> float:
    scan_side = scan.aabb().longest_side()
    asset_side = asset.aabb().longest_side()
    if asset_side <= 0:
        raise PreconditionError("asset cloud has zero extent along every axis")
    if scan_side <= 0:
        raise PreconditionError("scan cloud has zero extent along every axis")
    return scan_side / asset_side


def yaw_cost(scan: PointCloud, asset: PointCloud, transform: PoseTransform) -> float:
    """Normalized chamfer distance between the scan and the transformed
    asset cloud; the normalization frame is anchored to the scan."""
    placed = PointCloud(points=transform.apply(asset.points))
    return chamfer_distance(*normalize_pair(scan, placed))


def align_pose(scan: PointCloud, asset: PointCloud) -> AlignmentResult:
    """Fit scale, yaw, and translation of the asset cloud onto the scan.

    Scale is the ratio of the longest bounding-box sides. Each of the 12
    yaw angles gets a translation that matches the rotated, scaled asset
    centroid to the scan centroid; the yaw minimizing normalized chamfer
    distance wins, and any yaw within YAW_TIE_TOLERANCE of the minimum
    counts as tied so the smallest such angle is kept. Both clouds are
    farthest-point downsampled to at most 2048 points for the search, so
    cost is deterministic and bounded in time.
    """
    if len(scan) == 0 or len(asset) == 0:
        raise EmptyCloudError("pose alignment needs non-empty clouds")
    scale = _scale_from_boxes(scan, asset)

    scan_small = farthest_point_sample(scan, ALIGN_POINT_BUDGET)
    asset_small = farthest_point_sample(asset, ALIGN_POINT_BUDGET)

    # Centroids of the full clouds, not the downsamples: the downsample only
    # approximates the cost surface, never the returned transform.
    c_scan = scan.centroid()
    c_asset = asset.centroid()

    cost_by_yaw: Dict[float, float] = {}
    for yaw in YAW_GRID:
        probe = PoseTransform(yaw=yaw, scale=scale)
        rotated_centroid = probe.apply(c_asset.reshape(1, 3))[0]
        translation = c_scan - rotated_centroid
        candidate = PoseTransform(yaw=yaw, scale=scale, translation=translation)
        cost_by_yaw[yaw] = yaw_cost(scan_small, asset_small, candidate)

    best_cost = min(cost_by_yaw.values())
    # The grid is ascending, so the first yaw inside the tie band is the
    # smallest angle that (effectively) attains the minimum.
    best_yaw = next(y for y in YAW_GRID if cost_by_yaw[y] <= best_cost + YAW_TIE_TOLERANCE)

    probe = PoseTransform(yaw=best_yaw, scale=scale)
    translation = c_scan - probe.apply(c_asset.reshape(1, 3))[0]
    final = PoseTransform(yaw=best_yaw, scale=scale, translation=translation)
    return AlignmentResult(transform=final, cost=float(best_cost), cost_by_yaw=cost_by_yaw)
