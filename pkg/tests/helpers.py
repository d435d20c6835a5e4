"""Shared builders for the test suite.

The bundle builder constructs scenes where the truth candidate IS the scan
cloud and the query embeddings equal the truth embedding, so retrieval and
alignment have a known exact answer.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from scenereplica.bundle import BundleCandidate, BundleObject, SceneBundle, write_bundle
from scenereplica.geometry import Aabb, FloorPolygon, PointCloud
from scenereplica.scene import PlacedObject, SceneLayout

EMBED_DIM = 8


def make_cloud(
    rng: np.random.Generator,
    n: int = 64,
    lo: Sequence[float] = (0.0, 0.0, 0.0),
    hi: Sequence[float] = (1.0, 1.0, 1.0),
    colors: bool = False,
) -> PointCloud:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    pts = lo + rng.random((n, 3)) * (hi - lo)
    col = rng.random((n, 3)) if colors else None
    return PointCloud(points=pts, colors=col)


def make_box(x0: float, y0: float, z0: float, x1: float, y1: float, z1: float) -> Aabb:
    return Aabb(np.array([x0, y0, z0], dtype=np.float64), np.array([x1, y1, z1], dtype=np.float64))


def square_floor(half: float, cx: float = 0.0, cy: float = 0.0) -> FloorPolygon:
    return FloorPolygon(
        np.array(
            [
                [cx - half, cy - half],
                [cx + half, cy - half],
                [cx + half, cy + half],
                [cx - half, cy + half],
            ],
            dtype=np.float64,
        )
    )


def grounded_object(
    object_id: str,
    x: float,
    y: float,
    w: float,
    d: float,
    h: float,
    category: str = "object",
) -> PlacedObject:
    return PlacedObject(
        object_id=object_id,
        box=make_box(x, y, 0.0, x + w, y + d, h),
        category=category,
    )


def layout_of(objects: List[PlacedObject], half: float = 10.0, scene_id: str = "s") -> SceneLayout:
    return SceneLayout(scene_id=scene_id, objects=objects, floor=square_floor(half))


def _truth_embedding() -> np.ndarray:
    v = np.zeros(EMBED_DIM)
    v[0] = 1.0
    return v


def _decoy_embedding(rng: np.random.Generator) -> np.ndarray:
    # First coordinate zero: dot product with the truth embedding is exactly 0.
    v = np.zeros(EMBED_DIM)
    v[1:] = rng.random(EMBED_DIM - 1) + 0.1
    return v / np.linalg.norm(v)


def oracle_bundle(
    scene_id: str = "demo",
    n_objects: int = 2,
    n_points: int = 200,
    n_decoys: int = 2,
    seed: int = 0,
    colors: bool = True,
    spacing: float = 3.0,
    categories: Optional[Sequence[str]] = None,
) -> SceneBundle:
    """In-memory bundle whose truth candidate equals the scan cloud."""
    rng = np.random.default_rng(seed)
    objects = []
    for i in range(n_objects):
        object_id = f"{scene_id}_o{i}"
        lo = (spacing * i, 0.0, 0.0)
        hi = (spacing * i + 0.6, 0.5, 0.8)
        scan = make_cloud(rng, n=n_points, lo=lo, hi=hi, colors=colors)
        truth_id = f"{object_id}_asset"
        candidates = [
            BundleCandidate(
                asset_id=truth_id,
                cloud=scan,
                embedding=_truth_embedding(),
                provenance="scan",
            )
        ]
        for d in range(n_decoys):
            candidates.append(
                BundleCandidate(
                    asset_id=f"{object_id}_decoy{d}",
                    cloud=make_cloud(rng, n=n_points // 2, lo=(0, 0, 0), hi=(0.5, 0.5, 0.5), colors=colors),
                    embedding=_decoy_embedding(rng),
                    provenance="library",
                )
            )
        category = categories[i] if categories else "chair"
        objects.append(
            BundleObject(
                object_id=object_id,
                category=category,
                scan_cloud=scan,
                candidates=candidates,
                caption=f"a {category}",
                image_embedding=_truth_embedding(),
                text_embedding=_truth_embedding(),
                truth_asset_id=truth_id,
            )
        )
    floor = square_floor(spacing * n_objects + 2.0, cx=spacing * n_objects / 2.0)
    return SceneBundle(root=Path("."), scene_id=scene_id, floor=floor, objects=objects)


def write_oracle_bundle(root: Path, **kwargs) -> Path:
    bundle = oracle_bundle(**kwargs)
    return write_bundle(bundle, root)
