"""Placed objects and scene layouts, the shared state of graph building,
layout optimization, and the physics metrics."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import PreconditionError
from .geometry import Aabb, FloorPolygon, PoseTransform


@dataclass
class PlacedObject:
    """One object placed in a scene: its box, category, and provenance."""

    object_id: str
    box: Aabb
    category: str = "object"
    asset_id: Optional[str] = None
    transform: Optional[PoseTransform] = None

    def to_dict(self) -> dict:
        out = {
            "id": self.object_id,
            "category": self.category,
            "box": self.box.to_list(),
        }
        if self.asset_id is not None:
            out["asset_id"] = self.asset_id
        if self.transform is not None:
            out["transform"] = self.transform.to_dict()
        return out

    @staticmethod
    def from_dict(data: dict) -> "PlacedObject":
        return PlacedObject(
            object_id=data["id"],
            box=Aabb.from_list(data["box"]),
            category=data.get("category", "object"),
            asset_id=data.get("asset_id"),
            transform=PoseTransform.from_dict(data["transform"]) if "transform" in data else None,
        )


@dataclass
class SceneLayout:
    """Placed objects plus the floor polygon they live on."""

    scene_id: str
    objects: List[PlacedObject] = field(default_factory=list)
    floor: Optional[FloorPolygon] = None

    def __post_init__(self):
        ids = [o.object_id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise PreconditionError(f"duplicate object ids in scene {self.scene_id}")

    def by_id(self) -> Dict[str, PlacedObject]:
        return {o.object_id: o for o in self.objects}

    def boxes(self) -> List[Aabb]:
        return [o.box for o in self.objects]

    def clone(self) -> "SceneLayout":
        return copy.deepcopy(self)

    def move_object(self, object_id: str, offset: np.ndarray) -> None:
        """Translate one object's box in place."""
        lookup = self.by_id()
        if object_id not in lookup:
            raise PreconditionError(f"unknown object id {object_id!r}")
        obj = lookup[object_id]
        obj.box = obj.box.translated(offset)
        if obj.transform is not None:
            obj.transform = PoseTransform(
                translation=obj.transform.translation + np.asarray(offset, dtype=np.float64),
                scale=obj.transform.scale,
                yaw=obj.transform.yaw,
            )

    def to_dict(self) -> dict:
        out = {"scene_id": self.scene_id, "objects": [o.to_dict() for o in self.objects]}
        if self.floor is not None:
            out["floor_polygon"] = self.floor.to_list()
        return out

    @staticmethod
    def from_dict(data: dict) -> "SceneLayout":
        floor = None
        if data.get("floor_polygon"):
            floor = FloorPolygon.from_list(data["floor_polygon"])
        return SceneLayout(
            scene_id=data["scene_id"],
            objects=[PlacedObject.from_dict(o) for o in data.get("objects", [])],
            floor=floor,
        )


@dataclass
class MicroScene:
    """One large furniture piece plus the small objects it supports."""

    large_id: str
    large_category: str
    top_surface: FloorPolygon
    small_objects: List[PlacedObject] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "large_id": self.large_id,
            "large_category": self.large_category,
            "top_surface": self.top_surface.to_list(),
            "small_objects": [o.to_dict() for o in self.small_objects],
        }

    @staticmethod
    def from_dict(data: dict) -> "MicroScene":
        return MicroScene(
            large_id=data["large_id"],
            large_category=data["large_category"],
            top_surface=FloorPolygon.from_list(data["top_surface"]),
            small_objects=[PlacedObject.from_dict(o) for o in data.get("small_objects", [])],
        )
