"""Rule-based spatial scene graph: support, containment, embedding.

Relations are decided from axis-aligned boxes alone. Thresholds tolerate
scan noise: a supported object may penetrate its supporter by up to 1 cm
or float up to 2 cm above it, and containment inflates the parent box by
2 cm before measuring enclosure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .errors import PreconditionError
from .geometry import Aabb
from .scene import SceneLayout

FLOOR_ID = "floor"

SUPPORT_GAP_MIN = -0.01
SUPPORT_GAP_MAX = 0.02
SUPPORT_OVERLAP_MIN = 0.3
CONTAINMENT_RATIO_MIN = 0.9
CONTAINMENT_INFLATE = 0.02
EMBED_RATIO_LOW = 0.1
EMBED_RATIO_HIGH = 0.9

KIND_SUPPORT = "support"
KIND_CONTAINMENT = "containment"
KIND_EMBEDDING = "embedding"
_KIND_ORDER = {KIND_SUPPORT: 0, KIND_CONTAINMENT: 1, KIND_EMBEDDING: 2}


@dataclass
class Relation:
    kind: str
    parent_id: str
    child_id: str
    evidence: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "parent_id": self.parent_id,
            "child_id": self.child_id,
            "evidence": {k: float(v) for k, v in sorted(self.evidence.items())},
        }

    @staticmethod
    def from_dict(data: dict) -> "Relation":
        return Relation(
            kind=data["kind"],
            parent_id=data["parent_id"],
            child_id=data["child_id"],
            evidence={k: float(v) for k, v in data.get("evidence", {}).items()},
        )


@dataclass
class SceneGraph:
    nodes: List[str]
    relations: List[Relation]

    def children_of(self, parent_id: str, kind: Optional[str] = None) -> List[str]:
        return [
            r.child_id
            for r in self.relations
            if r.parent_id == parent_id and (kind is None or r.kind == kind)
        ]

    def parent_of(self, child_id: str, kind: str) -> Optional[str]:
        for r in self.relations:
            if r.child_id == child_id and r.kind == kind:
                return r.parent_id
        return None

    def relations_touching(self, object_id: str) -> List[Relation]:
        return [r for r in self.relations if object_id in (r.parent_id, r.child_id)]

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "relations": [r.to_dict() for r in self.relations],
        }

    @staticmethod
    def from_dict(data: dict) -> "SceneGraph":
        return SceneGraph(
            nodes=list(data["nodes"]),
            relations=[Relation.from_dict(r) for r in data.get("relations", [])],
        )


def support_gap(parent: Aabb, child: Aabb) -> float:
    """Signed vertical gap: child bottom minus parent top."""
    return float(child.min[2] - parent.max[2])


def footprint_overlap_ratio(parent: Aabb, child: Aabb) -> Optional[float]:
    """Fraction of the child footprint covered by the parent footprint,
    or None when the child footprint has no area."""
    child_poly = child.footprint_polygon()
    if child_poly.area <= 0:
        return None
    inter = child_poly.intersection(parent.footprint_polygon())
    return float(inter.area / child_poly.area)


def volume_inside_ratio(parent: Aabb, child: Aabb, inflate: float = 0.0) -> Optional[float]:
    """Fraction of the child volume falling inside the (optionally inflated)
    parent box, or None for a zero-volume child."""
    vol = child.volume()
    if vol <= 0:
        return None
    box = parent.inflated(inflate) if inflate else parent
    return float(child.intersection_volume(box) / vol)


def _support_eligible(parent: Aabb, child: Aabb) -> Optional[Dict[str, float]]:
    gap = support_gap(parent, child)
    if not (SUPPORT_GAP_MIN <= gap <= SUPPORT_GAP_MAX):
        return None
    overlap = footprint_overlap_ratio(parent, child)
    if overlap is None or overlap < SUPPORT_OVERLAP_MIN:
        return None
    return {"vertical_gap": gap, "overlap_ratio": overlap}


def _containment_eligible(parent: Aabb, child: Aabb) -> Optional[Dict[str, float]]:
    ratio = volume_inside_ratio(parent, child, inflate=CONTAINMENT_INFLATE)
    if ratio is None or ratio < CONTAINMENT_RATIO_MIN:
        return None
    return {"volume_inside_ratio": ratio}


def _embedding_eligible(parent: Aabb, child: Aabb) -> Optional[Dict[str, float]]:
    ratio = volume_inside_ratio(parent, child)
    if ratio is None or not (EMBED_RATIO_LOW < ratio < EMBED_RATIO_HIGH):
        return None
    return {"volume_inside_ratio": ratio}


def _would_cycle(parents: Dict[str, str], child: str, parent: str) -> bool:
    # Walk the ancestor chain of the proposed parent; hitting the child
    # means the new edge closes a loop.
    node = parent
    seen = set()
    while node in parents:
        if node in seen:
            return True
        seen.add(node)
        node = parents[node]
        if node == child:
            return True
    return node == child


def build_scene_graph(scene: SceneLayout) -> SceneGraph:
    """Assign relations over all ordered object pairs.

    Each child takes at most one support parent (smallest absolute gap)
    and at most one containment parent (smallest parent volume), with
    edges that would close a cycle skipped in favor of the next eligible
    parent. Embedding edges record partial interpenetration for every
    pair not already linked by support or containment. Objects that end
    up unsupported but rest at floor level attach to the implicit
    "floor" root.
    """
    if scene.floor is None:
        raise PreconditionError("scene graph construction requires a floor polygon")
    ids = sorted(obj.object_id for obj in scene.objects)
    if FLOOR_ID in ids:
        raise PreconditionError(f"object id {FLOOR_ID!r} is reserved for the implicit root")
    boxes = {obj.object_id: obj.box for obj in scene.objects}

    support_parent: Dict[str, str] = {}
    contain_parent: Dict[str, str] = {}
    relations: List[Relation] = []

    # Support: candidates per child sorted by |gap|, parent id breaking ties.
    for child in ids:
        candidates: List[Tuple[float, str, Dict[str, float]]] = []
        for parent in ids:
            if parent == child:
                continue
            evidence = _support_eligible(boxes[parent], boxes[child])
            if evidence is not None:
                candidates.append((abs(evidence["vertical_gap"]), parent, evidence))
        for _, parent, evidence in sorted(candidates, key=lambda c: (c[0], c[1])):
            if _would_cycle(support_parent, child, parent):
                continue
            support_parent[child] = parent
            relations.append(Relation(KIND_SUPPORT, parent, child, evidence))
            break

    # Containment: smallest eligible parent wins.
    for child in ids:
        candidates = []
        for parent in ids:
            if parent == child:
                continue
            evidence = _containment_eligible(boxes[parent], boxes[child])
            if evidence is not None:
                candidates.append((boxes[parent].volume(), parent, evidence))
        for _, parent, evidence in sorted(candidates, key=lambda c: (c[0], c[1])):
            if _would_cycle(contain_parent, child, parent):
                continue
            contain_parent[child] = parent
            relations.append(Relation(KIND_CONTAINMENT, parent, child, evidence))
            break

    # Embedding: every interpenetrating pair not already linked above.
    linked = {(r.parent_id, r.child_id) for r in relations}
    for child in ids:
        for parent in ids:
            if parent == child or (parent, child) in linked:
                continue
            evidence = _embedding_eligible(boxes[parent], boxes[child])
            if evidence is not None:
                relations.append(Relation(KIND_EMBEDDING, parent, child, evidence))

    # Implicit floor root for grounded, otherwise-unsupported objects.
    for child in ids:
        if child in support_parent:
            continue
        gap = float(boxes[child].min[2])
        if SUPPORT_GAP_MIN <= gap <= SUPPORT_GAP_MAX:
            relations.append(Relation(KIND_SUPPORT, FLOOR_ID, child, {"vertical_gap": gap}))

    relations.sort(key=lambda r: (_KIND_ORDER[r.kind], r.child_id, r.parent_id))
    return SceneGraph(nodes=ids, relations=relations)


def validate_graph(graph: SceneGraph, scene: SceneLayout) -> List[Relation]:
    """Relations whose rule thresholds no longer hold for the current boxes.

    Only thresholds are re-tested; parent-choice tie-breaks are not, so a
    supporter that moved with its child intact stays valid.
    """
    boxes = {obj.object_id: obj.box for obj in scene.objects}
    violations: List[Relation] = []
    for rel in graph.relations:
        if rel.child_id not in boxes:
            raise PreconditionError(f"relation child {rel.child_id!r} not in scene")
        if rel.parent_id != FLOOR_ID and rel.parent_id not in boxes:
            raise PreconditionError(f"relation parent {rel.parent_id!r} not in scene")
        child = boxes[rel.child_id]
        if rel.kind == KIND_SUPPORT and rel.parent_id == FLOOR_ID:
            ok = SUPPORT_GAP_MIN <= float(child.min[2]) <= SUPPORT_GAP_MAX
        elif rel.kind == KIND_SUPPORT:
            ok = _support_eligible(boxes[rel.parent_id], child) is not None
        elif rel.kind == KIND_CONTAINMENT:
            ok = _containment_eligible(boxes[rel.parent_id], child) is not None
        elif rel.kind == KIND_EMBEDDING:
            ok = _embedding_eligible(boxes[rel.parent_id], child) is not None
        else:
            raise PreconditionError(f"unknown relation kind {rel.kind!r}")
        if not ok:
            violations.append(rel)
    return violations
