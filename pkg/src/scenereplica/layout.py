"""Collision-driven layout refinement and physical-attribute checks.

The optimizer walks objects along the floor plane in fixed steps,
accepting a move only when it strictly lowers the best collision loss
seen so far, with scene-boundary and scene-graph checks as hard
rejections. A Metropolis acceptance mode is available for scenes where
greedy descent stalls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

import numpy as np

from .errors import PreconditionError
from .geometry import Aabb, FloorPolygon
from .scene import PlacedObject, SceneLayout
from .scenegraph import (
    FLOOR_ID,
    KIND_CONTAINMENT,
    KIND_EMBEDDING,
    KIND_SUPPORT,
    SUPPORT_GAP_MAX,
    SUPPORT_GAP_MIN,
    SceneGraph,
    _containment_eligible,
    _embedding_eligible,
    _support_eligible,
    validate_graph,
)

DEFAULT_STEP = 0.05
DEFAULT_MAX_STEPS = 1000
DEFAULT_MOVES: Tuple[Tuple[float, float], ...] = (
    (DEFAULT_STEP, 0.0),
    (-DEFAULT_STEP, 0.0),
    (0.0, DEFAULT_STEP),
    (0.0, -DEFAULT_STEP),
)

MODE_GREEDY = "greedy"
MODE_METROPOLIS = "metropolis"


@dataclass
class OptimizerConfig:
    boundary: FloorPolygon
    max_steps: int = DEFAULT_MAX_STEPS
    moves: Tuple[Tuple[float, float], ...] = DEFAULT_MOVES
    seed: int = 0
    mode: str = MODE_GREEDY
    temperature: float = 1.0

    def __post_init__(self):
        if self.max_steps < 1:
            raise PreconditionError(f"max_steps must be >= 1, got {self.max_steps}")
        if not self.moves:
            raise PreconditionError("move set is empty")
        moves = tuple((float(dx), float(dy)) for dx, dy in self.moves)
        for dx, dy in moves:
            if dx == 0.0 and dy == 0.0:
                raise PreconditionError("zero-length move in move set")
        object.__setattr__(self, "moves", moves)
        if self.mode not in (MODE_GREEDY, MODE_METROPOLIS):
            raise PreconditionError(f"unknown acceptance mode {self.mode!r}")
        if self.mode == MODE_METROPOLIS and self.temperature <= 0:
            raise PreconditionError("metropolis mode needs temperature > 0")

    @staticmethod
    def with_step(boundary: FloorPolygon, step: float, **kwargs) -> "OptimizerConfig":
        if step <= 0:
            raise PreconditionError(f"step size must be > 0, got {step}")
        moves = ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step))
        return OptimizerConfig(boundary=boundary, moves=moves, **kwargs)


@dataclass
class MoveRecord:
    step: int
    object_id: str
    move: Tuple[float, float]
    accepted: bool
    loss: float

    def to_csv_row(self) -> str:
        return (
            f"{self.step},{self.object_id},{self.move[0]:g},{self.move[1]:g},"
            f"{int(self.accepted)},{self.loss!r}"
        )


@dataclass
class OptimizeResult:
    scene: SceneLayout
    trace: List[float]
    records: List[MoveRecord] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.trace[-1]

    @property
    def converged(self) -> bool:
        return self.final_loss == 0.0

    def trace_csv(self) -> str:
        lines = ["step,object_id,dx,dy,accepted,loss"]
        lines.extend(r.to_csv_row() for r in self.records)
        return "\n".join(lines) + "\n"


def _pair_iou(a: Aabb, b: Aabb) -> float:
    inter = a.intersection_volume(b)
    if inter <= 0.0:
        return 0.0
    union = a.volume() + b.volume() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def collision_loss(scene: SceneLayout) -> float:
    """Sum of bounding-box IoU over all unique object pairs."""
    boxes = scene.boxes()
    total = 0.0
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            total += _pair_iou(boxes[i], boxes[j])
    return float(total)


class _LossState:
    """Pairwise-IoU matrix for the scene being optimized. A proposal
    patches one row/column and re-sums the upper triangle, so the same
    box configuration always reproduces the same loss bit for bit."""

    def __init__(self, boxes: List[Aabb]):
        n = len(boxes)
        self.mins = np.array([b.min for b in boxes]) if n else np.zeros((0, 3))
        self.maxs = np.array([b.max for b in boxes]) if n else np.zeros((0, 3))
        self.vols = np.prod(self.maxs - self.mins, axis=1)
        self.pair = np.zeros((n, n))
        for i in range(n):
            self.pair[i] = self._row_iou(self.mins[i], self.maxs[i], self.vols[i])
            self.pair[i, i] = 0.0
        self.loss = float(np.triu(self.pair, k=1).sum())

    def _row_iou(self, bmin: np.ndarray, bmax: np.ndarray, vol: float) -> np.ndarray:
        lo = np.maximum(self.mins, bmin)
        hi = np.minimum(self.maxs, bmax)
        inter = np.prod(np.clip(hi - lo, 0.0, None), axis=1)
        union = self.vols + vol - inter
        with np.errstate(invalid="ignore", divide="ignore"):
            iou = np.where(union > 0.0, inter / union, 0.0)
        return np.where(inter > 0.0, iou, 0.0)

    def loss_if_moved(self, idx: int, box: Aabb) -> Tuple[float, np.ndarray]:
        vol = float(box.volume())
        row = self._row_iou(box.min, box.max, vol)
        row[idx] = 0.0
        patched = self.pair.copy()
        patched[idx, :] = row
        patched[:, idx] = row
        return float(np.triu(patched, k=1).sum()), row

    def commit(self, idx: int, box: Aabb, row: np.ndarray, loss: float) -> None:
        self.mins[idx] = box.min
        self.maxs[idx] = box.max
        self.vols[idx] = float(box.volume())
        self.pair[idx, :] = row
        self.pair[:, idx] = row
        self.loss = loss


def _relation_holds(rel, objects: Dict[str, PlacedObject]) -> bool:
    child = objects[rel.child_id].box
    if rel.kind == KIND_SUPPORT and rel.parent_id == FLOOR_ID:
        return SUPPORT_GAP_MIN <= float(child.min[2]) <= SUPPORT_GAP_MAX
    parent = objects[rel.parent_id].box
    if rel.kind == KIND_SUPPORT:
        return _support_eligible(parent, child) is not None
    if rel.kind == KIND_CONTAINMENT:
        return _containment_eligible(parent, child) is not None
    if rel.kind == KIND_EMBEDDING:
        return _embedding_eligible(parent, child) is not None
    raise PreconditionError(f"unknown relation kind {rel.kind!r}")


def optimize_layout(scene: SceneLayout, graph: SceneGraph, cfg: OptimizerConfig) -> OptimizeResult:
    """Greedy (default) or Metropolis descent on the collision loss.

    One step proposes a move for every object in id order. A proposal is
    rejected outright when any footprint corner leaves the boundary or
    any scene-graph relation involving the moved object stops holding.
    The trace records the best loss after each step, starting with the
    initial loss, so it is non-increasing by construction; the loop ends
    when the best loss reaches zero or the step budget runs out.
    """
    violations = validate_graph(graph, scene)
    if violations:
        raise PreconditionError(f"graph invalid for scene: {len(violations)} relations do not hold")

    work = scene.clone()
    ids = sorted(obj.object_id for obj in work.objects)
    index_of = {oid: i for i, oid in enumerate(ids)}
    objects = work.by_id()
    state = _LossState([objects[oid].box for oid in ids])

    touching = {oid: graph.relations_touching(oid) for oid in ids}
    support_children: Dict[str, List[str]] = {oid: [] for oid in ids}
    support_gap: Dict[str, float] = {}
    for rel in graph.relations:
        if rel.kind == KIND_SUPPORT and rel.parent_id != FLOOR_ID:
            support_children[rel.parent_id].append(rel.child_id)
            support_gap[rel.child_id] = rel.evidence.get("vertical_gap", 0.0)

    rng = np.random.default_rng(cfg.seed)
    l_min = state.loss
    l_current = l_min
    best_scene = work.clone() if cfg.mode == MODE_METROPOLIS else None
    trace = [l_min]
    records: List[MoveRecord] = []

    step = 0
    while l_min > 0.0 and step < cfg.max_steps:
        step += 1
        for oid in ids:
            move_idx = int(rng.integers(len(cfg.moves)))
            dx, dy = cfg.moves[move_idx]
            offset = np.array([dx, dy, 0.0])
            obj = objects[oid]
            new_box = obj.box.translated(offset)

            accepted = False
            if cfg.boundary.contains_corners(new_box.footprint_corners()):
                idx = index_of[oid]
                new_loss, row = state.loss_if_moved(idx, new_box)
                work.move_object(oid, offset)
                if all(_relation_holds(rel, objects) for rel in touching[oid]):
                    if cfg.mode == MODE_GREEDY:
                        accepted = new_loss < l_min
                    else:
                        delta = new_loss - l_current
                        accepted = delta < 0 or rng.random() < math.exp(-delta / cfg.temperature)
                if accepted:
                    state.commit(idx, new_box, row, new_loss)
                    l_current = new_loss
                    _snap_children(work, objects, oid, support_children, support_gap, state, index_of, set())
                    if new_loss < l_min:
                        l_min = new_loss
                        if best_scene is not None:
                            best_scene = work.clone()
                else:
                    work.move_object(oid, -offset)

            records.append(
                MoveRecord(step=step, object_id=oid, move=(dx, dy), accepted=accepted, loss=l_min)
            )
            if l_min == 0.0:
                break
        trace.append(l_min)

    final = best_scene if best_scene is not None else work
    return OptimizeResult(scene=final, trace=trace, records=records)


def _snap_children(
    work: SceneLayout,
    objects: Dict[str, PlacedObject],
    parent_id: str,
    support_children: Dict[str, List[str]],
    support_gap: Dict[str, float],
    state: _LossState,
    index_of: Dict[str, int],
    visited: Set[str],
) -> None:
    # Horizontal moves leave the parent top unchanged, so this is a no-op
    # unless a custom move set shifts boxes vertically.
    if parent_id in visited:
        return
    visited.add(parent_id)
    parent_top = float(objects[parent_id].box.max[2])
    for child_id in support_children.get(parent_id, ()):
        child_box = objects[child_id].box
        target_bottom = parent_top + support_gap.get(child_id, 0.0)
        dz = target_bottom - float(child_box.min[2])
        if dz != 0.0:
            work.move_object(child_id, np.array([0.0, 0.0, dz]))
            moved = objects[child_id].box
            idx = index_of[child_id]
            loss, row = state.loss_if_moved(idx, moved)
            state.commit(idx, moved, row, loss)
            _snap_children(work, objects, child_id, support_children, support_gap, state, index_of, visited)


RIGID_BODY = "rigid_body"
CLOTH = "cloth"
SOFT_BODY = "soft_body"
ATTRIBUTE_CATEGORIES = (RIGID_BODY, CLOTH, SOFT_BODY)

SMALL_VOLUME_MAX = 0.05
MEDIUM_VOLUME_MAX = 1.0
SMALL_MASS_RANGE = (0.1, 5.0)
MEDIUM_MASS_RANGE = (5.0, 50.0)
LARGE_MASS_MIN = 50.0
FRICTION_RANGE = (0.0, 1.5)


@dataclass
class PhysicalAttributes:
    category: str
    mass: float
    friction: float
    bounciness: float

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "mass": float(self.mass),
            "friction": float(self.friction),
            "bounciness": float(self.bounciness),
        }

    @staticmethod
    def from_dict(data: dict) -> "PhysicalAttributes":
        return PhysicalAttributes(
            category=data["category"],
            mass=float(data["mass"]),
            friction=float(data["friction"]),
            bounciness=float(data["bounciness"]),
        )


def validate_physical_attributes(attrs: PhysicalAttributes, bbox: Aabb) -> List[str]:
    """Violation descriptions, empty when the attributes are sound.

    The mass band depends on the box volume class: under 0.05 cubic
    metres the object should weigh 0.1 to 5 kg, under 1 cubic metre 5 to
    50 kg, and anything larger should exceed 50 kg.
    """
    violations: List[str] = []
    if attrs.category not in ATTRIBUTE_CATEGORIES:
        violations.append(f"category {attrs.category!r} not one of {ATTRIBUTE_CATEGORIES}")
    if not (attrs.mass > 0):
        violations.append(f"mass must be positive, got {attrs.mass}")
    else:
        volume = bbox.volume()
        if volume < SMALL_VOLUME_MAX:
            lo, hi = SMALL_MASS_RANGE
            if not (lo <= attrs.mass <= hi):
                violations.append(
                    f"small object (vol {volume:.4f} m^3) mass {attrs.mass} outside [{lo}, {hi}] kg"
                )
        elif volume < MEDIUM_VOLUME_MAX:
            lo, hi = MEDIUM_MASS_RANGE
            if not (lo <= attrs.mass <= hi):
                violations.append(
                    f"medium object (vol {volume:.4f} m^3) mass {attrs.mass} outside [{lo}, {hi}] kg"
                )
        elif not (attrs.mass > LARGE_MASS_MIN):
            violations.append(
                f"large object (vol {volume:.4f} m^3) mass {attrs.mass} not above {LARGE_MASS_MIN} kg"
            )
    lo, hi = FRICTION_RANGE
    if not (lo <= attrs.friction <= hi):
        violations.append(f"friction {attrs.friction} outside [{lo}, {hi}]")
    if attrs.bounciness not in (0, 1, 0.0, 1.0):
        violations.append(f"bounciness {attrs.bounciness} must be 0 or 1")
    return violations
