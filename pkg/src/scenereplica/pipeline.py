"""End-to-end orchestration: rank, align, graph, optimize, export, and
the evaluation and augmentation commands built on top.

Per-object metric rows describe how well the chosen asset fits its scan
(measured at alignment, before layout optimization moves anything);
collision figures describe the final optimized scene.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .bundle import SceneBundle
from .categories import CategoryMap, default_category_map
from .errors import PreconditionError, SceneReplicaError
from .geometry import Aabb, FloorPolygon, PointCloud, farthest_point_sample
from .layout import OptimizerConfig, OptimizeResult, optimize_layout
from .matching import PointScorerWeights, rank_candidates
from .metrics import (
    METRIC_POINT_BUDGET,
    MetricsReport,
    bbox_iou,
    category_kl,
    chamfer_distance,
    collision_rates,
    color_histogram_kl,
    enhanced_chamfer_distance,
    normalize_pair,
    out_of_plane_rate,
    scale_error,
    size_error,
    topk_accuracy,
)
from .pose import AlignmentResult, align_pose
from .scene import MicroScene, PlacedObject, SceneLayout
from .scenegraph import KIND_SUPPORT, FLOOR_ID, SceneGraph, build_scene_graph

MANIFEST_EXPORT_NAME = "scene.json"
NODES_EXPORT_NAME = "nodes.json"
METRICS_JSON_NAME = "metrics.json"
METRICS_CSV_NAME = "metrics.csv"
TRACE_CSV_NAME = "trace.csv"

MICROSCENE_MAX_OBJECTS = 24


@dataclass
class MatchingSection:
    loss_mode: str = "logistic"
    scorer_weights: Optional[str] = None

    def load_scorer(self) -> Optional[PointScorerWeights]:
        if self.scorer_weights is None:
            return None
        return PointScorerWeights.load(self.scorer_weights)


@dataclass
class OptimizerSection:
    max_steps: int = 1000
    step: float = 0.05
    mode: str = "greedy"
    temperature: float = 1.0

    def build(self, boundary: FloorPolygon, seed: int) -> OptimizerConfig:
        return OptimizerConfig.with_step(
            boundary,
            self.step,
            max_steps=self.max_steps,
            seed=seed,
            mode=self.mode,
            temperature=self.temperature,
        )


@dataclass
class ThresholdSection:
    metric_point_budget: int = METRIC_POINT_BUDGET

    def __post_init__(self):
        if self.metric_point_budget < 1:
            raise PreconditionError("metric_point_budget must be >= 1")


@dataclass
class PipelineConfig:
    seed: int = 0
    matching: MatchingSection = field(default_factory=MatchingSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    thresholds: ThresholdSection = field(default_factory=ThresholdSection)

    @staticmethod
    def from_dict(data: dict) -> "PipelineConfig":
        return PipelineConfig(
            seed=int(data.get("seed", 0)),
            matching=MatchingSection(**data.get("matching", {})),
            optimizer=OptimizerSection(**data.get("optimizer", {})),
            thresholds=ThresholdSection(**data.get("thresholds", {})),
        )

    @staticmethod
    def load(path: Union[str, Path]) -> "PipelineConfig":
        return PipelineConfig.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ObjectOutcome:
    object_id: str
    ranking: Optional[List[str]] = None
    alignment: Optional[AlignmentResult] = None
    error: Optional[str] = None


@dataclass
class PipelineResult:
    layout: SceneLayout
    graph: SceneGraph
    report: MetricsReport
    outcomes: Dict[str, ObjectOutcome]
    optimization: OptimizeResult


def rank_bundle(bundle: SceneBundle, cfg: PipelineConfig) -> Dict[str, List[str]]:
    """Candidate rankings for every object, keyed by object id."""
    scorer = cfg.matching.load_scorer()
    rankings = {}
    for obj in sorted(bundle.objects, key=lambda o: o.object_id):
        ids, _ = rank_candidates(obj.candidate_set(), scorer)
        rankings[obj.object_id] = ids
    return rankings


def _place_candidate(scan: PointCloud, candidate_cloud: PointCloud) -> Tuple[AlignmentResult, PointCloud, Aabb]:
    alignment = align_pose(scan, candidate_cloud)
    placed_points = alignment.transform.apply(candidate_cloud.points)
    placed = PointCloud(points=placed_points, colors=candidate_cloud.colors)
    return alignment, placed, Aabb.from_points(placed_points)


def _metric_pair(scan: PointCloud, placed: PointCloud, budget: int) -> Tuple[PointCloud, PointCloud]:
    return normalize_pair(
        farthest_point_sample(scan, budget),
        farthest_point_sample(placed, budget),
    )


def _object_metrics(
    scan: PointCloud, placed: PointCloud, scan_box: Aabb, placed_box: Aabb, budget: int
) -> Dict[str, Optional[float]]:
    norm_scan, norm_placed = _metric_pair(scan, placed, budget)
    row: Dict[str, Optional[float]] = {
        "cd": chamfer_distance(norm_scan, norm_placed),
        "ecd": enhanced_chamfer_distance(norm_scan, norm_placed),
        "size_err_m3": size_error(placed_box, scan_box),
    }
    try:
        row["iou"] = bbox_iou(placed_box, scan_box)
    except PreconditionError:
        row["iou"] = None
    if scan.has_colors and placed.has_colors:
        row["color_hist_kl"] = color_histogram_kl(placed, scan)
    else:
        row["color_hist_kl"] = None
    return row


def run_pipeline(
    bundle: SceneBundle, cfg: Optional[PipelineConfig] = None, cmap: Optional[CategoryMap] = None
) -> PipelineResult:
    """Match, align, graph, optimize, and measure one scene bundle.

    A failing object degrades to a placeholder at its scan bounding box
    with the failure recorded; it never aborts the scene.
    """
    cfg = cfg or PipelineConfig()
    cmap = cmap or default_category_map()
    scorer = cfg.matching.load_scorer()
    budget = cfg.thresholds.metric_point_budget

    placed_objects: List[PlacedObject] = []
    outcomes: Dict[str, ObjectOutcome] = {}
    report = MetricsReport()
    aligned_boxes: List[Aabb] = []
    scan_boxes: List[Aabb] = []
    rankings_for_topk: List[List[str]] = []
    truths_for_topk: List[str] = []

    for obj in sorted(bundle.objects, key=lambda o: o.object_id):
        outcome = ObjectOutcome(object_id=obj.object_id)
        outcomes[obj.object_id] = outcome
        category = cmap.merge(obj.category)
        scan_box = obj.scan_cloud.aabb() if len(obj.scan_cloud) else None
        try:
            ids, _ = rank_candidates(obj.candidate_set(), scorer)
            outcome.ranking = ids
            best = obj.candidate_by_id(ids[0])
            alignment, placed_cloud, placed_box = _place_candidate(obj.scan_cloud, best.cloud)
            outcome.alignment = alignment
            metrics_row = _object_metrics(obj.scan_cloud, placed_cloud, scan_box, placed_box, budget)
            placed_objects.append(
                PlacedObject(
                    object_id=obj.object_id,
                    box=placed_box,
                    category=category,
                    asset_id=best.asset_id,
                    transform=alignment.transform,
                )
            )
            report.per_object[obj.object_id] = metrics_row
            aligned_boxes.append(placed_box)
            scan_boxes.append(scan_box)
            if obj.truth_asset_id is not None:
                rankings_for_topk.append(ids)
                truths_for_topk.append(obj.truth_asset_id)
        except SceneReplicaError as exc:
            outcome.error = str(exc)
            if scan_box is None:
                continue
            placed_objects.append(
                PlacedObject(object_id=obj.object_id, box=scan_box, category=category)
            )
            report.per_object[obj.object_id] = {key: None for key in ("cd", "ecd", "iou", "color_hist_kl", "size_err_m3")}

    layout = SceneLayout(scene_id=bundle.scene_id, objects=placed_objects, floor=bundle.floor)
    graph = build_scene_graph(layout)
    opt_cfg = cfg.optimizer.build(bundle.floor, cfg.seed)
    optimization = optimize_layout(layout, graph, opt_cfg)
    final_layout = optimization.scene

    rates = collision_rates(final_layout)
    report.per_scene["col_obj"] = rates["col_obj"]
    report.per_scene["col_scene"] = rates["col_scene"]
    report.per_scene["scale_err_m"] = (
        scale_error(aligned_boxes, scan_boxes) if aligned_boxes and scan_boxes else None
    )
    if truths_for_topk:
        report.per_scene["top1"] = topk_accuracy(rankings_for_topk, truths_for_topk, k=1)
        report.per_scene["top5"] = topk_accuracy(rankings_for_topk, truths_for_topk, k=5)
    else:
        report.per_scene["top1"] = None
        report.per_scene["top5"] = None
    report.per_scene["r_out"] = None
    report.per_scene["ckl"] = None
    report.validate()

    return PipelineResult(
        layout=final_layout,
        graph=graph,
        report=report,
        outcomes=outcomes,
        optimization=optimization,
    )


def augment_scene(
    bundle: SceneBundle, rankings: Dict[str, List[str]], k: int, seed: int
) -> SceneLayout:
    """Swap every object to a uniformly drawn member of its top-k
    alternatives (ranks 2..k+1) and re-align its pose."""
    if not (1 <= k <= 5):
        raise PreconditionError(f"k must be in [1, 5], got {k}")
    rng = np.random.default_rng(seed)
    placed: List[PlacedObject] = []
    cmap = default_category_map()
    for obj in sorted(bundle.objects, key=lambda o: o.object_id):
        ranking = rankings.get(obj.object_id)
        if not ranking:
            raise PreconditionError(f"{obj.object_id}: no ranking to augment from")
        if len(ranking) < 2:
            raise PreconditionError(f"{obj.object_id}: ranking needs >= 2 candidates")
        alternatives = ranking[1 : 1 + min(k, len(ranking) - 1)]
        choice = alternatives[int(rng.integers(len(alternatives)))]
        candidate = obj.candidate_by_id(choice)
        alignment, _, placed_box = _place_candidate(obj.scan_cloud, candidate.cloud)
        placed.append(
            PlacedObject(
                object_id=obj.object_id,
                box=placed_box,
                category=cmap.merge(obj.category),
                asset_id=choice,
                transform=alignment.transform,
            )
        )
    return SceneLayout(scene_id=bundle.scene_id, objects=placed, floor=bundle.floor)


def extract_microscenes(
    layout: SceneLayout, graph: SceneGraph, cmap: Optional[CategoryMap] = None
) -> List[MicroScene]:
    """One micro-scene per large-furniture object with supported children.

    A micro-scene is capped at 24 objects including the large one; the
    smallest-volume children are dropped first.
    """
    cmap = cmap or default_category_map()
    objects = layout.by_id()
    children_of: Dict[str, List[str]] = {}
    for rel in graph.relations:
        if rel.kind == KIND_SUPPORT and rel.parent_id != FLOOR_ID:
            children_of.setdefault(rel.parent_id, []).append(rel.child_id)

    micros: List[MicroScene] = []
    for parent_id in sorted(children_of):
        parent = objects.get(parent_id)
        if parent is None:
            raise PreconditionError(f"graph references unknown object {parent_id!r}")
        parent_cat = cmap.merge(parent.category)
        if not cmap.is_large(parent_cat):
            continue
        child_ids = children_of[parent_id]
        if len(child_ids) + 1 > MICROSCENE_MAX_OBJECTS:
            keep = sorted(
                child_ids, key=lambda cid: (-objects[cid].box.volume(), cid)
            )[: MICROSCENE_MAX_OBJECTS - 1]
            child_ids = keep
        smalls = []
        for cid in sorted(child_ids):
            child = objects[cid]
            smalls.append(
                PlacedObject(
                    object_id=child.object_id,
                    box=child.box,
                    category=cmap.merge(child.category),
                    asset_id=child.asset_id,
                    transform=child.transform,
                )
            )
        corners = parent.box.footprint_corners()
        micros.append(
            MicroScene(
                large_id=parent_id,
                large_category=parent_cat,
                top_surface=FloorPolygon(vertices=corners),
                small_objects=smalls,
            )
        )
    return micros


# ---------------------------------------------------------------------------
# Export and re-load
# ---------------------------------------------------------------------------


def _yaw_quaternion(yaw: float) -> List[float]:
    # x, y, z, w for a rotation about +z.
    return [0.0, 0.0, math.sin(yaw / 2.0), math.cos(yaw / 2.0)]


def export_scene(result: PipelineResult, out_dir: Union[str, Path]) -> Path:
    """Write the scene manifest, glTF-style node list, metric report, and
    optimizer trace. Byte-identical for identical pipeline results."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    manifest = result.layout.to_dict()
    manifest["v"] = 1
    manifest["relations"] = [r.to_dict() for r in result.graph.relations]
    rankings = {
        oid: outcome.ranking
        for oid, outcome in sorted(result.outcomes.items())
        if outcome.ranking is not None
    }
    if rankings:
        manifest["rankings"] = rankings
    errors = {
        oid: outcome.error for oid, outcome in sorted(result.outcomes.items()) if outcome.error
    }
    if errors:
        manifest["errors"] = errors
    (out / MANIFEST_EXPORT_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    nodes = []
    for obj in sorted(result.layout.objects, key=lambda o: o.object_id):
        tf = obj.transform
        node = {
            "name": obj.object_id,
            "mesh": obj.asset_id,
            "translation": [float(v) for v in tf.translation] if tf else [0.0, 0.0, 0.0],
            "rotation": _yaw_quaternion(tf.yaw) if tf else [0.0, 0.0, 0.0, 1.0],
            "scale": [tf.scale] * 3 if tf else [1.0, 1.0, 1.0],
        }
        nodes.append(node)
    (out / NODES_EXPORT_NAME).write_text(
        json.dumps({"v": 1, "nodes": nodes}, indent=2, sort_keys=True) + "\n"
    )

    (out / METRICS_JSON_NAME).write_text(result.report.to_json())
    (out / METRICS_CSV_NAME).write_text(result.report.to_csv())
    (out / TRACE_CSV_NAME).write_text(result.optimization.trace_csv())
    return out


def load_exported_scene(path: Union[str, Path]) -> Tuple[SceneLayout, SceneGraph, Dict[str, List[str]]]:
    """Read back an exported manifest: layout, graph, rankings."""
    path = Path(path)
    manifest_path = path / MANIFEST_EXPORT_NAME if path.is_dir() else path
    data = json.loads(manifest_path.read_text())
    layout = SceneLayout.from_dict(data)
    from .scenegraph import Relation

    graph = SceneGraph(
        nodes=sorted(o.object_id for o in layout.objects),
        relations=[Relation.from_dict(r) for r in data.get("relations", [])],
    )
    rankings = {str(k): list(v) for k, v in data.get("rankings", {}).items()}
    return layout, graph, rankings


# ---------------------------------------------------------------------------
# Evaluation harness
# ---------------------------------------------------------------------------


def _category_counts(categories: List[str], universe: List[str]) -> Dict[str, float]:
    counts = {c: 0.0 for c in universe}
    for cat in categories:
        counts[cat] = counts.get(cat, 0.0) + 1.0
    return counts


def evaluate_scene(
    pred_layout: SceneLayout,
    pred_rankings: Dict[str, List[str]],
    gt_bundle: SceneBundle,
    budget: int = METRIC_POINT_BUDGET,
    cmap: Optional[CategoryMap] = None,
) -> MetricsReport:
    """All metrics for one predicted scene against its source bundle."""
    if pred_layout.scene_id != gt_bundle.scene_id:
        raise PreconditionError(
            f"scene id mismatch: predicted {pred_layout.scene_id!r} vs {gt_bundle.scene_id!r}"
        )
    cmap = cmap or default_category_map()
    gt_objects = gt_bundle.by_id()
    report = MetricsReport()

    pred_boxes: List[Aabb] = []
    scan_boxes: List[Aabb] = []
    rankings: List[List[str]] = []
    truths: List[str] = []
    pred_cats: List[str] = []
    gt_cats: List[str] = []

    for obj in sorted(pred_layout.objects, key=lambda o: o.object_id):
        gt = gt_objects.get(obj.object_id)
        if gt is None:
            raise PreconditionError(f"predicted object {obj.object_id!r} not in ground truth")
        key = f"{pred_layout.scene_id}/{obj.object_id}"
        scan_box = gt.scan_cloud.aabb()
        pred_boxes.append(obj.box)
        scan_boxes.append(scan_box)
        pred_cats.append(cmap.merge(obj.category))
        gt_cats.append(cmap.merge(gt.category))

        if obj.asset_id is None or obj.transform is None:
            report.per_object[key] = {k: None for k in ("cd", "ecd", "iou", "color_hist_kl", "size_err_m3")}
            continue
        try:
            candidate = gt.candidate_by_id(obj.asset_id)
        except KeyError:
            raise PreconditionError(f"{key}: asset {obj.asset_id!r} not among ground-truth candidates")
        placed_points = obj.transform.apply(candidate.cloud.points)
        placed = PointCloud(points=placed_points, colors=candidate.cloud.colors)
        report.per_object[key] = _object_metrics(gt.scan_cloud, placed, scan_box, obj.box, budget)

        if gt.truth_asset_id is not None:
            ranking = pred_rankings.get(obj.object_id)
            if ranking:
                rankings.append(ranking)
                truths.append(gt.truth_asset_id)

    if truths:
        report.per_scene["top1"] = topk_accuracy(rankings, truths, k=1)
        report.per_scene["top5"] = topk_accuracy(rankings, truths, k=5)
    else:
        report.per_scene["top1"] = None
        report.per_scene["top5"] = None
    report.per_scene["scale_err_m"] = (
        scale_error(pred_boxes, scan_boxes) if pred_boxes and scan_boxes else None
    )
    rates = collision_rates(pred_layout)
    report.per_scene["col_obj"] = rates["col_obj"]
    report.per_scene["col_scene"] = rates["col_scene"]

    universe = sorted(set(pred_cats) | set(gt_cats))
    if universe:
        report.per_scene["ckl"] = category_kl(
            _category_counts(pred_cats, universe), _category_counts(gt_cats, universe)
        )
    else:
        report.per_scene["ckl"] = None

    if pred_layout.floor is not None and pred_layout.objects:
        graph = build_scene_graph(pred_layout)
        micros = extract_microscenes(pred_layout, graph, cmap)
        rates_out = [out_of_plane_rate(m) for m in micros if m.small_objects]
        report.per_scene["r_out"] = float(np.mean(rates_out)) if rates_out else None
    else:
        report.per_scene["r_out"] = None

    report.validate()
    return report


def evaluate(pred_root: Union[str, Path], gt_root: Union[str, Path]) -> MetricsReport:
    """Evaluate every exported scene under pred_root against the bundle of
    the same scene id under gt_root."""
    from .bundle import ingest

    pred_root, gt_root = Path(pred_root), Path(gt_root)
    if not pred_root.is_dir():
        raise PreconditionError(f"prediction root {pred_root} is not a directory")
    if not gt_root.is_dir():
        raise PreconditionError(f"ground-truth root {gt_root} is not a directory")
    pred_dirs = sorted(p for p in pred_root.iterdir() if (p / MANIFEST_EXPORT_NAME).is_file())
    gt_dirs = sorted(p for p in gt_root.iterdir() if (p / "scene.json").is_file())
    if not pred_dirs:
        raise PreconditionError(f"no exported scenes under {pred_root}")

    gt_by_id: Dict[str, SceneBundle] = {}
    for d in gt_dirs:
        bundle = ingest(d)
        gt_by_id[bundle.scene_id] = bundle

    reports = []
    for d in pred_dirs:
        layout, _, rankings = load_exported_scene(d)
        if layout.scene_id not in gt_by_id:
            raise PreconditionError(f"predicted scene {layout.scene_id!r} has no ground-truth bundle")
        reports.append(evaluate_scene(layout, rankings, gt_by_id[layout.scene_id]))
    return MetricsReport.merge(reports)
