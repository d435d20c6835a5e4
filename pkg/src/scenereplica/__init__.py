"""Real-to-sim scene replica toolkit.

Turns segmented 3D scans plus per-object candidate assets into clean,
physically plausible scene layouts: candidate matching, pose alignment,
spatial scene graphs, collision-driven layout refinement, evaluation
metrics, and a human annotation service.
"""

from .errors import (
    DegenerateHullError,
    EmptyCloudError,
    IngestError,
    PreconditionError,
    SceneReplicaError,
)
from .geometry import (
    Aabb,
    FloorPolygon,
    PointCloud,
    PoseTransform,
    estimate_curvature,
    estimate_floor_plan,
    farthest_point_sample,
    nearest_distance,
)
from .plyio import read_ply, write_ply
from .scene import MicroScene, PlacedObject, SceneLayout
from .metrics import (
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
from .matching import (
    Candidate,
    CandidateSet,
    PointScorerWeights,
    ScoreVector,
    auxiliary_loss,
    batch_loss,
    build_negative_set,
    matching_loss,
    modality_scores,
    point_score,
    rank_candidates,
    read_embeddings,
    score_candidates,
    total_objective,
    write_embeddings,
)
from .pose import AlignmentResult, align_pose, yaw_cost
from .scenegraph import Relation, SceneGraph, build_scene_graph, validate_graph
from .layout import (
    MoveRecord,
    OptimizeResult,
    OptimizerConfig,
    PhysicalAttributes,
    collision_loss,
    optimize_layout,
    validate_physical_attributes,
)
from .categories import CategoryMap, default_category_map
from .bundle import BundleCandidate, BundleObject, SceneBundle, ingest, write_bundle
from .pipeline import (
    PipelineConfig,
    PipelineResult,
    augment_scene,
    evaluate,
    evaluate_scene,
    export_scene,
    extract_microscenes,
    load_exported_scene,
    rank_bundle,
    run_pipeline,
)
from .service import (
    AnnotationRecord,
    QcBatchReport,
    create_app,
    qc_report,
    qc_sample,
    serve,
    training_quadruples,
    validate_annotation,
)

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "AlignmentResult",
    "AnnotationRecord",
    "BundleCandidate",
    "BundleObject",
    "Candidate",
    "CandidateSet",
    "CategoryMap",
    "DegenerateHullError",
    "EmptyCloudError",
    "FloorPolygon",
    "IngestError",
    "MetricsReport",
    "MicroScene",
    "MoveRecord",
    "OptimizeResult",
    "OptimizerConfig",
    "PhysicalAttributes",
    "PipelineConfig",
    "PipelineResult",
    "PlacedObject",
    "PointCloud",
    "PointScorerWeights",
    "PoseTransform",
    "PreconditionError",
    "QcBatchReport",
    "Relation",
    "SceneBundle",
    "SceneGraph",
    "SceneLayout",
    "SceneReplicaError",
    "ScoreVector",
    "align_pose",
    "augment_scene",
    "auxiliary_loss",
    "batch_loss",
    "bbox_iou",
    "build_negative_set",
    "build_scene_graph",
    "category_kl",
    "chamfer_distance",
    "collision_loss",
    "collision_rates",
    "color_histogram_kl",
    "create_app",
    "default_category_map",
    "enhanced_chamfer_distance",
    "estimate_curvature",
    "estimate_floor_plan",
    "evaluate",
    "evaluate_scene",
    "export_scene",
    "extract_microscenes",
    "farthest_point_sample",
    "ingest",
    "load_exported_scene",
    "matching_loss",
    "modality_scores",
    "nearest_distance",
    "normalize_pair",
    "optimize_layout",
    "out_of_plane_rate",
    "point_score",
    "qc_report",
    "qc_sample",
    "rank_bundle",
    "rank_candidates",
    "read_embeddings",
    "read_ply",
    "run_pipeline",
    "scale_error",
    "score_candidates",
    "serve",
    "size_error",
    "topk_accuracy",
    "total_objective",
    "training_quadruples",
    "validate_annotation",
    "validate_graph",
    "validate_physical_attributes",
    "write_bundle",
    "write_embeddings",
    "write_ply",
]
