"""HTTP annotation service: browse scenes, submit annotations, QC
sampling, and training-set export.

State lives in the bundle directories themselves; every mutation is an
atomic temp-file-plus-rename under a per-scene lock, so a crash never
leaves a half-written annotations file and concurrent submitters
serialize per scene (last write wins, history retained).
"""

from __future__ import annotations

import base64
import io
import json
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .bundle import ANNOTATIONS_NAME, SceneBundle, ingest
from .errors import PreconditionError
from .geometry import PointCloud, PoseTransform, farthest_point_sample

QC_SAMPLE_FRACTION = 0.10
QC_PASS_RATE_THRESHOLD = 0.98
RANKING_MIN = 2
RANKING_MAX = 5
DEFAULT_CLOUD_BUDGET = 2048
MAX_CLOUD_BUDGET = 50000
THUMBNAIL_SIZE = 96

QC_REPORTS_NAME = "qc_reports.json"


# ---------------------------------------------------------------------------
# Pure annotation / QC logic, independent of HTTP
# ---------------------------------------------------------------------------


@dataclass
class AnnotationRecord:
    object_id: str
    best_asset_id: str
    transform: PoseTransform
    ranking: List[str]
    annotator_id: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "object_id": self.object_id,
            "best_asset_id": self.best_asset_id,
            "transform": self.transform.to_dict(),
            "ranking": list(self.ranking),
            "annotator_id": self.annotator_id,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_dict(data: dict) -> "AnnotationRecord":
        return AnnotationRecord(
            object_id=data["object_id"],
            best_asset_id=data["best_asset_id"],
            transform=PoseTransform.from_dict(data["transform"]),
            ranking=list(data["ranking"]),
            annotator_id=data.get("annotator_id", ""),
            timestamp=data.get("timestamp", ""),
        )


def validate_annotation(record: AnnotationRecord, candidate_ids: Sequence[str]) -> Dict[str, str]:
    """Field-level problems with an annotation; empty when it is valid."""
    errors: Dict[str, str] = {}
    known = set(candidate_ids)
    if record.best_asset_id not in known:
        errors["best_asset_id"] = f"{record.best_asset_id!r} is not a candidate of this object"
    if not (RANKING_MIN <= len(record.ranking) <= RANKING_MAX):
        errors["ranking"] = (
            f"ranking must list {RANKING_MIN} to {RANKING_MAX} assets, got {len(record.ranking)}"
        )
    elif len(set(record.ranking)) != len(record.ranking):
        errors["ranking"] = "ranking contains duplicate asset ids"
    elif record.best_asset_id in record.ranking:
        errors["ranking"] = "best asset must not appear in the ranking"
    else:
        unknown = [a for a in record.ranking if a not in known]
        if unknown:
            errors["ranking"] = f"unknown asset ids in ranking: {unknown}"
    if not record.annotator_id:
        errors["annotator_id"] = "annotator_id is required"
    if not record.timestamp:
        errors["timestamp"] = "timestamp is required"
    return errors


def qc_sample(batch_ids: Sequence[str], seed: int) -> List[str]:
    """Seeded sample of ceil(10%) of the batch, without replacement."""
    ids = sorted(batch_ids)
    if not ids:
        raise PreconditionError("QC sampling requires a non-empty batch")
    n = math.ceil(QC_SAMPLE_FRACTION * len(ids))
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(ids), size=n, replace=False)
    return sorted(ids[int(i)] for i in picks)


@dataclass
class QcBatchReport:
    batch_id: str
    seed: int
    sampled: List[str]
    pass_count: int
    pass_rate: float
    accepted: bool

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "batch_id": self.batch_id,
            "seed": self.seed,
            "sampled": list(self.sampled),
            "pass_count": self.pass_count,
            "pass_rate": self.pass_rate,
            "accepted": self.accepted,
        }


def qc_report(batch_id: str, batch_ids: Sequence[str], seed: int, verdicts: Dict[str, bool]) -> QcBatchReport:
    """Complete a QC round: verdicts must cover exactly the seeded sample;
    the batch passes only above a 98% pass rate, never at it."""
    sampled = qc_sample(batch_ids, seed)
    if set(verdicts) != set(sampled):
        missing = sorted(set(sampled) - set(verdicts))
        extra = sorted(set(verdicts) - set(sampled))
        raise PreconditionError(f"verdicts do not match the sample (missing {missing}, extra {extra})")
    pass_count = sum(1 for oid in sampled if verdicts[oid])
    pass_rate = pass_count / len(sampled)
    return QcBatchReport(
        batch_id=batch_id,
        seed=seed,
        sampled=sampled,
        pass_count=pass_count,
        pass_rate=pass_rate,
        accepted=pass_rate > QC_PASS_RATE_THRESHOLD,
    )


def training_quadruples(
    bundle: SceneBundle, records: Sequence[AnnotationRecord]
) -> Tuple[List[dict], List[str]]:
    """Quadruple entries (latest annotation per object) plus the ids of
    objects still lacking one."""
    latest: Dict[str, AnnotationRecord] = {}
    for rec in records:
        latest[rec.object_id] = rec
    quads: List[dict] = []
    unannotated: List[str] = []
    for obj in sorted(bundle.objects, key=lambda o: o.object_id):
        rec = latest.get(obj.object_id)
        if rec is None:
            unannotated.append(obj.object_id)
            continue
        candidate_ids = [c.asset_id for c in obj.candidates]
        quads.append(
            {
                "scene_id": bundle.scene_id,
                "object_id": obj.object_id,
                "candidates": candidate_ids,
                "truth_index": candidate_ids.index(rec.best_asset_id),
                "ranking": list(rec.ranking),
                "caption": obj.caption,
                "image": obj.image_path,
                "annotator_id": rec.annotator_id,
                "timestamp": rec.timestamp,
            }
        )
    return quads, unannotated


def _atomic_write_json(path: Path, payload: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Service state
# ---------------------------------------------------------------------------


class ServiceState:
    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        if not self.root.is_dir():
            raise PreconditionError(f"service root {self.root} is not a directory")
        bundle_dirs = sorted(p for p in self.root.iterdir() if (p / "scene.json").is_file())
        if not bundle_dirs:
            raise PreconditionError(f"no scene bundles under {self.root}")
        self.bundles: Dict[str, SceneBundle] = {}
        self.object_scene: Dict[str, str] = {}
        for d in bundle_dirs:
            bundle = ingest(d)
            if bundle.scene_id in self.bundles:
                raise PreconditionError(f"duplicate scene id {bundle.scene_id!r} under {self.root}")
            for obj in bundle.objects:
                if obj.object_id in self.object_scene:
                    raise PreconditionError(
                        f"object id {obj.object_id!r} appears in more than one scene"
                    )
                self.object_scene[obj.object_id] = bundle.scene_id
            self.bundles[bundle.scene_id] = bundle
        self.records: Dict[str, List[AnnotationRecord]] = {
            sid: [AnnotationRecord.from_dict(r) for r in b.annotations]
            for sid, b in self.bundles.items()
        }
        self._locks: Dict[str, threading.Lock] = {sid: threading.Lock() for sid in self.bundles}

    def scene_of(self, object_id: str) -> Optional[str]:
        return self.object_scene.get(object_id)

    def object(self, object_id: str):
        sid = self.scene_of(object_id)
        if sid is None:
            return None
        return self.bundles[sid].by_id()[object_id]

    def annotated_ids(self, scene_id: str) -> List[str]:
        return sorted({r.object_id for r in self.records.get(scene_id, [])})

    def submit(self, object_id: str, record: AnnotationRecord) -> str:
        scene_id = self.scene_of(object_id)
        if scene_id is None:
            raise KeyError(object_id)
        with self._locks[scene_id]:
            records = self.records[scene_id]
            records.append(record)
            payload = {"v": 1, "records": [r.to_dict() for r in records]}
            _atomic_write_json(self.bundles[scene_id].root / ANNOTATIONS_NAME, payload)
            history_index = sum(1 for r in records if r.object_id == object_id)
            return f"{object_id}#{history_index}"

    def store_qc_report(self, scene_id: str, report: QcBatchReport) -> None:
        with self._locks[scene_id]:
            path = self.bundles[scene_id].root / QC_REPORTS_NAME
            history = []
            if path.is_file():
                history = json.loads(path.read_text()).get("reports", [])
            history.append(report.to_dict())
            _atomic_write_json(path, {"v": 1, "reports": history})


# ---------------------------------------------------------------------------
# Rendering helpers
# ---------------------------------------------------------------------------


def cloud_payload(cloud: PointCloud, budget: int) -> dict:
    sampled = farthest_point_sample(cloud, budget)
    payload = {
        "count": len(sampled),
        "points": [[round(float(v), 6) for v in p] for p in sampled.points],
    }
    if sampled.has_colors:
        payload["colors"] = [[round(float(v), 6) for v in c] for c in sampled.colors]
    return payload


def render_thumbnail(cloud: PointCloud, size: int = THUMBNAIL_SIZE) -> str:
    """Orthographic front-view splat render, returned as base64 PNG."""
    from PIL import Image

    img = Image.new("RGB", (size, size), (245, 245, 245))
    if len(cloud) > 0:
        pts = cloud.points
        xs, zs = pts[:, 0], pts[:, 2]
        span = max(float(xs.max() - xs.min()), float(zs.max() - zs.min()), 1e-9)
        margin = 4
        scale = (size - 2 * margin) / span
        cx = (xs - (xs.min() + xs.max()) / 2.0) * scale + size / 2.0
        cy = size / 2.0 - (zs - (zs.min() + zs.max()) / 2.0) * scale
        if cloud.has_colors:
            rgb = (cloud.colors * 255.0).astype(np.uint8)
        else:
            depth = pts[:, 1]
            d = (depth - depth.min()) / max(float(depth.max() - depth.min()), 1e-9)
            grey = (80 + 120 * (1.0 - d)).astype(np.uint8)
            rgb = np.stack([grey, grey, grey], axis=1)
        px = img.load()
        order = np.argsort(pts[:, 1])[::-1]
        for i in order:
            x, y = int(cx[i]), int(cy[i])
            if 0 <= x < size and 0 <= y < size:
                px[x, y] = tuple(int(c) for c in rgb[i])
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


class TransformIn(BaseModel):
    translation: List[float] = Field(min_length=3, max_length=3)
    scale: float
    yaw_degrees: float


class AnnotationIn(BaseModel):
    v: int = 1
    best_asset_id: str
    transform: TransformIn
    ranking: List[str]
    annotator_id: str = ""
    timestamp: str = ""


class VerdictsIn(BaseModel):
    v: int = 1
    seed: int
    verdicts: Dict[str, bool]


def _not_found(what: str) -> JSONResponse:
    return JSONResponse(status_code=404, content={"v": 1, "error": f"{what} not found"})


def create_app(root: Union[str, Path]) -> FastAPI:
    state = ServiceState(root)
    app = FastAPI(title="scene annotation service")
    app.state.store = state

    @app.get("/scenes")
    def list_scenes():
        scenes = []
        for sid in sorted(state.bundles):
            bundle = state.bundles[sid]
            scenes.append(
                {
                    "scene_id": sid,
                    "object_count": len(bundle.objects),
                    "annotated_count": len(state.annotated_ids(sid)),
                }
            )
        return {"v": 1, "scenes": scenes}

    @app.get("/scenes/{scene_id}/objects")
    def scene_objects(scene_id: str):
        bundle = state.bundles.get(scene_id)
        if bundle is None:
            return _not_found(f"scene {scene_id!r}")
        annotated = set(state.annotated_ids(scene_id))
        objects = []
        for obj in sorted(bundle.objects, key=lambda o: o.object_id):
            objects.append(
                {
                    "object_id": obj.object_id,
                    "category": obj.category,
                    "candidate_count": len(obj.candidates),
                    "annotated": obj.object_id in annotated,
                }
            )
        return {"v": 1, "scene_id": scene_id, "objects": objects}

    @app.get("/objects/{object_id}")
    def object_view(object_id: str, n: int = DEFAULT_CLOUD_BUDGET):
        obj = state.object(object_id)
        if obj is None:
            return _not_found(f"object {object_id!r}")
        budget = max(1, min(int(n), MAX_CLOUD_BUDGET))
        return {
            "v": 1,
            "object_id": object_id,
            "scene_id": state.scene_of(object_id),
            "category": obj.category,
            "caption": obj.caption,
            "image": obj.image_path,
            "cloud": cloud_payload(obj.scan_cloud, budget),
        }

    @app.get("/objects/{object_id}/candidates")
    def object_candidates(object_id: str, n: int = DEFAULT_CLOUD_BUDGET):
        obj = state.object(object_id)
        if obj is None:
            return _not_found(f"object {object_id!r}")
        budget = max(1, min(int(n), MAX_CLOUD_BUDGET))
        candidates = []
        for cand in obj.candidates:
            candidates.append(
                {
                    "asset_id": cand.asset_id,
                    "provenance": cand.provenance,
                    "cloud": cloud_payload(cand.cloud, budget),
                    "thumbnail_png": render_thumbnail(cand.cloud),
                }
            )
        return {"v": 1, "object_id": object_id, "candidates": candidates}

    @app.post("/objects/{object_id}/annotation")
    def submit_annotation(object_id: str, body: AnnotationIn):
        obj = state.object(object_id)
        if obj is None:
            return _not_found(f"object {object_id!r}")
        try:
            transform = PoseTransform(
                translation=np.asarray(body.transform.translation, dtype=np.float64),
                scale=body.transform.scale,
                yaw=math.radians(body.transform.yaw_degrees),
            )
        except (PreconditionError, ValueError) as exc:
            return JSONResponse(status_code=422, content={"v": 1, "errors": {"transform": str(exc)}})
        record = AnnotationRecord(
            object_id=object_id,
            best_asset_id=body.best_asset_id,
            transform=transform,
            ranking=list(body.ranking),
            annotator_id=body.annotator_id,
            timestamp=body.timestamp,
        )
        errors = validate_annotation(record, [c.asset_id for c in obj.candidates])
        if errors:
            return JSONResponse(status_code=422, content={"v": 1, "errors": errors})
        record_id = state.submit(object_id, record)
        return {"v": 1, "record_id": record_id}

    @app.get("/qc/{batch_id}/sample")
    def qc_sample_endpoint(batch_id: str, seed: int = 0):
        if batch_id not in state.bundles:
            return _not_found(f"batch {batch_id!r}")
        batch = state.annotated_ids(batch_id)
        if not batch:
            return JSONResponse(
                status_code=409,
                content={"v": 1, "error": f"batch {batch_id!r} has no annotations to sample"},
            )
        sampled = qc_sample(batch, seed)
        return {
            "v": 1,
            "batch_id": batch_id,
            "seed": seed,
            "batch_size": len(batch),
            "sample_size": len(sampled),
            "sampled": sampled,
        }

    @app.post("/qc/{batch_id}/verdicts")
    def qc_verdicts(batch_id: str, body: VerdictsIn):
        if batch_id not in state.bundles:
            return _not_found(f"batch {batch_id!r}")
        batch = state.annotated_ids(batch_id)
        if not batch:
            return JSONResponse(
                status_code=409,
                content={"v": 1, "error": f"batch {batch_id!r} has no annotations to verify"},
            )
        try:
            report = qc_report(batch_id, batch, body.seed, body.verdicts)
        except PreconditionError as exc:
            return JSONResponse(status_code=422, content={"v": 1, "errors": {"verdicts": str(exc)}})
        state.store_qc_report(batch_id, report)
        return report.to_dict()

    @app.get("/export/training")
    def export_training():
        all_quads: List[dict] = []
        all_missing: List[str] = []
        for sid in sorted(state.bundles):
            quads, missing = training_quadruples(state.bundles[sid], state.records[sid])
            all_quads.extend(quads)
            all_missing.extend(missing)
        return {"v": 1, "quadruples": all_quads, "unannotated": sorted(all_missing)}

    return app


def serve(root: Union[str, Path], port: int = 8400, host: str = "127.0.0.1") -> None:
    """Run the annotation service until interrupted."""
    import uvicorn

    app = create_app(root)
    uvicorn.run(app, host=host, port=port, log_level="warning")
