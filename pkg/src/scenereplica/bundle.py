"""Scene bundle layout on disk, ingestion, and the inverse writer.

A bundle directory holds one scene:

    scene.json            manifest (ids, floor polygon, file references)
    clouds/*.ply          scan and candidate point clouds
    images/*.png          optional per-object crops
    embeddings/*.bin      candidate and query embeddings (+ .bin.json ids)
    annotations.json      optional human annotation records

Ingestion loads everything eagerly and checks every invariant up front,
so later stages never see a half-valid bundle. Failures carry a
machine-readable code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from .errors import (
    E_BAD_EMBEDDING,
    E_DIM,
    E_DUP_ID,
    E_FEW_CANDIDATES,
    E_MISSING_FILE,
    E_SCHEMA,
    IngestError,
    SceneReplicaError,
)
from .geometry import FloorPolygon, PointCloud
from .matching import Candidate, CandidateSet, read_embeddings, write_embeddings
from .plyio import read_ply, write_ply

MANIFEST_NAME = "scene.json"
ANNOTATIONS_NAME = "annotations.json"
QUERY_IMAGE_ID = "image"
QUERY_TEXT_ID = "text"


@dataclass
class BundleCandidate:
    asset_id: str
    cloud: PointCloud
    embedding: np.ndarray
    provenance: str = "unknown"


@dataclass
class BundleObject:
    object_id: str
    category: str
    scan_cloud: PointCloud
    candidates: List[BundleCandidate]
    caption: Optional[str] = None
    image_path: Optional[str] = None
    image_embedding: Optional[np.ndarray] = None
    text_embedding: Optional[np.ndarray] = None
    truth_asset_id: Optional[str] = None

    def candidate_by_id(self, asset_id: str) -> BundleCandidate:
        for cand in self.candidates:
            if cand.asset_id == asset_id:
                return cand
        raise KeyError(asset_id)

    def candidate_set(self) -> CandidateSet:
        truth_index = None
        if self.truth_asset_id is not None:
            truth_index = [c.asset_id for c in self.candidates].index(self.truth_asset_id)
        return CandidateSet(
            object_id=self.object_id,
            candidates=[
                Candidate(asset_id=c.asset_id, embedding=c.embedding, provenance=c.provenance)
                for c in self.candidates
            ],
            image_query=self.image_embedding,
            text_query=self.text_embedding,
            truth_index=truth_index,
        )


@dataclass
class SceneBundle:
    root: Path
    scene_id: str
    floor: FloorPolygon
    objects: List[BundleObject] = field(default_factory=list)
    annotations: List[dict] = field(default_factory=list)

    def by_id(self) -> Dict[str, BundleObject]:
        return {o.object_id: o for o in self.objects}


def _require(condition: bool, code: str, message: str) -> None:
    if not condition:
        raise IngestError(code, message)


def _load_cloud(root: Path, ref: object, context: str) -> PointCloud:
    _require(isinstance(ref, str) and bool(ref), E_SCHEMA, f"{context}: cloud reference must be a path string")
    path = root / ref
    _require(path.is_file(), E_MISSING_FILE, f"{context}: missing cloud file {ref}")
    try:
        return read_ply(path)
    except SceneReplicaError as exc:
        raise IngestError(E_SCHEMA, f"{context}: unreadable cloud {ref}: {exc}") from exc


def _load_embedding_file(root: Path, ref: object, context: str):
    _require(isinstance(ref, str) and bool(ref), E_SCHEMA, f"{context}: embedding reference must be a path string")
    path = root / ref
    _require(path.is_file(), E_MISSING_FILE, f"{context}: missing embedding file {ref}")
    _require(Path(str(path) + ".json").is_file(), E_MISSING_FILE, f"{context}: missing id sidecar {ref}.json")
    try:
        return read_embeddings(path)
    except SceneReplicaError as exc:
        raise IngestError(E_BAD_EMBEDDING, f"{context}: {exc}") from exc


def ingest(path: Union[str, Path]) -> SceneBundle:
    """Load and validate one bundle directory."""
    root = Path(path)
    _require(root.is_dir(), E_MISSING_FILE, f"bundle root {root} is not a directory")
    manifest_path = root / MANIFEST_NAME
    _require(manifest_path.is_file(), E_MISSING_FILE, f"no {MANIFEST_NAME} under {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise IngestError(E_SCHEMA, f"{MANIFEST_NAME} is not valid JSON: {exc}") from exc
    _require(isinstance(manifest, dict), E_SCHEMA, f"{MANIFEST_NAME} must hold a JSON object")

    scene_id = manifest.get("scene_id")
    _require(isinstance(scene_id, str) and bool(scene_id), E_SCHEMA, "manifest lacks a scene_id")
    floor_raw = manifest.get("floor_polygon")
    _require(isinstance(floor_raw, list) and len(floor_raw) >= 3, E_SCHEMA, f"{scene_id}: floor_polygon missing or too short")
    try:
        floor = FloorPolygon.from_list(floor_raw)
    except SceneReplicaError as exc:
        raise IngestError(E_SCHEMA, f"{scene_id}: bad floor polygon: {exc}") from exc

    objects_raw = manifest.get("objects")
    _require(isinstance(objects_raw, list), E_SCHEMA, f"{scene_id}: manifest lacks an object list")

    seen_ids = set()
    objects: List[BundleObject] = []
    for entry in objects_raw:
        _require(isinstance(entry, dict), E_SCHEMA, f"{scene_id}: object entries must be JSON objects")
        object_id = entry.get("id")
        _require(isinstance(object_id, str) and bool(object_id), E_SCHEMA, f"{scene_id}: object without an id")
        _require(object_id not in seen_ids, E_DUP_ID, f"{scene_id}: duplicate object id {object_id!r}")
        seen_ids.add(object_id)
        context = f"{scene_id}/{object_id}"

        scan_cloud = _load_cloud(root, entry.get("scan_cloud"), context)

        cands_raw = entry.get("candidates")
        _require(isinstance(cands_raw, list), E_SCHEMA, f"{context}: missing candidate list")
        _require(len(cands_raw) >= 2, E_FEW_CANDIDATES, f"{context}: {len(cands_raw)} candidates, need at least 2")

        emb_ids, emb_mat = _load_embedding_file(root, entry.get("candidate_embeddings"), context)
        _require(
            len(emb_ids) == len(cands_raw),
            E_BAD_EMBEDDING,
            f"{context}: {len(emb_ids)} embedding rows for {len(cands_raw)} candidates",
        )

        cand_ids = set()
        candidates: List[BundleCandidate] = []
        for row, cand_raw in enumerate(cands_raw):
            _require(isinstance(cand_raw, dict), E_SCHEMA, f"{context}: candidate entries must be JSON objects")
            asset_id = cand_raw.get("asset_id")
            _require(isinstance(asset_id, str) and bool(asset_id), E_SCHEMA, f"{context}: candidate without asset_id")
            _require(asset_id not in cand_ids, E_DUP_ID, f"{context}: duplicate candidate {asset_id!r}")
            cand_ids.add(asset_id)
            _require(
                emb_ids[row] == asset_id,
                E_BAD_EMBEDDING,
                f"{context}: embedding row {row} is for {emb_ids[row]!r}, expected {asset_id!r}",
            )
            cloud = _load_cloud(root, cand_raw.get("cloud"), f"{context}/{asset_id}")
            candidates.append(
                BundleCandidate(
                    asset_id=asset_id,
                    cloud=cloud,
                    embedding=emb_mat[row],
                    provenance=str(cand_raw.get("provenance", "unknown")),
                )
            )

        image_embedding = text_embedding = None
        query_ref = entry.get("query_embeddings")
        if query_ref is not None:
            q_ids, q_mat = _load_embedding_file(root, query_ref, context)
            _require(
                set(q_ids) <= {QUERY_IMAGE_ID, QUERY_TEXT_ID},
                E_BAD_EMBEDDING,
                f"{context}: query embedding ids must be subset of ['image', 'text'], got {q_ids}",
            )
            _require(
                q_mat.shape[1] == emb_mat.shape[1],
                E_DIM,
                f"{context}: query dim {q_mat.shape[1]} != candidate dim {emb_mat.shape[1]}",
            )
            for qid, row in zip(q_ids, q_mat):
                if qid == QUERY_IMAGE_ID:
                    image_embedding = row
                else:
                    text_embedding = row

        image_path = entry.get("image")
        if image_path is not None:
            _require(isinstance(image_path, str), E_SCHEMA, f"{context}: image must be a path string")
            _require((root / image_path).is_file(), E_MISSING_FILE, f"{context}: missing image {image_path}")

        caption = entry.get("caption")
        if caption is not None:
            _require(isinstance(caption, str), E_SCHEMA, f"{context}: caption must be a string")

        truth = entry.get("truth_asset_id")
        if truth is not None:
            _require(truth in cand_ids, E_SCHEMA, f"{context}: truth asset {truth!r} not among candidates")

        objects.append(
            BundleObject(
                object_id=object_id,
                category=str(entry.get("category", "object")),
                scan_cloud=scan_cloud,
                candidates=candidates,
                caption=caption,
                image_path=image_path,
                image_embedding=image_embedding,
                text_embedding=text_embedding,
                truth_asset_id=truth,
            )
        )

    annotations: List[dict] = []
    ann_path = root / ANNOTATIONS_NAME
    if ann_path.is_file():
        try:
            ann_data = json.loads(ann_path.read_text())
        except json.JSONDecodeError as exc:
            raise IngestError(E_SCHEMA, f"{ANNOTATIONS_NAME} is not valid JSON: {exc}") from exc
        _require(
            isinstance(ann_data, dict) and isinstance(ann_data.get("records"), list),
            E_SCHEMA,
            f"{ANNOTATIONS_NAME} must hold an object with a records list",
        )
        annotations = list(ann_data["records"])

    return SceneBundle(root=root, scene_id=scene_id, floor=floor, objects=objects, annotations=annotations)


def write_bundle(bundle: SceneBundle, root: Union[str, Path]) -> Path:
    """Write an in-memory bundle as a fresh directory; inverse of ingest."""
    root = Path(root)
    (root / "clouds").mkdir(parents=True, exist_ok=True)
    (root / "embeddings").mkdir(exist_ok=True)

    entries = []
    for obj in bundle.objects:
        scan_ref = f"clouds/{obj.object_id}_scan.ply"
        write_ply(obj.scan_cloud, root / scan_ref)

        emb_ref = f"embeddings/{obj.object_id}_candidates.bin"
        write_embeddings(
            root / emb_ref,
            [c.asset_id for c in obj.candidates],
            np.stack([c.embedding for c in obj.candidates]),
        )

        cand_entries = []
        for cand in obj.candidates:
            cloud_ref = f"clouds/{obj.object_id}_{cand.asset_id}.ply"
            write_ply(cand.cloud, root / cloud_ref)
            cand_entries.append({"asset_id": cand.asset_id, "cloud": cloud_ref, "provenance": cand.provenance})

        entry = {
            "id": obj.object_id,
            "category": obj.category,
            "scan_cloud": scan_ref,
            "candidates": cand_entries,
            "candidate_embeddings": emb_ref,
        }
        if obj.image_embedding is not None or obj.text_embedding is not None:
            q_ids, q_rows = [], []
            if obj.image_embedding is not None:
                q_ids.append(QUERY_IMAGE_ID)
                q_rows.append(obj.image_embedding)
            if obj.text_embedding is not None:
                q_ids.append(QUERY_TEXT_ID)
                q_rows.append(obj.text_embedding)
            q_ref = f"embeddings/{obj.object_id}_queries.bin"
            write_embeddings(root / q_ref, q_ids, np.stack(q_rows))
            entry["query_embeddings"] = q_ref
        if obj.caption is not None:
            entry["caption"] = obj.caption
        if obj.image_path is not None:
            entry["image"] = obj.image_path
        if obj.truth_asset_id is not None:
            entry["truth_asset_id"] = obj.truth_asset_id
        entries.append(entry)

    manifest = {
        "v": 1,
        "scene_id": bundle.scene_id,
        "floor_polygon": bundle.floor.to_list(),
        "objects": entries,
    }
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if bundle.annotations:
        payload = {"v": 1, "records": bundle.annotations}
        (root / ANNOTATIONS_NAME).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return root
