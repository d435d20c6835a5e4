"""Candidate scoring, ranking, and the matching objectives.

Scores are plain dot products between a query embedding and each
candidate's embedding; the point-only score is an affine map whose
weights come from a file (training those weights is out of scope).
Losses come with closed-form gradients with respect to the fused scores.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import PreconditionError

EMBEDDING_MAGIC = b"EMB1"
NORMALIZATION_TOL = 1e-6

LossMode = str  # "logistic" | "softmax"


def _as_matrix(vectors: Sequence[np.ndarray]) -> np.ndarray:
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.ndim != 2:
        raise PreconditionError(f"expected a list of vectors, got shape {mat.shape}")
    if not np.isfinite(mat).all():
        raise PreconditionError("embeddings contain non-finite values")
    return mat


def is_normalized(vector: np.ndarray, tol: float = NORMALIZATION_TOL) -> bool:
    return abs(float(np.linalg.norm(vector)) - 1.0) <= tol


def normalize(vector: np.ndarray) -> np.ndarray:
    v = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise PreconditionError("cannot normalize a zero vector")
    return v / norm


@dataclass
class Candidate:
    asset_id: str
    embedding: np.ndarray
    cloud_ref: Optional[str] = None
    provenance: str = "unknown"


@dataclass
class CandidateSet:
    """The candidate pool for one scanned object, with optional query
    embeddings and optional ground-truth index."""

    object_id: str
    candidates: List[Candidate]
    image_query: Optional[np.ndarray] = None
    text_query: Optional[np.ndarray] = None
    truth_index: Optional[int] = None

    def __post_init__(self):
        if len(self.candidates) < 2:
            raise PreconditionError(
                f"{self.object_id}: candidate sets need L >= 2, got {len(self.candidates)}"
            )
        dims = {c.embedding.shape[-1] for c in self.candidates}
        for query in (self.image_query, self.text_query):
            if query is not None:
                dims.add(np.asarray(query).shape[-1])
        if len(dims) != 1:
            raise PreconditionError(f"{self.object_id}: embedding dimensions differ: {sorted(dims)}")
        if self.truth_index is not None and not (0 <= self.truth_index < len(self.candidates)):
            raise PreconditionError(
                f"{self.object_id}: truth_index {self.truth_index} out of range [0, {len(self.candidates)})"
            )

    def __len__(self) -> int:
        return len(self.candidates)

    def embedding_matrix(self) -> np.ndarray:
        return _as_matrix([c.embedding for c in self.candidates])

    def asset_ids(self) -> List[str]:
        return [c.asset_id for c in self.candidates]


@dataclass
class ScoreVector:
    """Per-modality score vectors of length L; absent modalities count as zero
    in the fused sum."""

    q_image: Optional[np.ndarray] = None
    q_text: Optional[np.ndarray] = None
    q_point: Optional[np.ndarray] = None

    def __post_init__(self):
        lengths = {len(v) for v in (self.q_image, self.q_text, self.q_point) if v is not None}
        if len(lengths) > 1:
            raise PreconditionError(f"score vectors have differing lengths: {sorted(lengths)}")
        if not lengths:
            raise PreconditionError("at least one modality score is required")

    @property
    def length(self) -> int:
        for v in (self.q_image, self.q_text, self.q_point):
            if v is not None:
                return len(v)
        raise AssertionError("unreachable")

    @property
    def fused(self) -> np.ndarray:
        total = np.zeros(self.length)
        for v in (self.q_image, self.q_text, self.q_point):
            if v is not None:
                total = total + np.asarray(v, dtype=np.float64)
        return total


@dataclass
class PointScorerWeights:
    """Affine scorer h -> w.h + b standing in for the trained point-cloud
    scoring head; weights are produced elsewhere and loaded from JSON."""

    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if not np.isfinite(w).all() or not np.isfinite(self.bias):
            raise PreconditionError("scorer weights must be finite")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @staticmethod
    def load(path: Union[str, Path]) -> "PointScorerWeights":
        data = json.loads(Path(path).read_text())
        w = np.asarray(data["weights"], dtype=np.float64)
        if "D" in data and int(data["D"]) != w.shape[0]:
            raise PreconditionError(f"scorer D={data['D']} does not match {w.shape[0]} weights")
        return PointScorerWeights(weights=w, bias=float(data.get("bias", 0.0)))

    def save(self, path: Union[str, Path]) -> None:
        payload = {"D": self.dim, "weights": self.weights.tolist(), "bias": float(self.bias)}
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def modality_scores(query: np.ndarray, candidates: Sequence[np.ndarray]) -> np.ndarray:
    """Dot product of the query against each candidate embedding.

    All vectors must be unit-normalized, so each score lies in [-1, 1]
    up to normalization tolerance.
    """
    q = np.asarray(query, dtype=np.float64)
    mat = _as_matrix(candidates)
    if mat.shape[1] != q.shape[-1]:
        raise PreconditionError(f"dimension mismatch: query {q.shape[-1]}, candidates {mat.shape[1]}")
    if not is_normalized(q):
        raise PreconditionError("query embedding is not unit-normalized")
    norms = np.linalg.norm(mat, axis=1)
    if (np.abs(norms - 1.0) > NORMALIZATION_TOL).any():
        raise PreconditionError("candidate embeddings are not unit-normalized")
    return mat @ q


def point_score(candidates: Sequence[np.ndarray], scorer: PointScorerWeights) -> np.ndarray:
    """Affine score per candidate embedding; zero weights give zero scores."""
    mat = _as_matrix(candidates)
    if mat.shape[1] != scorer.dim:
        raise PreconditionError(f"scorer dim {scorer.dim} does not match embeddings {mat.shape[1]}")
    return mat @ scorer.weights + scorer.bias


def score_candidates(cset: CandidateSet, scorer: Optional[PointScorerWeights] = None) -> ScoreVector:
    q_image = q_text = q_point = None
    mat = [c.embedding for c in cset.candidates]
    if cset.image_query is not None:
        q_image = modality_scores(cset.image_query, mat)
    if cset.text_query is not None:
        q_text = modality_scores(cset.text_query, mat)
    if scorer is not None:
        q_point = point_score(mat, scorer)
    if q_image is None and q_text is None and q_point is None:
        raise PreconditionError(f"{cset.object_id}: no scoring signal (image, text, or point scorer)")
    return ScoreVector(q_image=q_image, q_text=q_text, q_point=q_point)


def rank_candidates(
    cset: CandidateSet, scorer: Optional[PointScorerWeights] = None
) -> Tuple[List[str], ScoreVector]:
    """Candidate ids ordered by descending fused score; ties break toward the
    lower original candidate index."""
    scores = score_candidates(cset, scorer)
    fused = scores.fused
    order = np.lexsort((np.arange(len(fused)), -fused))
    ids = cset.asset_ids()
    return [ids[i] for i in order], scores


def _sigmoid(x: float) -> float:
    # Stable in both tails.
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def _log_sigmoid(x: float) -> float:
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


def matching_loss(
    scores: ScoreVector, truth_index: int, mode: LossMode = "logistic"
) -> Tuple[float, np.ndarray]:
    """Loss and gradient with respect to each fused score entry.

    Logistic mode (default): -log sigmoid(fused[truth]); the gradient is
    sigmoid(fused[truth]) - 1 at the truth index and zero elsewhere.
    Softmax mode treats the fused vector as logits over candidates.
    """
    fused = scores.fused
    if not (0 <= truth_index < len(fused)):
        raise PreconditionError(f"truth_index {truth_index} out of range [0, {len(fused)})")
    if mode == "logistic":
        s = float(fused[truth_index])
        loss = -_log_sigmoid(s)
        grad = np.zeros_like(fused)
        grad[truth_index] = _sigmoid(s) - 1.0
        return float(loss), grad
    if mode == "softmax":
        shifted = fused - fused.max()
        log_z = np.log(np.exp(shifted).sum())
        loss = -(shifted[truth_index] - log_z)
        grad = np.exp(shifted - log_z)
        grad[truth_index] -= 1.0
        return float(loss), grad
    raise PreconditionError(f"unknown loss mode {mode!r}")


def auxiliary_loss(
    scores: ScoreVector, truth_index: int, mode: LossMode = "logistic"
) -> Tuple[float, np.ndarray]:
    """Same objective restricted to the image and text scores; the point
    score is excluded by construction."""
    if scores.q_image is None or scores.q_text is None:
        raise PreconditionError("auxiliary loss requires both image and text scores")
    restricted = ScoreVector(q_image=scores.q_image, q_text=scores.q_text)
    return matching_loss(restricted, truth_index, mode=mode)


def total_objective(match_loss: float, aux_loss: float) -> float:
    return float(match_loss) + float(aux_loss)


def batch_loss(
    per_object: Sequence[Tuple[ScoreVector, int]], mode: LossMode = "logistic"
) -> Tuple[float, List[np.ndarray]]:
    """Mean matching loss over a batch, so magnitude is batch-size
    independent; gradients are scaled accordingly."""
    if not per_object:
        raise PreconditionError("empty batch")
    n = len(per_object)
    losses, grads = [], []
    for scores, truth in per_object:
        loss, grad = matching_loss(scores, truth, mode=mode)
        losses.append(loss)
        grads.append(grad / n)
    return float(np.mean(losses)), grads


def build_negative_set(
    cset: CandidateSet, pool: Sequence[Candidate], n: int, seed: int
) -> CandidateSet:
    """Truth candidate plus n candidates sampled without replacement from a
    cross-scene pool; deterministic for a given seed. Truth lands at index 0."""
    if cset.truth_index is None:
        raise PreconditionError(f"{cset.object_id}: no truth index to anchor the negative set")
    if n < 1:
        raise PreconditionError(f"need at least one negative, got n={n}")
    if len(pool) < n:
        raise PreconditionError(f"pool has {len(pool)} candidates, need {n}")
    own_ids = set(cset.asset_ids())
    for cand in pool:
        if cand.asset_id in own_ids:
            raise PreconditionError(f"pool candidate {cand.asset_id!r} overlaps the original set")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(pool), size=n, replace=False)
    truth = cset.candidates[cset.truth_index]
    members = [truth] + [pool[int(i)] for i in picks]
    return CandidateSet(
        object_id=cset.object_id,
        candidates=members,
        image_query=cset.image_query,
        text_query=cset.text_query,
        truth_index=0,
    )


# ---------------------------------------------------------------------------
# Embedding file format: {magic "EMB1", D: uint32, N: uint32} header then
# N x D float32 little-endian rows, with a JSON sidecar mapping row -> id.
# ---------------------------------------------------------------------------


def write_embeddings(path: Union[str, Path], ids: Sequence[str], matrix: np.ndarray) -> None:
    path = Path(path)
    mat = np.asarray(matrix, dtype=np.float32)
    if mat.ndim != 2:
        raise PreconditionError(f"embedding matrix must be 2D, got {mat.shape}")
    n, d = mat.shape
    if len(ids) != n:
        raise PreconditionError(f"{len(ids)} ids for {n} rows")
    with open(path, "wb") as f:
        f.write(EMBEDDING_MAGIC)
        f.write(struct.pack("<II", d, n))
        f.write(mat.astype("<f4").tobytes())
    sidecar = {"v": 1, "ids": list(ids)}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def read_embeddings(path: Union[str, Path]) -> Tuple[List[str], np.ndarray]:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != EMBEDDING_MAGIC:
            raise PreconditionError(f"{path}: bad magic {magic!r}")
        d, n = struct.unpack("<II", f.read(8))
        payload = f.read(4 * d * n)
    if len(payload) != 4 * d * n:
        raise PreconditionError(f"{path}: truncated payload")
    mat = np.frombuffer(payload, dtype="<f4").reshape(n, d).astype(np.float64)
    sidecar_path = Path(str(path) + ".json")
    if not sidecar_path.exists():
        raise PreconditionError(f"{path}: missing id sidecar {sidecar_path.name}")
    sidecar = json.loads(sidecar_path.read_text())
    ids = list(sidecar["ids"])
    if len(ids) != n:
        raise PreconditionError(f"{path}: sidecar has {len(ids)} ids for {n} rows")
    return ids, mat
