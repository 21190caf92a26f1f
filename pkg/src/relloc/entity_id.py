"""Name detections against anchor embeddings and pool per-frame features.

Naming assigns each detection the anchor with the highest cosine
similarity, provided that similarity clears the naming threshold.
Pooling attends over the named entities of a frame and fuses the result
with the frame-level feature into one augmented vector per frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UndefinedSimilarityError, ValidationError
from .ingest import AnchorRegistry, Detection, FeatureVector, FrameRecord, FrameSlot


@dataclass
class NamedDetection:
    entity_id: str
    similarity: float
    detection: Detection


@dataclass
class PoolingWeights:
    """Projections used by attention pooling.

    ``attn_proj`` maps a d-vector to one attention logit; ``fuse_proj``
    maps the concatenated [frame ; pooled] 2d-vector back to d.
    """

    attn_proj: np.ndarray  # shape (d,)
    fuse_proj: np.ndarray  # shape (d, 2d)

    def __post_init__(self):
        self.attn_proj = np.asarray(self.attn_proj, dtype=np.float64)
        self.fuse_proj = np.asarray(self.fuse_proj, dtype=np.float64)
        d = self.attn_proj.shape[0]
        if self.attn_proj.ndim != 1:
            raise ValidationError("attn_proj must be a vector of length d")
        if self.fuse_proj.shape != (d, 2 * d):
            raise ValidationError(
                f"fuse_proj must have shape ({d}, {2 * d}), got {self.fuse_proj.shape}"
            )

    @property
    def dim(self) -> int:
        return self.attn_proj.shape[0]

    @classmethod
    def default(cls, d: int) -> "PoolingWeights":
        """Zero attention logits (uniform weights) and [I ; I] fusion
        (augmented = frame feature + pooled feature)."""
        eye = np.eye(d)
        return cls(attn_proj=np.zeros(d), fuse_proj=np.concatenate([eye, eye], axis=1))

    @classmethod
    def load(cls, path: str | Path) -> "PoolingWeights":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            weights = cls(
                attn_proj=np.asarray(doc["attn_proj"], dtype=np.float64),
                fuse_proj=np.asarray(doc["fuse_proj"], dtype=np.float64),
            )
        except KeyError as exc:
            raise ValidationError(f"weights file {path}: missing field {exc}") from exc
        declared = doc.get("feature_dim")
        if declared is not None and int(declared) != weights.dim:
            raise ValidationError(
                f"weights file {path}: declared dim {declared} != matrix dim {weights.dim}"
            )
        return weights


@dataclass
class AugmentedFrame:
    """Per-frame output of naming + pooling, consumed by the frame selector."""

    slot: FrameSlot
    named: list[NamedDetection]
    pooled: FeatureVector
    augmented: FeatureVector


def cosine_similarity(a: FeatureVector, b: FeatureVector) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise UndefinedSimilarityError("cosine similarity undefined for zero-norm vector")
    return float(np.dot(a, b) / (norm_a * norm_b))


def name_detections(
    frame: FrameRecord, anchors: AnchorRegistry, tau: float
) -> list[NamedDetection]:
    """Assign each detection the anchor maximizing cosine similarity.

    Detections whose best similarity falls below ``tau`` are dropped, as are
    zero-norm detections (their similarity is undefined). Ties go to the
    lexicographically smaller entity_id.
    """
    if not -1.0 <= tau <= 1.0:
        raise ValidationError(f"naming threshold must lie in [-1, 1], got {tau}")
    ordered = sorted(anchors.anchors, key=lambda a: a.entity_id)
    named: list[NamedDetection] = []
    for det in frame.detections:
        if np.linalg.norm(det.feature) == 0:
            continue
        best_id, best_sim = None, -np.inf
        for anchor in ordered:
            sim = cosine_similarity(anchor.feature, det.feature)
            if sim > best_sim:
                best_id, best_sim = anchor.entity_id, sim
        if best_id is not None and best_sim >= tau:
            named.append(NamedDetection(entity_id=best_id, similarity=best_sim, detection=det))
    return named


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    exp = np.exp(shifted)
    return exp / exp.sum()


def pool_and_augment(
    frame: FrameRecord, named: list[NamedDetection], weights: PoolingWeights
) -> AugmentedFrame:
    """Attention-pool the frame's named entity features and fuse with the
    frame-level feature.

    With no named entities the pooled vector is zero. A missing frame-level
    feature contributes a zero vector to the fusion.
    """
    d = weights.dim
    if named:
        stacked = np.stack([n.detection.feature for n in named])  # (n, d)
        if stacked.shape[1] != d:
            raise ValidationError(
                f"frame {frame.slot.index}: entity features have dim {stacked.shape[1]}, weights expect {d}"
            )
        attention = _softmax(stacked @ weights.attn_proj)
        pooled = attention @ stacked
    else:
        pooled = np.zeros(d)
    reference = frame.frame_feature if frame.frame_feature is not None else np.zeros(d)
    augmented = weights.fuse_proj @ np.concatenate([reference, pooled])
    return AugmentedFrame(slot=frame.slot, named=named, pooled=pooled, augmented=augmented)


def augment_movie(
    frames: list[FrameRecord], anchors: AnchorRegistry, tau: float, weights: PoolingWeights | None = None
) -> list[AugmentedFrame]:
    """Run naming + pooling over every frame, in frame order."""
    if weights is None:
        weights = PoolingWeights.default(anchors.feature_dim)
    return [pool_and_augment(f, name_detections(f, anchors, tau), weights) for f in frames]


def presence_from_naming(
    frames: list[FrameRecord], anchors: AnchorRegistry, tau: float
) -> dict[int, set[str]]:
    """Presence map as the engine sees it: entity ids named in each frame.

    Unlike ground-truth presence this degrades with feature noise, so it is
    the right presence source for robustness experiments.
    """
    return {
        f.slot.index: {n.entity_id for n in name_detections(f, anchors, tau)} for f in frames
    }
