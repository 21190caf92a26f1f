"""Scoring models behind the service endpoints.

A model maps (frame feature, text inputs) to probabilities in [0, 1]. The
builtin ``embedlex-v1`` model is fully deterministic: embedding affinity
against the configured anchor registry plus lexical evidence from the
subtitle context, squashed through a sigmoid as the stand-in for an
affirmative-answer likelihood. Heavier checkpoint-backed models plug in by
implementing the same three methods and registering a loader.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np


class ScoringModel(Protocol):
    model_id: str

    def score_frame(self, feature, entity_id, entity_name, entity_type, prompt) -> float: ...

    def score_relation(self, feature, context, subject, relation, candidate, prompt) -> float: ...

    def score_qa(self, feature, context, question, options) -> list[float]: ...


class ModelLoadError(RuntimeError):
    pass


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, float(value)))


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + np.exp(-x))


def _hash_unit(*parts: str) -> float:
    """Deterministic pseudo-score in [0, 1) from the given strings."""
    digest = hashlib.sha256("|".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _mentions(name: str, text: str) -> bool:
    if not name:
        return False
    return re.search(rf"(?<!\w){re.escape(name)}(?!\w)", text, re.IGNORECASE) is not None


def _tokens(text: str) -> set[str]:
    return set(re.findall(r"[\w']+", text.lower()))


@dataclass
class EmbedLexModel:
    """Deterministic embedding + lexical scorer.

    When an anchor registry is configured, frame relevance comes from the
    cosine between the frame feature and the entity's anchor embedding;
    otherwise from a hash-derived direction, so unknown entities still get
    stable scores. Relation and QA scores combine name mentions in the
    subtitle context, token overlap and a small hash term.
    """

    anchors: dict[str, tuple[str, np.ndarray]] = field(default_factory=dict)
    model_id: str = "embedlex-v1"

    _directions: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_anchor_file(cls, path: str | Path | None) -> "EmbedLexModel":
        if path is None:
            return cls()
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
            anchors = {
                str(a["entity_id"]): (str(a["name"]), np.asarray(a["feature"], dtype=np.float64))
                for a in doc["anchors"]
            }
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ModelLoadError(f"cannot load anchor registry {path}: {exc}") from exc
        return cls(anchors=anchors)

    def _direction(self, token: str, dim: int) -> np.ndarray:
        key = (token, dim)
        if key not in self._directions:
            seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "big")
            vec = np.random.default_rng(seed).standard_normal(dim)
            self._directions[key] = vec / np.linalg.norm(vec)
        return self._directions[key]

    def _affinity(self, feature: np.ndarray, entity_id: str) -> float:
        """Cosine against the entity's anchor, or its hash direction."""
        norm = np.linalg.norm(feature)
        if norm == 0:
            return 0.0
        if entity_id in self.anchors:
            _, anchor = self.anchors[entity_id]
            if anchor.shape == feature.shape and np.linalg.norm(anchor) > 0:
                return float(np.dot(feature, anchor) / (norm * np.linalg.norm(anchor)))
        return float(np.dot(feature, self._direction(entity_id, feature.shape[0])) / norm)

    def _display_name(self, entity_id: str) -> str:
        if entity_id in self.anchors:
            return self.anchors[entity_id][0]
        return entity_id

    def score_frame(self, feature, entity_id, entity_name, entity_type, prompt) -> float:
        affinity = self._affinity(np.asarray(feature, dtype=np.float64), entity_id)
        return _clamp01(_sigmoid(5.0 * affinity - 1.5))

    def score_relation(self, feature, context, subject, relation, candidate, prompt) -> float:
        feature = np.asarray(feature, dtype=np.float64)
        score = 0.45 * _mentions(self._display_name(candidate), context)
        score += 0.25 * _mentions(self._display_name(subject), context)
        score += 0.20 * max(0.0, self._affinity(feature, candidate))
        score += 0.10 * _hash_unit("rel", subject, relation, candidate)
        return _clamp01(score)

    def score_qa(self, feature, context, question, options) -> list[float]:
        context_tokens = _tokens(context)
        scores = []
        for index, option in enumerate(options):
            option_tokens = _tokens(option)
            overlap = (
                len(option_tokens & context_tokens) / len(option_tokens) if option_tokens else 0.0
            )
            score = 0.2 + 0.55 * overlap + 0.25 * _hash_unit("qa", question, str(index), option)
            scores.append(_clamp01(score))
        return scores


def load_model(model_id: str, anchors_path: str | Path | None) -> ScoringModel:
    """Resolve a model id to a loaded scorer.

    Checkpoint-backed scorers register here; only the builtin deterministic
    model ships with the adapter.
    """
    if model_id == "embedlex-v1":
        return EmbedLexModel.from_anchor_file(anchors_path)
    raise ModelLoadError(f"unknown model id {model_id!r}")
