"""Query decomposition, pipeline orchestration and answer prediction.

A graph query is a set of (relation, argument) conditions with one blank
entity slot to fill. Each condition becomes a subquery anchored on a known
entity; per subquery the engine selects relevant frames, scores candidates
against the frames plus their subtitle context, and finally sums scores
across all subqueries. The candidate with the highest total wins, with
confidences normalized to sum to 100.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .backends import QUESTION_ENTITY_ID, ScorerBackend
from .entity_id import PoolingWeights, augment_movie
from .errors import (
    InvalidConfigError,
    ScoringError,
    UnanswerableQueryError,
    ValidationError,
)
from .frame_select import FrameScore, score_frames, select_top_k
from .ingest import AnchorEntity, MovieBundle
from .relation import ScoreTable, SubQuery, score_qa, score_relations, subtitle_window

BLANK = "<BLANK>"


@dataclass
class PipelineConfig:
    """Engine knobs; defaults are the documented ones (p=1, K=10, tau=0.5, W=15)."""

    sample_period_s: float = 1.0
    top_k: int = 10
    naming_threshold: float = 0.5
    subtitle_window_s: float = 15.0
    backend: str = "mock"

    def __post_init__(self):
        if self.sample_period_s <= 0:
            raise InvalidConfigError(f"sample_period_s must be > 0, got {self.sample_period_s}")
        if self.top_k < 1:
            raise InvalidConfigError(f"top_k must be >= 1, got {self.top_k}")
        if not -1.0 <= self.naming_threshold <= 1.0:
            raise InvalidConfigError(
                f"naming_threshold must lie in [-1, 1], got {self.naming_threshold}"
            )
        if self.subtitle_window_s <= 0:
            raise InvalidConfigError(
                f"subtitle_window_s must be > 0, got {self.subtitle_window_s}"
            )

    def to_dict(self) -> dict:
        return {
            "sample_period_s": self.sample_period_s,
            "top_k": self.top_k,
            "naming_threshold": self.naming_threshold,
            "subtitle_window_s": self.subtitle_window_s,
            "backend": self.backend,
        }


@dataclass(frozen=True)
class Condition:
    relation: str
    argument: str  # entity_id or BLANK


@dataclass
class GraphQuery:
    query_id: str
    conditions: list[Condition]
    blank_type: str

    def known_entities(self) -> list[str]:
        """Unique known arguments, in first-appearance order."""
        seen: list[str] = []
        for cond in self.conditions:
            if cond.argument != BLANK and cond.argument not in seen:
                seen.append(cond.argument)
        return seen


@dataclass
class RankedAnswer:
    query_id: str
    ranking: list[tuple[str, float]]  # (entity_id, confidence), non-increasing
    predicted: str

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "predicted": self.predicted,
            "ranking": [{"entity_id": e, "confidence": c} for e, c in self.ranking],
        }


@dataclass
class QaAnswer:
    query_id: str
    chosen_option: int
    option_confidences: list[float]

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "chosen_option": self.chosen_option,
            "option_confidences": self.option_confidences,
        }


def validate_query(query: GraphQuery, bundle: MovieBundle) -> None:
    if not query.conditions:
        raise UnanswerableQueryError(f"query {query.query_id!r} has no conditions")
    for cond in query.conditions:
        if cond.relation not in bundle.ontology.relations:
            raise ValidationError(
                f"query {query.query_id!r}: unknown relation {cond.relation!r}"
            )
        if cond.argument != BLANK and cond.argument not in bundle.registry.by_id:
            raise ValidationError(
                f"query {query.query_id!r}: unknown entity {cond.argument!r}"
            )
    if query.blank_type not in bundle.ontology.entity_types:
        raise ValidationError(
            f"query {query.query_id!r}: unknown blank_type {query.blank_type!r}"
        )
    if not query.known_entities():
        raise UnanswerableQueryError(
            f"query {query.query_id!r} has no known entity in any condition"
        )


def decompose(query: GraphQuery) -> list[SubQuery]:
    """One subquery per known-argument condition; blank-argument conditions
    pair their relation with every known entity of the query."""
    known = query.known_entities()
    if not known:
        raise UnanswerableQueryError(
            f"query {query.query_id!r} has no known entity in any condition"
        )
    subqueries: list[SubQuery] = []
    for cond in query.conditions:
        if cond.argument != BLANK:
            subqueries.append(SubQuery(known_entity=cond.argument, relation=cond.relation))
    for cond in query.conditions:
        if cond.argument == BLANK:
            subqueries.extend(
                SubQuery(known_entity=e, relation=cond.relation) for e in known
            )
    return subqueries


def aggregate(tables: Sequence[ScoreTable]) -> dict[str, float]:
    """Sum each candidate's scores over all tables and frames; candidates
    missing from a table contribute 0 there."""
    totals: dict[str, float] = {}
    for table in tables:
        for candidate in table.candidates:
            totals.setdefault(candidate, 0.0)
        for (candidate, _rank), score in table.entries.items():
            totals[candidate] = totals.get(candidate, 0.0) + score
    return totals


def predict(totals: Mapping[str, float], query_id: str = "") -> RankedAnswer:
    """Rank candidates by total score with confidences summing to 100.

    Zero total mass falls back to a uniform distribution; ties in the
    ranking break lexicographically by entity_id.
    """
    if not totals:
        raise ValidationError("cannot predict from an empty candidate set")
    mass = sum(totals.values())
    order = sorted(totals, key=lambda e: (-totals[e], e))
    if mass <= 0:
        confidence = {e: 100.0 / len(totals) for e in order}
    else:
        confidence = {e: 100.0 * totals[e] / mass for e in order}
    ranking = [(e, confidence[e]) for e in order]
    return RankedAnswer(query_id=query_id, ranking=ranking, predicted=order[0])


class Pipeline:
    """A movie prepared for answering: naming and pooling run once."""

    def __init__(
        self,
        bundle: MovieBundle,
        config: PipelineConfig,
        backend: ScorerBackend,
        weights: PoolingWeights | None = None,
    ):
        self.bundle = bundle
        self.config = config
        self.backend = backend
        self.augmented = augment_movie(
            bundle.frames, bundle.registry, config.naming_threshold, weights
        )
        self._feature_by_index = {af.slot.index: af.augmented for af in self.augmented}

    def _contexts_and_features(self, selected):
        contexts = [
            subtitle_window(self.bundle.cues, sf.slot.timestamp_s, self.config.subtitle_window_s)
            for sf in selected
        ]
        features = [self._feature_by_index[sf.slot.index] for sf in selected]
        return contexts, features

    def _run_subquery(self, subquery: SubQuery, blank_type: str) -> ScoreTable:
        entity = self.bundle.registry.by_id[subquery.known_entity]
        scores = score_frames(self.augmented, entity, self.backend)
        selected = select_top_k(scores, self.config.top_k)
        contexts, features = self._contexts_and_features(selected)
        candidates = self.bundle.registry.of_type(blank_type)
        return score_relations(selected, features, contexts, subquery, candidates, self.backend)

    def answer(self, query: GraphQuery) -> RankedAnswer:
        """Full pipeline for one graph query; deterministic given a
        deterministic backend."""
        validate_query(query, self.bundle)
        tables = []
        for subquery in decompose(query):
            try:
                tables.append(self._run_subquery(subquery, query.blank_type))
            except ScoringError as exc:
                raise ScoringError(
                    f"query {query.query_id!r}, subquery "
                    f"({subquery.known_entity}, {subquery.relation}): {exc}"
                ) from exc
        totals = aggregate(tables)
        if not totals:
            raise UnanswerableQueryError(
                f"query {query.query_id!r}: no candidate of type {query.blank_type!r}"
            )
        return predict(totals, query_id=query.query_id)

    def _qa_frame_scores(self, question: str) -> list[FrameScore]:
        mentioned = [
            a
            for a in self.bundle.registry.anchors
            if re.search(rf"(?<!\w){re.escape(a.name)}(?!\w)", question, re.IGNORECASE)
        ]
        if mentioned:
            per_entity = [score_frames(self.augmented, e, self.backend) for e in mentioned]
            return [
                FrameScore(slot=scores[0].slot, score=max(s.score for s in scores))
                for scores in zip(*per_entity)
            ]
        # No known entity in the question: score every frame with the question
        # text itself under a reserved pseudo-entity id.
        pseudo = AnchorEntity(
            entity_id=QUESTION_ENTITY_ID,
            name=question,
            entity_type="question",
            feature=np.zeros(self.bundle.feature_dim),
        )
        return score_frames(self.augmented, pseudo, self.backend)

    def answer_qa(self, query_id: str, question: str, options: list[str]) -> QaAnswer:
        """QA variant: same frame selection, per-option scoring instead of
        relation scoring. Ties pick the lowest option index."""
        if not options:
            raise ValidationError(f"query {query_id!r}: options must be non-empty")
        scores = self._qa_frame_scores(question)
        selected = select_top_k(scores, self.config.top_k)
        contexts, features = self._contexts_and_features(selected)
        per_frame = score_qa(selected, features, contexts, question, options, self.backend)
        totals = [0.0] * len(options)
        for frame_scores in per_frame:
            for qa_score in frame_scores:
                totals[qa_score.option_index] += qa_score.score
        mass = sum(totals)
        if mass <= 0:
            confidences = [100.0 / len(options)] * len(options)
        else:
            confidences = [100.0 * t / mass for t in totals]
        chosen = min(range(len(options)), key=lambda i: (-totals[i], i))
        return QaAnswer(query_id=query_id, chosen_option=chosen, option_confidences=confidences)


def answer_graph_query(
    bundle: MovieBundle,
    query: GraphQuery,
    config: PipelineConfig,
    backend: ScorerBackend,
    weights: PoolingWeights | None = None,
) -> RankedAnswer:
    return Pipeline(bundle, config, backend, weights).answer(query)


def answer_qa_query(
    bundle: MovieBundle,
    query_id: str,
    question: str,
    options: list[str],
    config: PipelineConfig,
    backend: ScorerBackend,
    weights: PoolingWeights | None = None,
) -> QaAnswer:
    return Pipeline(bundle, config, backend, weights).answer_qa(query_id, question, options)


def load_graph_queries(path: str | Path) -> list[GraphQuery]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    queries = []
    for raw in doc:
        try:
            queries.append(
                GraphQuery(
                    query_id=str(raw["query_id"]),
                    conditions=[
                        Condition(relation=str(c["relation"]), argument=str(c["argument"]))
                        for c in raw["conditions"]
                    ],
                    blank_type=str(raw["blank_type"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"query file {path}: bad record {raw!r}: {exc}") from exc
    return queries


@dataclass
class QaQuery:
    query_id: str
    question: str
    options: list[str]
    answer_index: int | None = None


def load_qa_queries(path: str | Path) -> list[QaQuery]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    queries = []
    for raw in doc:
        try:
            queries.append(
                QaQuery(
                    query_id=str(raw["query_id"]),
                    question=str(raw["question"]),
                    options=[str(o) for o in raw["options"]],
                    answer_index=raw.get("answer_index"),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"QA query file {path}: bad record {raw!r}: {exc}") from exc
    return queries
