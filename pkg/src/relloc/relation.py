"""Subtitle context retrieval and relation / QA scoring over selected frames."""

from __future__ import annotations

from dataclasses import dataclass, field

from .backends import ScorerBackend
from .errors import InvalidConfigError, ScoringError, ValidationError
from .frame_select import SelectedFrame
from .ingest import AnchorEntity, FeatureVector, SubtitleCue

RELATION_PROMPT = "Do other entities in the frame have this relation with this entity?"
QA_PROMPT = "Which option best answers the question about this scene?"


@dataclass(frozen=True)
class SubQuery:
    """One decomposed condition: a known entity and the relation to probe."""

    known_entity: str
    relation: str


@dataclass(frozen=True)
class ContextWindow:
    """Subtitle text overlapping [timestamp - W, timestamp + W] (closed)."""

    timestamp_s: float
    window_start_s: float
    window_end_s: float
    text: str


@dataclass
class ScoreTable:
    """Relation scores for one subquery: (candidate id, frame rank) -> score."""

    subquery: SubQuery
    candidates: list[str]
    entries: dict[tuple[str, int], float] = field(default_factory=dict)


@dataclass(frozen=True)
class QaScore:
    option_index: int
    score: float


def subtitle_window(cues: list[SubtitleCue], timestamp_s: float, window_s: float) -> ContextWindow:
    """Every cue whose [start, end] interval overlaps the closed window
    around the timestamp, joined in start-time order with single spaces."""
    if window_s <= 0:
        raise InvalidConfigError(f"subtitle window width must be > 0, got {window_s}")
    start = max(0.0, timestamp_s - window_s)
    end = timestamp_s + window_s
    hits = [c for c in cues if c.start_s <= end and c.end_s >= start]
    hits.sort(key=lambda c: c.start_s)  # stable: file order wins on equal starts
    return ContextWindow(
        timestamp_s=timestamp_s,
        window_start_s=start,
        window_end_s=end,
        text=" ".join(c.text for c in hits),
    )


def score_relations(
    selected: list[SelectedFrame],
    features: list[FeatureVector],
    contexts: list[ContextWindow],
    subquery: SubQuery,
    candidates: list[AnchorEntity],
    backend: ScorerBackend,
) -> ScoreTable:
    """One backend relation score per (candidate, selected frame) pair.

    ``features`` and ``contexts`` are aligned 1:1 with ``selected`` (the
    frames' augmented features and their subtitle windows). The subquery's
    known entity is never scored as a candidate.
    """
    if not (len(selected) == len(features) == len(contexts)):
        raise ValidationError(
            f"selected/features/contexts must align: {len(selected)}/{len(features)}/{len(contexts)}"
        )
    eligible = sorted(
        (c for c in candidates if c.entity_id != subquery.known_entity),
        key=lambda c: c.entity_id,
    )
    table = ScoreTable(subquery=subquery, candidates=[c.entity_id for c in eligible])
    for candidate in eligible:
        for frame, feature, context in zip(selected, features, contexts):
            try:
                raw = backend.relation_affinity(
                    frame.slot.index,
                    feature,
                    context.text,
                    subquery.known_entity,
                    subquery.relation,
                    candidate.entity_id,
                    RELATION_PROMPT,
                )
            except Exception as exc:
                raise ScoringError(
                    f"relation scoring failed for candidate {candidate.entity_id!r} "
                    f"at frame rank {frame.rank} (slot {frame.slot.index}): {exc}"
                ) from exc
            table.entries[(candidate.entity_id, frame.rank)] = min(1.0, max(0.0, float(raw)))
    return table


def score_qa(
    selected: list[SelectedFrame],
    features: list[FeatureVector],
    contexts: list[ContextWindow],
    question: str,
    options: list[str],
    backend: ScorerBackend,
) -> list[list[QaScore]]:
    """Per selected frame, one score per option, in (frame, option) order."""
    if not options:
        raise ValidationError("QA scoring needs at least one option")
    if not (len(selected) == len(features) == len(contexts)):
        raise ValidationError(
            f"selected/features/contexts must align: {len(selected)}/{len(features)}/{len(contexts)}"
        )
    per_frame: list[list[QaScore]] = []
    for frame, feature, context in zip(selected, features, contexts):
        try:
            raw = backend.qa_affinity(frame.slot.index, feature, context.text, question, list(options))
        except Exception as exc:
            raise ScoringError(
                f"QA scoring failed at frame rank {frame.rank} (slot {frame.slot.index}): {exc}"
            ) from exc
        if len(raw) != len(options):
            raise ScoringError(
                f"backend returned {len(raw)} scores for {len(options)} options at "
                f"frame rank {frame.rank}"
            )
        per_frame.append(
            [QaScore(option_index=i, score=min(1.0, max(0.0, float(s)))) for i, s in enumerate(raw)]
        )
    return per_frame
