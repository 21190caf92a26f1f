"""Score sampled frames for relevance to one entity and keep the top K."""

from __future__ import annotations

from dataclasses import dataclass

from .backends import ScorerBackend
from .entity_id import AugmentedFrame
from .errors import InvalidConfigError, ScoringError
from .ingest import AnchorEntity, FrameSlot

FRAME_PROMPT = "Does the frame contain this entity?"


@dataclass(frozen=True)
class FrameScore:
    slot: FrameSlot
    score: float


@dataclass(frozen=True)
class SelectedFrame:
    slot: FrameSlot
    score: float
    rank: int  # 1-based, unique, contiguous


def score_frames(
    frames: list[AugmentedFrame], entity: AnchorEntity, backend: ScorerBackend
) -> list[FrameScore]:
    """One relevance score per frame, in input order.

    Backend failures abort the whole scoring pass (no partial results) and
    carry the slot index of the failing call.
    """
    if not frames:
        raise ScoringError("no frames to score")
    scores = []
    for frame in frames:
        try:
            raw = backend.frame_relevance(frame.slot.index, frame.augmented, entity, FRAME_PROMPT)
        except Exception as exc:
            raise ScoringError(
                f"frame scoring failed at slot {frame.slot.index} for entity "
                f"{entity.entity_id!r}: {exc}"
            ) from exc
        scores.append(FrameScore(slot=frame.slot, score=min(1.0, max(0.0, float(raw)))))
    return scores


def select_top_k(scores: list[FrameScore], k: int) -> list[SelectedFrame]:
    """The K highest-scoring frames, ties broken by earlier timestamp.

    Output is sorted by descending score then ascending timestamp and is
    all frames when fewer than K exist.
    """
    if k < 1:
        raise InvalidConfigError(f"top-K count must be >= 1, got {k}")
    ranked = sorted(scores, key=lambda fs: (-fs.score, fs.slot.timestamp_s))
    return [
        SelectedFrame(slot=fs.slot, score=fs.score, rank=i)
        for i, fs in enumerate(ranked[:k], start=1)
    ]
