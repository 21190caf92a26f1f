import numpy as np
import pytest

from relloc.backends import FileScorerBackend, MockScorerBackend, MockTruth
from relloc.entity_id import PoolingWeights, augment_movie
from relloc.errors import InvalidConfigError, ScoringError
from relloc.frame_select import FrameScore, score_frames, select_top_k
from relloc.ingest import AnchorEntity, FrameSlot

from helpers import make_detection, make_frame, make_registry


def scored(*pairs):
    return [FrameScore(slot=FrameSlot(index=i, timestamp_s=float(t)), score=s) for i, (t, s) in enumerate(pairs)]


def registry_and_frames():
    registry = make_registry(("ruth", [1.0, 0.0]), ("carol", [0.0, 1.0]))
    frames = [make_frame(i) for i in range(5)]
    return registry, augment_movie(frames, registry, tau=0.5)


def entity(registry, eid):
    return registry.by_id[eid]


# ------------------------------------------------------------ score_frames

def test_presence_mock_scores_one_where_present():
    registry, frames = registry_and_frames()
    truth = MockTruth(presence={3: {"ruth"}})
    backend = MockScorerBackend(truth, ["ruth", "carol"], ["friend_of"])
    scores = score_frames(frames, entity(registry, "ruth"), backend)
    assert [s.score for s in scores] == [0.0, 0.0, 0.0, 1.0, 0.0]
    assert [s.slot.index for s in scores] == [0, 1, 2, 3, 4]


def test_absent_everywhere_scores_zero():
    registry, frames = registry_and_frames()
    backend = MockScorerBackend(MockTruth(), ["ruth", "carol"], [])
    scores = score_frames(frames, entity(registry, "carol"), backend)
    assert all(s.score == 0.0 for s in scores)


def test_file_backend_replays_exact_scores(tmp_path):
    import json

    registry, frames = registry_and_frames()
    records = [
        {"op": "frame", "frame_index": i, "entity": "ruth", "score": s}
        for i, s in enumerate([0.2, 0.9, 0.5, 0.1, 0.7])
    ]
    path = tmp_path / "scores.json"
    path.write_text(json.dumps({"records": records}))
    backend = FileScorerBackend.load(path)
    scores = score_frames(frames, entity(registry, "ruth"), backend)
    assert [s.score for s in scores] == [0.2, 0.9, 0.5, 0.1, 0.7]


def test_backend_failure_carries_slot_index():
    registry, frames = registry_and_frames()

    class Exploding:
        def frame_relevance(self, frame_index, frame_feature, entity, prompt):
            if frame_index == 2:
                raise RuntimeError("boom")
            return 0.5

    with pytest.raises(ScoringError, match="slot 2"):
        score_frames(frames, entity(registry, "ruth"), Exploding())


def test_engine_clamps_rogue_backend_scores():
    registry, frames = registry_and_frames()

    class Rogue:
        def frame_relevance(self, frame_index, frame_feature, entity, prompt):
            return 1.7 if frame_index % 2 == 0 else -0.4

    scores = score_frames(frames, entity(registry, "ruth"), Rogue())
    assert [s.score for s in scores] == [1.0, 0.0, 1.0, 0.0, 1.0]


def test_empty_frames_rejected():
    registry, _ = registry_and_frames()
    backend = MockScorerBackend(MockTruth(), ["ruth", "carol"], [])
    with pytest.raises(ScoringError):
        score_frames([], entity(registry, "ruth"), backend)


# ------------------------------------------------------------ select_top_k

def test_top_k_tie_breaks_by_earlier_timestamp():
    scores = scored((2.0, 0.9), (5.0, 0.9), (8.0, 0.4))
    picked = select_top_k(scores, 2)
    assert [(f.slot.timestamp_s, f.rank) for f in picked] == [(2.0, 1), (5.0, 2)]


def test_top_k_saturates():
    scores = scored((0.0, 0.1), (1.0, 0.9))
    assert len(select_top_k(scores, 10)) == 2


def test_top_k_single_frame():
    picked = select_top_k(scored((4.0, 0.3)), 1)
    assert [(f.slot.timestamp_s, f.score, f.rank) for f in picked] == [(4.0, 0.3, 1)]


def test_top_k_rejects_bad_k():
    with pytest.raises(InvalidConfigError):
        select_top_k(scored((0.0, 0.5)), 0)


def test_top_k_matches_sort_oracle_on_1000_randomized_lists():
    rng = np.random.default_rng(77)
    grid = [0.0, 0.25, 0.5, 0.75, 1.0]  # coarse grid forces plenty of ties
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        scores = [
            FrameScore(slot=FrameSlot(index=i, timestamp_s=float(i) * 0.5), score=grid[rng.integers(5)])
            for i in range(n)
        ]
        k = int(rng.integers(1, 35))
        picked = select_top_k(scores, k)
        expected = sorted(scores, key=lambda fs: (-fs.score, fs.slot.timestamp_s))[:k]
        assert [f.slot.index for f in picked] == [e.slot.index for e in expected]
        assert [f.rank for f in picked] == list(range(1, len(expected) + 1))
        # subset + threshold property: worst selected >= best unselected
        selected_ids = {f.slot.index for f in picked}
        unselected = [s.score for s in scores if s.slot.index not in selected_ids]
        if unselected and picked:
            assert min(f.score for f in picked) >= max(unselected)


def test_top_k_deterministic():
    rng = np.random.default_rng(3)
    scores = [
        FrameScore(slot=FrameSlot(index=i, timestamp_s=float(i)), score=float(rng.integers(0, 3)) / 2)
        for i in range(20)
    ]
    assert select_top_k(scores, 7) == select_top_k(list(scores), 7)


def test_top_k_monotone_in_score():
    """Raising a selected frame's score never evicts it."""
    rng = np.random.default_rng(13)
    for _ in range(200):
        n = int(rng.integers(2, 15))
        scores = [
            FrameScore(slot=FrameSlot(index=i, timestamp_s=float(i)), score=float(rng.integers(0, 5)) / 4)
            for i in range(n)
        ]
        k = int(rng.integers(1, n + 1))
        picked = select_top_k(scores, k)
        target = picked[int(rng.integers(len(picked)))].slot.index
        bumped = [
            FrameScore(slot=s.slot, score=min(1.0, s.score + 0.25)) if s.slot.index == target else s
            for s in scores
        ]
        assert target in {f.slot.index for f in select_top_k(bumped, k)}
