import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from relloc.entity_id import (
    PoolingWeights,
    cosine_similarity,
    name_detections,
    pool_and_augment,
    presence_from_naming,
)
from relloc.errors import UndefinedSimilarityError, ValidationError

from helpers import make_detection, make_frame, make_registry


# ------------------------------------------------------------------ cosine

def test_cosine_identity():
    assert cosine_similarity([1, 0], [1, 0]) == pytest.approx(1.0)


def test_cosine_orthogonal():
    assert cosine_similarity([1, 0], [0, 1]) == pytest.approx(0.0)


def test_cosine_45_degrees():
    # dot = 1, norms 1 and sqrt(2) -> 1/sqrt(2)
    assert cosine_similarity([1, 0], [1, 1]) == pytest.approx(0.7071067812, abs=1e-9)


def test_cosine_rejects_zero_norm():
    with pytest.raises(UndefinedSimilarityError):
        cosine_similarity([0, 0], [1, 0])


def test_cosine_rejects_dim_mismatch():
    with pytest.raises(ValidationError):
        cosine_similarity([1, 0], [1, 0, 0])


finite_vectors = arrays(
    np.float64,
    st.integers(min_value=2, max_value=8),
    elements=st.floats(min_value=-100, max_value=100, allow_nan=False),
).filter(lambda v: np.linalg.norm(v) > 1e-6)


@given(
    scale=st.floats(min_value=1e-3, max_value=1e3),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_cosine_scale_invariance_and_bounds(scale, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(6)
    b = rng.standard_normal(6)
    base = cosine_similarity(a, b)
    assert -1.0 - 1e-12 <= base <= 1.0 + 1e-12
    assert cosine_similarity(scale * a, b) == pytest.approx(base, abs=1e-9)
    assert cosine_similarity(a, scale * b) == pytest.approx(base, abs=1e-9)


# ------------------------------------------------------------------ naming

def two_anchor_registry():
    return make_registry(("artemis", [1.0, 0.0]), ("boreas", [0.0, 1.0]))


def test_naming_identity_match():
    registry = make_registry(("ruth", [0.6, 0.8]), ("carol", [1.0, 0.0]))
    frame = make_frame(0, detections=[make_detection([0.6, 0.8])])
    named = name_detections(frame, registry, tau=0.5)
    assert len(named) == 1
    assert named[0].entity_id == "ruth"
    assert named[0].similarity == pytest.approx(1.0)


def test_naming_drops_below_threshold():
    registry = two_anchor_registry()
    # 45 degrees from both anchors: similarity ~0.707; with tau=0.8 dropped
    frame = make_frame(0, detections=[make_detection([1.0, 1.0])])
    assert name_detections(frame, registry, tau=0.8) == []


def test_naming_argmax_over_anchors():
    registry = two_anchor_registry()
    frame = make_frame(0, detections=[make_detection([0.9, 0.1])])
    named = name_detections(frame, registry, tau=0.5)
    assert [n.entity_id for n in named] == ["artemis"]
    # brute force: 0.9/sqrt(0.81+0.01) vs 0.1/sqrt(0.82)
    assert named[0].similarity == pytest.approx(0.9 / math.sqrt(0.82), abs=1e-12)


def test_naming_tie_breaks_to_smaller_id():
    registry = make_registry(("zeta", [1.0, 0.0]), ("alpha", [1.0, 0.0]))
    frame = make_frame(0, detections=[make_detection([2.0, 0.0])])
    named = name_detections(frame, registry, tau=0.0)
    assert named[0].entity_id == "alpha"


def test_naming_skips_zero_norm_detection():
    registry = two_anchor_registry()
    frame = make_frame(0, detections=[make_detection([0.0, 0.0]), make_detection([1.0, 0.0])])
    named = name_detections(frame, registry, tau=0.0)
    assert [n.entity_id for n in named] == ["artemis"]


def test_naming_rejects_bad_threshold():
    registry = two_anchor_registry()
    with pytest.raises(ValidationError):
        name_detections(make_frame(0), registry, tau=1.5)


def test_naming_matches_exhaustive_comparison():
    """Assignment equals brute-force argmax over all anchors, 50 random frames."""
    rng = np.random.default_rng(11)
    dim = 6
    registry = make_registry(
        *((f"a{i}", v / np.linalg.norm(v)) for i, v in enumerate(rng.standard_normal((5, dim))))
    )
    for _ in range(50):
        dets = [make_detection(rng.standard_normal(dim)) for _ in range(rng.integers(0, 4))]
        frame = make_frame(0, detections=dets)
        tau = float(rng.uniform(-0.2, 0.6))
        named = name_detections(frame, registry, tau)
        expected = []
        for det in dets:
            sims = {
                a.entity_id: float(
                    np.dot(a.feature, det.feature)
                    / (np.linalg.norm(a.feature) * np.linalg.norm(det.feature))
                )
                for a in registry.anchors
            }
            best = max(sims.values())
            if best >= tau:
                winner = min(e for e, s in sims.items() if s == best)
                expected.append((winner, best))
        assert [(n.entity_id, pytest.approx(n.similarity)) for n in named] == expected


def test_naming_scale_invariance():
    rng = np.random.default_rng(5)
    dim = 4
    registry = make_registry(*((f"a{i}", rng.standard_normal(dim)) for i in range(4)))
    dets = [make_detection(rng.standard_normal(dim)) for _ in range(3)]
    base = name_detections(make_frame(0, detections=dets), registry, tau=0.1)
    scaled_dets = [make_detection(7.3 * d.feature) for d in dets]
    scaled = name_detections(make_frame(0, detections=scaled_dets), registry, tau=0.1)
    assert [n.entity_id for n in base] == [n.entity_id for n in scaled]


# ----------------------------------------------------------------- pooling

def pooling_oracle(features, ref, attn_proj, fuse_proj):
    """Independent dense-algebra implementation with explicit loops."""
    n = len(features)
    d = len(attn_proj)
    if n:
        logits = [sum(features[i][k] * attn_proj[k] for k in range(d)) for i in range(n)]
        peak = max(logits)
        exps = [math.exp(l - peak) for l in logits]
        total = sum(exps)
        alpha = [e / total for e in exps]
        pooled = [sum(alpha[i] * features[i][k] for i in range(n)) for k in range(d)]
    else:
        pooled = [0.0] * d
    concat = list(ref) + pooled
    augmented = [sum(fuse_proj[r][c] * concat[c] for c in range(2 * d)) for r in range(d)]
    return pooled, augmented


def named_for(registry, frame, tau=0.0):
    return name_detections(frame, registry, tau)


def test_pool_singleton_is_identity():
    registry = make_registry(("a", [3.0, 4.0]))
    frame = make_frame(0, detections=[make_detection([3.0, 4.0])])
    named = named_for(registry, frame)
    out = pool_and_augment(frame, named, PoolingWeights.default(2))
    assert np.allclose(out.pooled, [3.0, 4.0])


def test_pool_uniform_attention_means_mean():
    registry = make_registry(("a", [1.0, 0.0]), ("b", [0.0, 1.0]))
    frame = make_frame(0, detections=[make_detection([1.0, 0.0]), make_detection([0.0, 1.0])])
    out = pool_and_augment(frame, named_for(registry, frame), PoolingWeights.default(2))
    assert np.allclose(out.pooled, [0.5, 0.5])


def test_pool_no_named_entities_gives_zero_vector():
    frame = make_frame(0, frame_feature=[1.0, 2.0])
    out = pool_and_augment(frame, [], PoolingWeights.default(2))
    assert np.array_equal(out.pooled, np.zeros(2))
    # default fusion: augmented = frame_feature + pooled
    assert np.allclose(out.augmented, [1.0, 2.0])


def test_default_fusion_sums_frame_and_pooled():
    registry = make_registry(("a", [2.0, 0.0]))
    frame = make_frame(0, detections=[make_detection([2.0, 0.0])], frame_feature=[1.0, 1.0])
    out = pool_and_augment(frame, named_for(registry, frame), PoolingWeights.default(2))
    assert np.allclose(out.augmented, [3.0, 1.0])


def test_pool_matches_dense_oracle_on_randomized_cases():
    rng = np.random.default_rng(23)
    dim = 4
    for _ in range(100):
        n = int(rng.integers(0, 5))
        registry = make_registry(*((f"a{i}", rng.standard_normal(dim)) for i in range(max(n, 1))))
        dets = [make_detection(rng.standard_normal(dim)) for _ in range(n)]
        ref = rng.standard_normal(dim) if rng.random() < 0.7 else None
        frame = make_frame(0, detections=dets, frame_feature=ref)
        weights = PoolingWeights(
            attn_proj=rng.standard_normal(dim), fuse_proj=rng.standard_normal((dim, 2 * dim))
        )
        named = named_for(registry, frame, tau=-1.0)
        out = pool_and_augment(frame, named, weights)
        exp_pooled, exp_aug = pooling_oracle(
            [n.detection.feature for n in named],
            ref if ref is not None else np.zeros(dim),
            weights.attn_proj,
            weights.fuse_proj,
        )
        assert np.allclose(out.pooled, exp_pooled, atol=1e-9)
        assert np.allclose(out.augmented, exp_aug, atol=1e-9)


@settings(max_examples=100)
@given(seed=st.integers(min_value=0, max_value=100_000))
def test_attention_is_simplex_and_pool_in_hull(seed):
    rng = np.random.default_rng(seed)
    dim = 5
    n = int(rng.integers(1, 6))
    registry = make_registry(*((f"a{i}", rng.standard_normal(dim)) for i in range(n)))
    dets = [make_detection(rng.standard_normal(dim)) for _ in range(n)]
    frame = make_frame(0, detections=dets)
    weights = PoolingWeights(
        attn_proj=rng.standard_normal(dim), fuse_proj=rng.standard_normal((dim, 2 * dim))
    )
    named = named_for(registry, frame, tau=-1.0)
    stacked = np.stack([nd.detection.feature for nd in named])
    logits = stacked @ weights.attn_proj
    alpha = np.exp(logits - logits.max())
    alpha /= alpha.sum()
    assert np.all(alpha >= 0)
    assert abs(alpha.sum() - 1.0) <= 1e-9
    out = pool_and_augment(frame, named, weights)
    lo = stacked.min(axis=0) - 1e-9
    hi = stacked.max(axis=0) + 1e-9
    assert np.all(out.pooled >= lo) and np.all(out.pooled <= hi)


def test_weights_file_round_trip(tmp_path):
    import json

    doc = {
        "feature_dim": 2,
        "attn_proj": [0.5, -1.0],
        "fuse_proj": [[1, 0, 0, 0], [0, 1, 0, 0]],
    }
    path = tmp_path / "weights.json"
    path.write_text(json.dumps(doc))
    weights = PoolingWeights.load(path)
    assert weights.dim == 2
    assert np.allclose(weights.attn_proj, [0.5, -1.0])


def test_weights_rejects_bad_shape():
    with pytest.raises(ValidationError):
        PoolingWeights(attn_proj=np.zeros(3), fuse_proj=np.zeros((3, 5)))


def test_weights_rejects_dim_conflict(tmp_path):
    import json

    doc = {"feature_dim": 4, "attn_proj": [0.0, 0.0], "fuse_proj": [[0] * 4] * 2}
    path = tmp_path / "weights.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        PoolingWeights.load(path)


def test_presence_from_naming_tracks_clean_detections():
    registry = make_registry(("ava", [1.0, 0.0]), ("ben", [0.0, 1.0]))
    frames = [
        make_frame(0, detections=[make_detection([1.0, 0.0])]),
        make_frame(1, detections=[make_detection([0.0, 1.0]), make_detection([1.0, 0.0])]),
        make_frame(2),
    ]
    presence = presence_from_naming(frames, registry, tau=0.5)
    assert presence == {0: {"ava"}, 1: {"ava", "ben"}, 2: set()}
