"""Small builders shared across test modules."""

from __future__ import annotations

import numpy as np

from relloc.ingest import (
    AnchorEntity,
    AnchorRegistry,
    Detection,
    FrameRecord,
    FrameSlot,
    MovieBundle,
    Ontology,
    SubtitleCue,
)


def make_detection(feature, bbox=(0.0, 0.0, 10.0, 10.0)) -> Detection:
    return Detection(bbox=tuple(bbox), feature=np.asarray(feature, dtype=np.float64))


def make_frame(index: int, timestamp_s: float | None = None, detections=(), frame_feature=None) -> FrameRecord:
    return FrameRecord(
        slot=FrameSlot(index=index, timestamp_s=float(index) if timestamp_s is None else timestamp_s),
        frame_feature=None if frame_feature is None else np.asarray(frame_feature, dtype=np.float64),
        detections=list(detections),
    )


def make_registry(*id_feature_pairs, entity_type="person") -> AnchorRegistry:
    anchors = [
        AnchorEntity(
            entity_id=eid,
            name=eid.capitalize(),
            entity_type=entity_type,
            feature=np.asarray(feature, dtype=np.float64),
        )
        for eid, feature in id_feature_pairs
    ]
    dim = anchors[0].feature.shape[0]
    return AnchorRegistry(feature_dim=dim, anchors=anchors)


def make_bundle(
    registry: AnchorRegistry,
    frames: list[FrameRecord],
    cues: list[SubtitleCue] | None = None,
    relations=("friend_of", "rival_of"),
) -> MovieBundle:
    ontology = Ontology(relations=list(relations), entity_types=["person"])
    return MovieBundle(frames=frames, cues=cues or [], registry=registry, ontology=ontology)
