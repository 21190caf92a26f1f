"""Input loading and validation: schedules, subtitles, features, anchors, ontology.

File formats (all numbers decimal, features as JSON arrays of reals):

* feature records -- one JSON object per line:
  ``{"frame_index": 0, "timestamp_s": 0.0, "frame_feature": [...]|null,
  "detections": [{"bbox": [x0, y0, x1, y1], "feature": [...]}]}``
* anchor registry -- single JSON document:
  ``{"feature_dim": d, "anchors": [{"entity_id", "name", "entity_type",
  "feature"}]}``
* ontology -- ``{"relations": [...], "entity_types": [...]}``
* subtitles -- SubRip (.srt), ``HH:MM:SS,mmm --> HH:MM:SS,mmm`` timestamps.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError, SrtParseError, ValidationError

FeatureVector = np.ndarray


@dataclass(frozen=True)
class FrameSlot:
    """One position in the uniform sampling schedule."""

    index: int
    timestamp_s: float


@dataclass(frozen=True)
class SubtitleCue:
    ordinal: int
    start_s: float
    end_s: float
    text: str


@dataclass
class Detection:
    """One detector box with its embedding; produced upstream of the engine."""

    bbox: tuple[float, float, float, float]
    feature: FeatureVector


@dataclass
class FrameRecord:
    slot: FrameSlot
    frame_feature: FeatureVector | None
    detections: list[Detection]


@dataclass
class AnchorEntity:
    """A reference entity with known name, type and embedding."""

    entity_id: str
    name: str
    entity_type: str
    feature: FeatureVector


@dataclass
class Ontology:
    relations: list[str]
    entity_types: list[str]

    def __post_init__(self):
        for kind, names in (("relation", self.relations), ("entity_type", self.entity_types)):
            if len(set(names)) != len(names):
                raise ValidationError(f"duplicate {kind} names in ontology")
            if any(not n for n in names):
                raise ValidationError(f"empty {kind} name in ontology")


@dataclass
class AnchorRegistry:
    """All anchor entities of one movie, indexed by entity_id."""

    feature_dim: int
    anchors: list[AnchorEntity]
    by_id: dict[str, AnchorEntity] = field(init=False)

    def __post_init__(self):
        self.by_id = {}
        for anchor in self.anchors:
            if anchor.entity_id in self.by_id:
                raise ValidationError(f"duplicate entity_id {anchor.entity_id!r} in registry")
            if anchor.feature.shape != (self.feature_dim,):
                raise ValidationError(
                    f"anchor {anchor.entity_id!r} feature has dimension "
                    f"{anchor.feature.shape[0] if anchor.feature.ndim == 1 else anchor.feature.shape}, "
                    f"expected {self.feature_dim}"
                )
            if not np.linalg.norm(anchor.feature) > 0:
                raise ValidationError(f"anchor {anchor.entity_id!r} feature has zero norm")
            self.by_id[anchor.entity_id] = anchor

    def of_type(self, entity_type: str) -> list[AnchorEntity]:
        return [a for a in self.anchors if a.entity_type == entity_type]


@dataclass
class MovieBundle:
    """Validated inputs for one movie."""

    frames: list[FrameRecord]
    cues: list[SubtitleCue]
    registry: AnchorRegistry
    ontology: Ontology

    @property
    def feature_dim(self) -> int:
        return self.registry.feature_dim


def build_sampling_schedule(duration_s: float, p: float) -> list[FrameSlot]:
    """Slots at every multiple of ``p`` seconds in [0, duration_s].

    Always includes t=0; includes the duration itself when it is an exact
    multiple of ``p``. Length is floor(duration_s / p) + 1.
    """
    if not (isinstance(p, (int, float)) and math.isfinite(p) and p > 0):
        raise InvalidConfigError(f"sampling period must be a positive finite number, got {p!r}")
    if not (math.isfinite(duration_s) and duration_s >= 0):
        raise InvalidConfigError(f"duration must be finite and >= 0, got {duration_s!r}")
    n = math.floor(duration_s / p)
    return [FrameSlot(index=i, timestamp_s=i * p) for i in range(n + 1)]


_TIMESTAMP_RE = re.compile(
    r"^\s*(\d{2,}):([0-5]\d):([0-5]\d),(\d{3})\s*-->\s*(\d{2,}):([0-5]\d):([0-5]\d),(\d{3})\s*$"
)


def _timestamp_to_seconds(h: str, m: str, s: str, ms: str) -> float:
    # single division keeps parse(render(t)) == t bit-exact for ms-precise times
    return ((int(h) * 3600 + int(m) * 60 + int(s)) * 1000 + int(ms)) / 1000.0


def parse_srt(text: str) -> list[SubtitleCue]:
    """Parse SubRip text into cues, in file order.

    Tolerates CRLF, BOM, trailing blank lines, non-consecutive ordinals and
    overlapping cues. Multi-line cue text is joined with single spaces.
    Blocks whose text is empty after trimming are skipped.
    """
    text = text.lstrip("﻿").replace("\r\n", "\n").replace("\r", "\n")
    cues: list[SubtitleCue] = []
    blocks = [b for b in re.split(r"\n\s*\n", text) if b.strip()]
    for position, block in enumerate(blocks, start=1):
        lines = [ln.strip() for ln in block.split("\n")]
        lines = [ln for ln in lines if ln]
        if len(lines) < 2:
            raise SrtParseError("block too short (need ordinal and timestamp lines)", block=position)
        try:
            ordinal = int(lines[0])
        except ValueError:
            raise SrtParseError(f"ordinal line is not an integer: {lines[0]!r}", block=position) from None
        if ordinal < 1:
            raise SrtParseError(f"ordinal must be positive, got {ordinal}", block=position)
        match = _TIMESTAMP_RE.match(lines[1])
        if match is None:
            raise SrtParseError(f"malformed timestamp line: {lines[1]!r}", block=position)
        start_s = _timestamp_to_seconds(*match.group(1, 2, 3, 4))
        end_s = _timestamp_to_seconds(*match.group(5, 6, 7, 8))
        if start_s > end_s:
            raise SrtParseError(f"cue starts after it ends ({start_s} > {end_s})", block=position)
        cue_text = " ".join(lines[2:]).strip()
        if not cue_text:
            continue
        cues.append(SubtitleCue(ordinal=ordinal, start_s=start_s, end_s=end_s, text=cue_text))
    return cues


def _seconds_to_timestamp(seconds: float) -> str:
    total_ms = round(seconds * 1000)
    s, ms = divmod(total_ms, 1000)
    m, s = divmod(s, 60)
    h, m = divmod(m, 60)
    return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


def render_srt(cues: list[SubtitleCue]) -> str:
    """Canonical SubRip rendering: one text line per cue, LF endings."""
    blocks = []
    for cue in cues:
        blocks.append(
            f"{cue.ordinal}\n"
            f"{_seconds_to_timestamp(cue.start_s)} --> {_seconds_to_timestamp(cue.end_s)}\n"
            f"{cue.text}\n"
        )
    return "\n".join(blocks)


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}") from None
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


def _load_json_doc(path: str | Path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc


def _as_feature(raw, dim: int, where: str) -> FeatureVector:
    vec = np.asarray(raw, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != dim:
        got = vec.shape[0] if vec.ndim == 1 else f"shape {vec.shape}"
        raise ValidationError(f"{where}: feature has dimension {got}, expected {dim}")
    if not np.all(np.isfinite(vec)):
        raise ValidationError(f"{where}: feature contains non-finite values")
    return vec


def load_anchor_registry(path: str | Path) -> AnchorRegistry:
    doc = _load_json_doc(path)
    try:
        dim = int(doc["feature_dim"])
        raw_anchors = doc["anchors"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"anchor registry {path}: missing field {exc}") from exc
    anchors = []
    for raw in raw_anchors:
        anchors.append(
            AnchorEntity(
                entity_id=str(raw["entity_id"]),
                name=str(raw["name"]),
                entity_type=str(raw["entity_type"]),
                feature=_as_feature(raw["feature"], dim, f"anchor {raw.get('entity_id')!r}"),
            )
        )
    return AnchorRegistry(feature_dim=dim, anchors=anchors)


def load_ontology(path: str | Path) -> Ontology:
    doc = _load_json_doc(path)
    try:
        return Ontology(
            relations=[str(r) for r in doc["relations"]],
            entity_types=[str(t) for t in doc["entity_types"]],
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"ontology {path}: missing field {exc}") from exc


def load_feature_records(path: str | Path, feature_dim: int) -> list[FrameRecord]:
    """Read the line-delimited feature-record file, validating dimensions."""
    frames: list[FrameRecord] = []
    for line_no, line in enumerate(_read_text(path).splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{line_no}: invalid JSON record: {exc}") from exc
        try:
            index = int(raw["frame_index"])
            timestamp = float(raw["timestamp_s"])
            raw_dets = raw["detections"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{line_no}: bad record: {exc}") from exc
        where = f"frame {index}"
        frame_feature = None
        if raw.get("frame_feature") is not None:
            frame_feature = _as_feature(raw["frame_feature"], feature_dim, where)
        detections = []
        for det in raw_dets:
            bbox = tuple(float(v) for v in det["bbox"])
            if len(bbox) != 4 or bbox[0] > bbox[2] or bbox[1] > bbox[3]:
                raise ValidationError(f"{where}: degenerate bbox {bbox}")
            detections.append(Detection(bbox=bbox, feature=_as_feature(det["feature"], feature_dim, where)))
        frames.append(
            FrameRecord(
                slot=FrameSlot(index=index, timestamp_s=timestamp),
                frame_feature=frame_feature,
                detections=detections,
            )
        )
    return frames


def load_movie_bundle(
    feature_path: str | Path,
    subtitle_path: str | Path,
    anchor_path: str | Path,
    ontology_path: str | Path,
) -> MovieBundle:
    """Load and cross-validate all inputs for one movie.

    Rejects empty movies, feature-dimension mismatches (naming the offending
    frame), duplicate anchor ids, anchor types missing from the ontology, and
    non-increasing frame timestamps.
    """
    ontology = load_ontology(ontology_path)
    registry = load_anchor_registry(anchor_path)
    for anchor in registry.anchors:
        if anchor.entity_type not in ontology.entity_types:
            raise ValidationError(
                f"anchor {anchor.entity_id!r} has unknown entity_type {anchor.entity_type!r}"
            )
    frames = load_feature_records(feature_path, registry.feature_dim)
    if not frames:
        raise ValidationError("empty movie: feature file contains no frame records")
    for prev, cur in zip(frames, frames[1:]):
        if cur.slot.timestamp_s <= prev.slot.timestamp_s:
            raise ValidationError(
                f"frame {cur.slot.index}: timestamp {cur.slot.timestamp_s} not after "
                f"frame {prev.slot.index} ({prev.slot.timestamp_s})"
            )
    cues = parse_srt(_read_text(subtitle_path))
    return MovieBundle(frames=frames, cues=cues, registry=registry, ontology=ontology)
