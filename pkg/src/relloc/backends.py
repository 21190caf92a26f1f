"""Scoring contract and its implementations: mock, file replay, remote HTTP.

The engine never computes relevance or relation scores itself; it asks a
ScorerBackend. All scores the engine observes lie in [0, 1]. Mock and
file backends are referentially transparent; the remote backend proxies
an external inference service over the wire contract:

    POST /score/frame     {frame_feature, entity: {id, name, type}, prompt} -> {score}
    POST /score/relation  {frame_feature, context, subject, relation, candidate, prompt} -> {score}
    POST /score/qa        {frame_feature, context, question, options} -> {scores}
    GET  /health          -> {status: "ok", model_ids: [...]}

Backend calls carry the frame index so replayable backends can key on it;
the wire bodies above stay index-free, matching the stateless service.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, runtime_checkable

import numpy as np
import requests

from .errors import (
    BackendUnavailableError,
    ContractError,
    MissingScoreError,
    ProtocolError,
    ScoreFileError,
)
from .ingest import AnchorEntity, FeatureVector

# Reserved pseudo-entity for QA queries that mention no registry entity:
# the engine still asks for frame scores, passing the question text as the
# entity name under this id. Backends must not treat it as unknown.
QUESTION_ENTITY_ID = "<question>"


@runtime_checkable
class ScorerBackend(Protocol):
    """Scoring operations the pipeline depends on.

    Implementations must tolerate concurrent calls and must clamp (or
    validate) every score into [0, 1].
    """

    def frame_relevance(
        self, frame_index: int, frame_feature: FeatureVector, entity: AnchorEntity, prompt: str
    ) -> float: ...

    def relation_affinity(
        self,
        frame_index: int,
        frame_feature: FeatureVector,
        context: str,
        subject: str,
        relation: str,
        candidate: str,
        prompt: str,
    ) -> float: ...

    def qa_affinity(
        self,
        frame_index: int,
        frame_feature: FeatureVector,
        context: str,
        question: str,
        options: list[str],
    ) -> list[float]: ...


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, float(value)))


@dataclass
class MockTruth:
    """Ground truth a mock backend answers from.

    presence: frame_index -> entity ids visible in that frame.
    edges: (subject, relation, object) triples that hold in the movie.
    qa_key: (question, option_index) -> score.
    """

    presence: dict[int, set[str]] = field(default_factory=dict)
    edges: set[tuple[str, str, str]] = field(default_factory=set)
    qa_key: dict[tuple[str, int], float] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "MockTruth":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        presence = {int(k): set(map(str, v)) for k, v in doc.get("presence", {}).items()}
        edges = {(str(s), str(r), str(o)) for s, r, o in doc.get("edges", [])}
        qa_key = {}
        for item in doc.get("qa", []):
            for option_index, score in enumerate(item["scores"]):
                qa_key[(str(item["question"]), option_index)] = float(score)
        return cls(presence=presence, edges=edges, qa_key=qa_key)

    def save(self, path: str | Path) -> None:
        doc = {
            "presence": {str(k): sorted(v) for k, v in sorted(self.presence.items())},
            "edges": sorted(list(e) for e in self.edges),
            "qa": _qa_key_to_records(self.qa_key),
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _qa_key_to_records(qa_key: dict[tuple[str, int], float]) -> list[dict]:
    per_question: dict[str, dict[int, float]] = {}
    for (question, option_index), score in qa_key.items():
        per_question.setdefault(question, {})[option_index] = score
    records = []
    for question in sorted(per_question):
        scores_by_index = per_question[question]
        scores = [scores_by_index.get(i, 0.0) for i in range(max(scores_by_index) + 1)]
        records.append({"question": question, "scores": scores})
    return records


class MockScorerBackend:
    """Deterministic oracle backend driven by a MockTruth.

    frame_relevance is 1.0 iff the entity is present in the frame;
    relation_affinity is 1.0 iff the edge holds and both endpoints are
    present; qa_affinity replays the qa_key (missing entries score 0).
    """

    def __init__(self, truth: MockTruth, entity_ids: Iterable[str], relations: Iterable[str]):
        self.truth = truth
        self.entity_ids = set(entity_ids)
        self.relations = set(relations)

    @classmethod
    def for_bundle(cls, truth: MockTruth, bundle) -> "MockScorerBackend":
        return cls(truth, bundle.registry.by_id.keys(), bundle.ontology.relations)

    def _check_entity(self, entity_id: str) -> None:
        if entity_id not in self.entity_ids:
            raise ContractError(f"unknown entity id {entity_id!r}")

    def frame_relevance(self, frame_index, frame_feature, entity, prompt):
        if entity.entity_id == QUESTION_ENTITY_ID:
            return 0.0
        self._check_entity(entity.entity_id)
        present = self.truth.presence.get(frame_index, set())
        return 1.0 if entity.entity_id in present else 0.0

    def relation_affinity(self, frame_index, frame_feature, context, subject, relation, candidate, prompt):
        if relation not in self.relations:
            raise ContractError(f"unknown relation {relation!r}")
        self._check_entity(subject)
        self._check_entity(candidate)
        present = self.truth.presence.get(frame_index, set())
        holds = (subject, relation, candidate) in self.truth.edges
        return 1.0 if holds and subject in present and candidate in present else 0.0

    def qa_affinity(self, frame_index, frame_feature, context, question, options):
        return [
            _clamp01(self.truth.qa_key.get((question, i), 0.0)) for i in range(len(options))
        ]


FrameKey = tuple[str, int, str]
RelationKey = tuple[str, int, str, str, str]
QaKey = tuple[str, int, str, int]


class FileScorerBackend:
    """Replays scores recorded in a JSON file.

    The file carries one record per scored key; a missing key either raises
    (``missing="error"``) or scores 0.0 (``missing="zero"``).
    """

    def __init__(self, scores: dict[tuple, float], missing: str = "error"):
        if missing not in ("error", "zero"):
            raise ScoreFileError(f"missing-key policy must be 'error' or 'zero', got {missing!r}")
        self.scores = scores
        self.missing = missing

    @classmethod
    def load(cls, path: str | Path, missing: str | None = None) -> "FileScorerBackend":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ScoreFileError(f"score file {path}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "records" not in doc:
            raise ScoreFileError(f"score file {path}: expected object with a 'records' list")
        scores: dict[tuple, float] = {}
        for i, rec in enumerate(doc["records"]):
            try:
                op = rec["op"]
                frame_index = int(rec["frame_index"])
                score = _clamp01(float(rec["score"]))
                if op == "frame":
                    key: tuple = ("frame", frame_index, str(rec["entity"]))
                elif op == "relation":
                    key = (
                        "relation",
                        frame_index,
                        str(rec["subject"]),
                        str(rec["relation"]),
                        str(rec["candidate"]),
                    )
                elif op == "qa":
                    key = ("qa", frame_index, str(rec["question"]), int(rec["option"]))
                else:
                    raise ScoreFileError(f"score file {path}: record {i}: unknown op {op!r}")
            except (KeyError, TypeError, ValueError) as exc:
                raise ScoreFileError(f"score file {path}: record {i}: {exc}") from exc
            scores[key] = score
        policy = missing if missing is not None else doc.get("default_policy", "error")
        return cls(scores, missing=policy)

    def _lookup(self, key: tuple) -> float:
        try:
            return self.scores[key]
        except KeyError:
            if self.missing == "zero":
                return 0.0
            raise MissingScoreError(f"no recorded score for key {key!r}") from None

    def frame_relevance(self, frame_index, frame_feature, entity, prompt):
        return self._lookup(("frame", frame_index, entity.entity_id))

    def relation_affinity(self, frame_index, frame_feature, context, subject, relation, candidate, prompt):
        return self._lookup(("relation", frame_index, subject, relation, candidate))

    def qa_affinity(self, frame_index, frame_feature, context, question, options):
        return [self._lookup(("qa", frame_index, question, i)) for i in range(len(options))]


class RecordingBackend:
    """Wraps a backend and records every (key, score) pair it returns.

    ``save`` writes the record set in the FileScorerBackend format, so a
    recorded run can be replayed bit-for-bit without the original backend.
    """

    def __init__(self, inner: ScorerBackend):
        self.inner = inner
        self._records: dict[tuple, float] = {}
        self._lock = threading.Lock()

    def _remember(self, key: tuple, score: float) -> float:
        with self._lock:
            self._records[key] = score
        return score

    def frame_relevance(self, frame_index, frame_feature, entity, prompt):
        score = self.inner.frame_relevance(frame_index, frame_feature, entity, prompt)
        return self._remember(("frame", frame_index, entity.entity_id), score)

    def relation_affinity(self, frame_index, frame_feature, context, subject, relation, candidate, prompt):
        score = self.inner.relation_affinity(
            frame_index, frame_feature, context, subject, relation, candidate, prompt
        )
        return self._remember(("relation", frame_index, subject, relation, candidate), score)

    def qa_affinity(self, frame_index, frame_feature, context, question, options):
        scores = self.inner.qa_affinity(frame_index, frame_feature, context, question, options)
        for i, score in enumerate(scores):
            self._remember(("qa", frame_index, question, i), score)
        return scores

    def save(self, path: str | Path, missing: str = "error") -> None:
        records = []
        for key in sorted(self._records):
            score = self._records[key]
            if key[0] == "frame":
                records.append({"op": "frame", "frame_index": key[1], "entity": key[2], "score": score})
            elif key[0] == "relation":
                records.append(
                    {
                        "op": "relation",
                        "frame_index": key[1],
                        "subject": key[2],
                        "relation": key[3],
                        "candidate": key[4],
                        "score": score,
                    }
                )
            else:
                records.append(
                    {"op": "qa", "frame_index": key[1], "question": key[2], "option": key[3], "score": score}
                )
        doc = {"default_policy": missing, "records": records}
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


class RemoteScorerBackend:
    """HTTP client for an external scoring service.

    Transient failures (connection errors, timeouts, 5xx) are retried with
    exponential backoff up to ``max_attempts``; anything still failing is a
    BackendUnavailableError. Responses outside the wire contract (missing or
    out-of-range scores) raise ProtocolError. ``max_in_flight`` bounds
    concurrent requests when the engine runs threaded.
    """

    def __init__(
        self,
        endpoint: str,
        timeout_s: float = 10.0,
        max_attempts: int = 3,
        max_in_flight: int = 8,
        backoff_s: float = 0.1,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self._limiter = threading.BoundedSemaphore(max_in_flight)
        self._session = requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.endpoint}{path}"
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                with self._limiter:
                    response = self._session.post(url, json=payload, timeout=self.timeout_s)
            except requests.RequestException as exc:
                last_error = exc
                time.sleep(self.backoff_s * (2**attempt))
                continue
            if response.status_code >= 500:
                last_error = BackendUnavailableError(f"{url} returned {response.status_code}")
                time.sleep(self.backoff_s * (2**attempt))
                continue
            if response.status_code != 200:
                raise BackendUnavailableError(
                    f"{url} returned {response.status_code}: {response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"{url}: response is not JSON: {exc}") from exc
        raise BackendUnavailableError(
            f"{url} unreachable after {self.max_attempts} attempts: {last_error}"
        )

    @staticmethod
    def _validated_score(value, where: str) -> float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ProtocolError(f"{where}: score is not a number: {value!r}")
        score = float(value)
        if not 0.0 <= score <= 1.0:
            raise ProtocolError(f"{where}: score {score} outside [0, 1]")
        return score

    @staticmethod
    def _feature_list(feature: FeatureVector) -> list[float]:
        return [float(v) for v in np.asarray(feature, dtype=np.float64)]

    def frame_relevance(self, frame_index, frame_feature, entity, prompt):
        body = self._post(
            "/score/frame",
            {
                "frame_feature": self._feature_list(frame_feature),
                "entity": {"id": entity.entity_id, "name": entity.name, "type": entity.entity_type},
                "prompt": prompt,
            },
        )
        return self._validated_score(body.get("score"), "/score/frame")

    def relation_affinity(self, frame_index, frame_feature, context, subject, relation, candidate, prompt):
        body = self._post(
            "/score/relation",
            {
                "frame_feature": self._feature_list(frame_feature),
                "context": context,
                "subject": subject,
                "relation": relation,
                "candidate": candidate,
                "prompt": prompt,
            },
        )
        return self._validated_score(body.get("score"), "/score/relation")

    def qa_affinity(self, frame_index, frame_feature, context, question, options):
        body = self._post(
            "/score/qa",
            {
                "frame_feature": self._feature_list(frame_feature),
                "context": context,
                "question": question,
                "options": list(options),
            },
        )
        scores = body.get("scores")
        if not isinstance(scores, list) or len(scores) != len(options):
            raise ProtocolError(
                f"/score/qa: expected {len(options)} scores, got {scores!r}"
            )
        return [self._validated_score(s, "/score/qa") for s in scores]

    def health(self) -> dict:
        url = f"{self.endpoint}/health"
        try:
            response = self._session.get(url, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise BackendUnavailableError(f"{url}: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailableError(f"{url} returned {response.status_code}")
        body = response.json()
        if body.get("status") != "ok":
            raise BackendUnavailableError(f"{url}: service reports status {body.get('status')!r}")
        return body
