"""Seeded synthetic movies with planted truth graphs.

The generator builds a movie whose correct answers are known by
construction, so the full pipeline can be checked end to end:

* anchors are well-separated unit vectors, detections are anchors plus
  isotropic noise (re-normalized), so naming is unambiguous at low noise;
* the truth graph is functional per (subject, relation), so each query's
  gold is the only candidate the mock backend can score positively;
* every (known entity, gold) pair needed by a query co-occurs in a
  dedicated "meeting" frame placed before all random frames, which keeps
  the pair inside the top-K selection whenever K is at least the number
  of meetings the known entity takes part in (at most n_entities - 1).

Same spec, same seed: byte-identical output files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import MockTruth
from .engine import BLANK, Condition, GraphQuery, QaQuery
from .errors import GenerationError, InvalidConfigError
from .ingest import (
    AnchorEntity,
    AnchorRegistry,
    Detection,
    FrameRecord,
    FrameSlot,
    MovieBundle,
    Ontology,
    SubtitleCue,
    render_srt,
)


@dataclass
class SynthSpec:
    n_entities: int = 8
    n_frames: int = 200
    feature_dim: int = 16
    p: float = 1.0
    noise_sigma: float = 0.0
    n_relations: int = 10
    n_queries: int = 50
    seed: int = 0
    anchor_separation: float = 0.3  # max pairwise anchor cosine

    def __post_init__(self):
        if self.n_entities < 2:
            raise InvalidConfigError("need at least 2 entities")
        if self.feature_dim < 2:
            raise InvalidConfigError("need feature_dim >= 2")
        if self.n_frames < 1:
            raise InvalidConfigError("need at least 1 frame")
        if self.p <= 0:
            raise InvalidConfigError("sampling period must be > 0")
        if self.noise_sigma < 0:
            raise InvalidConfigError("noise_sigma must be >= 0")
        if self.n_relations < 1 or self.n_queries < 0:
            raise InvalidConfigError("need n_relations >= 1 and n_queries >= 0")


@dataclass
class SynthMovie:
    movie_id: str
    bundle: MovieBundle
    truth: MockTruth
    queries: list[GraphQuery]
    gold: dict[str, str]  # query_id -> gold entity_id
    qa_queries: list[QaQuery] = field(default_factory=list)
    qa_gold: dict[str, int] = field(default_factory=dict)

    def write_files(self, outdir: str | Path) -> dict[str, Path]:
        """Emit the ingest-format files plus truth, queries and gold."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = {name: outdir / fname for name, fname in [
            ("features", "features.jsonl"),
            ("subtitles", "subtitles.srt"),
            ("anchors", "anchors.json"),
            ("ontology", "ontology.json"),
            ("truth", "truth.json"),
            ("queries", "queries.json"),
            ("qa_queries", "qa_queries.json"),
            ("gold", "gold.json"),
            ("qa_gold", "qa_gold.json"),
        ]}
        with open(paths["features"], "w", encoding="utf-8") as fh:
            for frame in self.bundle.frames:
                record = {
                    "frame_index": frame.slot.index,
                    "timestamp_s": frame.slot.timestamp_s,
                    "frame_feature": None
                    if frame.frame_feature is None
                    else [float(v) for v in frame.frame_feature],
                    "detections": [
                        {
                            "bbox": [float(v) for v in det.bbox],
                            "feature": [float(v) for v in det.feature],
                        }
                        for det in frame.detections
                    ],
                }
                fh.write(json.dumps(record) + "\n")
        paths["subtitles"].write_text(render_srt(self.bundle.cues), encoding="utf-8")
        registry = self.bundle.registry
        paths["anchors"].write_text(
            json.dumps(
                {
                    "feature_dim": registry.feature_dim,
                    "anchors": [
                        {
                            "entity_id": a.entity_id,
                            "name": a.name,
                            "entity_type": a.entity_type,
                            "feature": [float(v) for v in a.feature],
                        }
                        for a in registry.anchors
                    ],
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        paths["ontology"].write_text(
            json.dumps(
                {
                    "relations": self.bundle.ontology.relations,
                    "entity_types": self.bundle.ontology.entity_types,
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        self.truth.save(paths["truth"])
        paths["queries"].write_text(
            json.dumps(
                [
                    {
                        "query_id": q.query_id,
                        "blank_type": q.blank_type,
                        "conditions": [
                            {"relation": c.relation, "argument": c.argument} for c in q.conditions
                        ],
                    }
                    for q in self.queries
                ],
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        paths["qa_queries"].write_text(
            json.dumps(
                [
                    {
                        "query_id": q.query_id,
                        "question": q.question,
                        "options": q.options,
                        "answer_index": q.answer_index,
                    }
                    for q in self.qa_queries
                ],
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        paths["gold"].write_text(
            json.dumps(
                [
                    {"query_id": qid, "movie_id": self.movie_id, "gold": gold}
                    for qid, gold in sorted(self.gold.items())
                ],
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        paths["qa_gold"].write_text(
            json.dumps(
                [
                    {"query_id": qid, "movie_id": self.movie_id, "gold": gold}
                    for qid, gold in sorted(self.qa_gold.items())
                ],
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        return paths


def _separated_anchors(rng, n: int, dim: int, bound: float) -> np.ndarray:
    anchors: list[np.ndarray] = []
    attempts = 0
    while len(anchors) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise GenerationError(
                f"could not place {n} anchors with pairwise cosine <= {bound} in dim {dim}"
            )
        vec = rng.standard_normal(dim)
        vec /= np.linalg.norm(vec)
        if all(float(np.dot(vec, a)) <= bound for a in anchors):
            anchors.append(vec)
    return np.stack(anchors)


def _noisy_unit(rng, anchor: np.ndarray, sigma: float) -> np.ndarray:
    vec = anchor + sigma * rng.standard_normal(anchor.shape[0])
    norm = np.linalg.norm(vec)
    if norm == 0:  # vanishingly unlikely; keep the anchor direction
        return anchor.copy()
    return vec / norm


def _random_bbox(rng) -> tuple[float, float, float, float]:
    x0 = float(rng.uniform(0, 1600))
    y0 = float(rng.uniform(0, 800))
    return (x0, y0, x0 + float(rng.uniform(40, 320)), y0 + float(rng.uniform(40, 280)))


def generate(spec: SynthSpec) -> SynthMovie:
    """Build a movie, its ground truth and an answerable query set.

    Raises GenerationError when the requested movie cannot be realized (too
    few frames for the required co-occurrences, or too few relations for
    the queries).
    """
    rng = np.random.default_rng(spec.seed)
    movie_id = f"synth{spec.seed}"

    entity_ids = [f"e{i:02d}" for i in range(spec.n_entities)]
    names = {eid: f"Entity{i:02d}" for i, eid in enumerate(entity_ids)}
    relations = [f"rel{i:02d}" for i in range(spec.n_relations)]
    ontology = Ontology(relations=relations, entity_types=["person"])

    anchor_matrix = _separated_anchors(rng, spec.n_entities, spec.feature_dim, spec.anchor_separation)
    registry = AnchorRegistry(
        feature_dim=spec.feature_dim,
        anchors=[
            AnchorEntity(
                entity_id=eid, name=names[eid], entity_type="person", feature=anchor_matrix[i]
            )
            for i, eid in enumerate(entity_ids)
        ],
    )

    # Plant queries over a functional truth graph: one object per
    # (subject, relation), so the gold is the unique positive candidate.
    func: dict[tuple[str, str], str] = {}
    queries: list[GraphQuery] = []
    gold: dict[str, str] = {}
    meetings: list[tuple[str, str]] = []  # unordered pairs, first-needed order
    meeting_set: set[frozenset] = set()

    def free_count(subject: str) -> int:
        return sum(1 for r in relations if (subject, r) not in func)

    def golds_seen(subject: str) -> set[str]:
        return {o for (s, _r), o in func.items() if s == subject}

    def can_allocate(subject: str, target: str) -> bool:
        # Keep one free slot for every gold this subject has not pointed to
        # yet, so later queries can always find a fresh (subject, relation).
        unseen_after = (spec.n_entities - 1) - len(golds_seen(subject) | {target})
        return free_count(subject) - 1 >= unseen_after

    for qi in range(spec.n_queries):
        qid = f"q{qi:03d}"
        gold_entity = entity_ids[int(rng.integers(spec.n_entities))]
        others = [e for e in entity_ids if e != gold_entity]
        n_known = 2 if (spec.n_entities > 2 and rng.random() < 0.4) else 1
        known = [others[i] for i in rng.choice(len(others), size=n_known, replace=False)]

        conditions: list[Condition] = []
        for subject in known:
            pointing = [r for r in relations if func.get((subject, r)) == gold_entity]
            fresh = [r for r in relations if (subject, r) not in func]
            if fresh and can_allocate(subject, gold_entity) and (not pointing or rng.random() < 0.5):
                relation = fresh[int(rng.integers(len(fresh)))]
                func[(subject, relation)] = gold_entity
            elif pointing:
                relation = pointing[int(rng.integers(len(pointing)))]
            else:
                raise GenerationError(
                    f"query {qid}: no relation left for subject {subject} -> {gold_entity}; "
                    f"raise n_relations (have {spec.n_relations}, "
                    f"need at least {spec.n_entities - 1})"
                )
            conditions.append(Condition(relation=relation, argument=subject))

        if rng.random() < 0.3:
            shared = []
            for r in relations:
                ok = True
                for subject in known:
                    current = func.get((subject, r))
                    if current is not None and current != gold_entity:
                        ok = False
                    elif current is None and not can_allocate(subject, gold_entity):
                        ok = False
                    if not ok:
                        break
                if ok:
                    shared.append(r)
            if shared:
                relation = shared[int(rng.integers(len(shared)))]
                for subject in known:
                    func[(subject, relation)] = gold_entity
                conditions.insert(int(rng.integers(len(conditions) + 1)),
                                  Condition(relation=relation, argument=BLANK))

        for subject in known:
            pair = frozenset((subject, gold_entity))
            if pair not in meeting_set:
                meeting_set.add(pair)
                meetings.append((subject, gold_entity))

        queries.append(GraphQuery(query_id=qid, conditions=conditions, blank_type="person"))
        gold[qid] = gold_entity

    if len(meetings) > spec.n_frames:
        raise GenerationError(
            f"spec needs {len(meetings)} co-occurrence frames but only has {spec.n_frames}"
        )

    # Distractor edges on unused (subject, relation) slots; they are never
    # queried, so they cannot disturb any planted answer.
    for _ in range(2 * spec.n_entities):
        subject = entity_ids[int(rng.integers(spec.n_entities))]
        relation = relations[int(rng.integers(spec.n_relations))]
        if (subject, relation) in func:
            continue
        target = entity_ids[int(rng.integers(spec.n_entities))]
        if target != subject:
            func[(subject, relation)] = target

    edges = {(s, r, o) for (s, r), o in func.items()}

    # Presence: meeting frames first, then random background frames.
    presence: dict[int, set[str]] = {}
    for t, (a, b) in enumerate(meetings):
        presence[t] = {a, b}
    for t in range(len(meetings), spec.n_frames):
        size = int(rng.integers(0, 4))
        if size == 0 and rng.random() < 0.8:
            size = 1  # keep truly empty frames rare
        chosen = rng.choice(spec.n_entities, size=min(size, spec.n_entities), replace=False)
        presence[t] = {entity_ids[int(i)] for i in chosen}

    anchor_by_id = {eid: anchor_matrix[i] for i, eid in enumerate(entity_ids)}
    frames: list[FrameRecord] = []
    for t in range(spec.n_frames):
        detections = [
            Detection(bbox=_random_bbox(rng), feature=_noisy_unit(rng, anchor_by_id[eid], spec.noise_sigma))
            for eid in sorted(presence[t])
        ]
        if detections:
            mean = np.mean([d.feature for d in detections], axis=0)
            norm = np.linalg.norm(mean)
            frame_feature = mean / norm if norm > 0 else None
        else:
            frame_feature = None
        frames.append(
            FrameRecord(
                slot=FrameSlot(index=t, timestamp_s=t * spec.p),
                frame_feature=frame_feature,
                detections=detections,
            )
        )

    # Subtitles: meeting frames get a cue naming both entities inside the
    # frame's vicinity window; background frames get occasional filler.
    cues: list[SubtitleCue] = []
    ordinal = 1
    for t in range(spec.n_frames):
        ts = round(t * spec.p, 3)
        if t < len(meetings):
            a, b = meetings[t]
            text = f"{names[a]} and {names[b]} talk."
        elif presence[t] and t % 7 == 0:
            text = f"{names[sorted(presence[t])[0]]} looks around."
        elif t % 11 == 0:
            text = "The scene continues."
        else:
            continue
        cues.append(
            SubtitleCue(
                ordinal=ordinal,
                start_s=ts,
                end_s=round(ts + min(spec.p, 2.0), 3),
                text=text,
            )
        )
        ordinal += 1

    # QA variants of the planted queries; question text embeds the known
    # entity's display name so the frame selector can anchor on it.
    qa_queries: list[QaQuery] = []
    qa_gold: dict[str, int] = {}
    qa_key: dict[tuple[str, int], float] = {}
    used_qa_pairs: set[tuple[str, str]] = set()
    for qi, query in enumerate(queries):
        known_conditions = [c for c in query.conditions if c.argument != BLANK]
        condition = known_conditions[0]
        pair = (condition.argument, condition.relation)
        if pair in used_qa_pairs:
            continue
        used_qa_pairs.add(pair)
        gold_entity = gold[query.query_id]
        question = (
            f"Which person has relation {condition.relation} with {names[condition.argument]}?"
        )
        distractor_pool = [e for e in entity_ids if e not in (gold_entity, condition.argument)]
        n_options = min(4, 1 + len(distractor_pool))
        picks = rng.choice(len(distractor_pool), size=n_options - 1, replace=False)
        option_ids = [distractor_pool[int(i)] for i in picks] + [gold_entity]
        order = rng.permutation(n_options)
        option_ids = [option_ids[int(i)] for i in order]
        answer_index = option_ids.index(gold_entity)
        qa_id = f"qa{qi:03d}"
        qa_queries.append(
            QaQuery(
                query_id=qa_id,
                question=question,
                options=[names[e] for e in option_ids],
                answer_index=answer_index,
            )
        )
        qa_gold[qa_id] = answer_index
        for i in range(n_options):
            qa_key[(question, i)] = 1.0 if i == answer_index else float(rng.uniform(0.0, 0.4))

    truth = MockTruth(presence=presence, edges=edges, qa_key=qa_key)
    bundle = MovieBundle(frames=frames, cues=cues, registry=registry, ontology=ontology)
    return SynthMovie(
        movie_id=movie_id,
        bundle=bundle,
        truth=truth,
        queries=queries,
        gold=gold,
        qa_queries=qa_queries,
        qa_gold=qa_gold,
    )
