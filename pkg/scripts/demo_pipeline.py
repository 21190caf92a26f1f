#!/usr/bin/env python3
"""Full CLI walkthrough on a synthetic movie: gen -> run -> eval -> compare.

The "noisy" leg re-runs the same movie with perturbed features and a
presence map derived from naming, then diffs the two evaluation reports.
"""

import json
import sys
import tempfile
from pathlib import Path

from relloc.backends import MockScorerBackend, MockTruth
from relloc.cli import main as relloc
from relloc.engine import Pipeline, PipelineConfig
from relloc.entity_id import presence_from_naming
from relloc.synthgen import SynthSpec, generate


def noisy_answers(sigma, seed, out_path):
    spec = SynthSpec(n_entities=8, n_frames=120, feature_dim=16, noise_sigma=sigma,
                     n_relations=10, n_queries=16, seed=seed)
    movie = generate(spec)
    derived = presence_from_naming(movie.bundle.frames, movie.bundle.registry, tau=0.5)
    backend = MockScorerBackend.for_bundle(
        MockTruth(presence=derived, edges=movie.truth.edges, qa_key=movie.truth.qa_key),
        movie.bundle,
    )
    pipeline = Pipeline(movie.bundle, PipelineConfig(), backend)
    answers = [pipeline.answer(q).to_dict() for q in movie.queries]
    Path(out_path).write_text(json.dumps(answers, indent=2) + "\n")


def main():
    seed = 11
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        movie_dir = tmp / "movie"
        print("== gen ==")
        relloc(["gen", "--out", str(movie_dir), "--entities", "8", "--frames", "120",
                "--dim", "16", "--relations", "10", "--queries", "16", "--seed", str(seed)])

        print("== run (mock backend) ==")
        answers = tmp / "answers.json"
        relloc([
            "run",
            "--features", str(movie_dir / "features.jsonl"),
            "--subs", str(movie_dir / "subtitles.srt"),
            "--anchors", str(movie_dir / "anchors.json"),
            "--ontology", str(movie_dir / "ontology.json"),
            "--queries", str(movie_dir / "queries.json"),
            "--backend", "mock",
            "--truth", str(movie_dir / "truth.json"),
            "--out", str(answers),
        ])

        print("== eval (clean) ==")
        clean_report = tmp / "clean_report.json"
        relloc(["eval", "--results", str(answers), "--gold", str(movie_dir / "gold.json"),
                "--task", "graph", "--out", str(clean_report)])

        print("== noisy leg (sigma=0.5, presence from naming) ==")
        noisy = tmp / "noisy_answers.json"
        noisy_answers(0.5, seed, noisy)
        noisy_report = tmp / "noisy_report.json"
        relloc(["eval", "--results", str(noisy), "--gold", str(movie_dir / "gold.json"),
                "--task", "graph", "--out", str(noisy_report)])

        print("== compare ==")
        relloc(["compare", "--clean", str(clean_report), "--noisy", str(noisy_report)])
    return 0


if __name__ == "__main__":
    sys.exit(main())
