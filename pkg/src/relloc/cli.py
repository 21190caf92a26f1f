"""Command-line entry point: gen, run, run-qa, eval, compare.

Exit codes: 0 success, 1 validation/usage error, 2 backend failure.
Logs go to stderr; results and manifests to files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .backends import (
    FileScorerBackend,
    MockScorerBackend,
    MockTruth,
    RecordingBackend,
    RemoteScorerBackend,
)
from .engine import (
    Pipeline,
    PipelineConfig,
    load_graph_queries,
    load_qa_queries,
)
from .entity_id import PoolingWeights
from .errors import BackendError, InvalidConfigError, PipelineError, ValidationError
from .evalkit import Report, build_graph_report, build_qa_report, join_answers_with_gold, robustness_compare
from .ingest import load_movie_bundle
from .synthgen import SynthSpec, generate

log = logging.getLogger("relloc")

ENDPOINT_ENV = "RELLOC_ENDPOINT"

CONFIG_KEYS = ("sample_period_s", "top_k", "naming_threshold", "subtitle_window_s", "backend")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="relloc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"relloc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic movie with planted ground truth")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--entities", type=int, default=8)
    gen.add_argument("--frames", type=int, default=200)
    gen.add_argument("--dim", type=int, default=16)
    gen.add_argument("--period", type=float, default=1.0)
    gen.add_argument("--noise", type=float, default=0.0)
    gen.add_argument("--relations", type=int, default=10)
    gen.add_argument("--queries", type=int, default=50)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--separation", type=float, default=0.3)

    for name, qa in (("run", False), ("run-qa", True)):
        run = sub.add_parser(name, help=("answer QA queries" if qa else "answer graph queries"))
        run.add_argument("--features", help="feature-record file (jsonl)")
        run.add_argument("--subs", help="subtitle file (.srt)")
        run.add_argument("--anchors", help="anchor registry (json)")
        run.add_argument("--ontology", help="ontology (json)")
        run.add_argument("--queries", help="query file (json)")
        run.add_argument("--out", help="answer file to write")
        run.add_argument("--backend", choices=["mock", "file", "remote"])
        run.add_argument("--truth", help="mock backend: ground-truth file")
        run.add_argument("--scores", help="file backend: recorded score file")
        run.add_argument("--missing", choices=["error", "zero"], help="file backend: missing-key policy")
        run.add_argument("--endpoint", help=f"remote backend URL (or ${ENDPOINT_ENV})")
        run.add_argument("--config", help="config file (json)")
        run.add_argument("--weights", help="pooling weights file (json)")
        run.add_argument("--period", type=float, help="sampling period seconds")
        run.add_argument("--top-k", type=int, dest="top_k", help="frames kept per subquery")
        run.add_argument("--naming-threshold", type=float, dest="naming_threshold")
        run.add_argument("--window", type=float, help="subtitle vicinity seconds")
        run.add_argument("--record-scores", dest="record_scores", help="record every backend score to this file")
        run.add_argument("--from-manifest", dest="from_manifest", help="take paths/config from a previous run manifest")

    ev = sub.add_parser("eval", help="score an answer file against gold")
    ev.add_argument("--results", required=True, help="answer file from run/run-qa")
    ev.add_argument("--gold", required=True, help="gold file")
    ev.add_argument("--task", choices=["graph", "qa"], required=True)
    ev.add_argument("--out", help="write the report as JSON here")

    cmp_ = sub.add_parser("compare", help="clean-vs-noisy report deltas")
    cmp_.add_argument("--clean", required=True)
    cmp_.add_argument("--noisy", required=True)
    cmp_.add_argument("--out", help="write the delta report as JSON here")

    return parser


def _load_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc


def _resolve_config(args) -> PipelineConfig:
    """Flags beat the config file, which beats the defaults."""
    values: dict = {}
    if args.config:
        doc = _load_json(args.config)
        unknown = set(doc) - set(CONFIG_KEYS)
        if unknown:
            raise InvalidConfigError(f"config file {args.config}: unknown keys {sorted(unknown)}")
        values.update(doc)
    for key, flag in [
        ("sample_period_s", args.period),
        ("top_k", args.top_k),
        ("naming_threshold", args.naming_threshold),
        ("subtitle_window_s", args.window),
        ("backend", args.backend),
    ]:
        if flag is not None:
            values[key] = flag
    return PipelineConfig(**values)


def _apply_manifest(args) -> None:
    manifest = _load_json(args.from_manifest)
    inputs = manifest.get("inputs", {})
    for attr, key in [
        ("features", "features"),
        ("subs", "subtitles"),
        ("anchors", "anchors"),
        ("ontology", "ontology"),
        ("queries", "queries"),
        ("weights", "weights"),
    ]:
        if getattr(args, attr) is None and inputs.get(key):
            setattr(args, attr, inputs[key])
    backend = manifest.get("backend", {})
    if args.backend is None:
        args.backend = backend.get("kind")
    if args.truth is None:
        args.truth = backend.get("truth")
    if args.scores is None:
        args.scores = backend.get("scores")
    if args.missing is None:
        args.missing = backend.get("missing")
    if args.endpoint is None:
        args.endpoint = backend.get("endpoint")
    config = manifest.get("config", {})
    for attr, key in [
        ("period", "sample_period_s"),
        ("top_k", "top_k"),
        ("naming_threshold", "naming_threshold"),
        ("window", "subtitle_window_s"),
    ]:
        if getattr(args, attr) is None and key in config:
            setattr(args, attr, config[key])
    if args.out is None:
        args.out = manifest.get("output")


def _build_backend(args, bundle, config: PipelineConfig):
    kind = config.backend
    if kind == "mock":
        if not args.truth:
            raise InvalidConfigError("mock backend needs --truth")
        truth = MockTruth.load(args.truth)
        return MockScorerBackend.for_bundle(truth, bundle)
    if kind == "file":
        if not args.scores:
            raise InvalidConfigError("file backend needs --scores")
        return FileScorerBackend.load(args.scores, missing=args.missing)
    if kind == "remote":
        endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise InvalidConfigError(f"remote backend needs --endpoint or ${ENDPOINT_ENV}")
        backend = RemoteScorerBackend(endpoint)
        health = backend.health()
        log.info("remote scorer healthy: models=%s", health.get("model_ids"))
        return backend
    raise InvalidConfigError(f"unknown backend kind {kind!r}")


def _write_manifest(args, config: PipelineConfig, command: str) -> None:
    manifest = {
        "tool": "relloc",
        "version": __version__,
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": config.to_dict(),
        "inputs": {
            "features": str(Path(args.features).resolve()),
            "subtitles": str(Path(args.subs).resolve()),
            "anchors": str(Path(args.anchors).resolve()),
            "ontology": str(Path(args.ontology).resolve()),
            "queries": str(Path(args.queries).resolve()),
            "weights": str(Path(args.weights).resolve()) if args.weights else None,
        },
        "backend": {
            "kind": config.backend,
            "truth": str(Path(args.truth).resolve()) if args.truth else None,
            "scores": str(Path(args.scores).resolve()) if args.scores else None,
            "missing": args.missing,
            "endpoint": args.endpoint or os.environ.get(ENDPOINT_ENV),
        },
        "output": str(Path(args.out).resolve()),
    }
    manifest_path = Path(str(args.out) + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    log.info("manifest written to %s", manifest_path)


def _require_run_args(args) -> None:
    missing = [
        flag
        for flag, value in [
            ("--features", args.features),
            ("--subs", args.subs),
            ("--anchors", args.anchors),
            ("--ontology", args.ontology),
            ("--queries", args.queries),
            ("--out", args.out),
        ]
        if value is None
    ]
    if missing:
        raise InvalidConfigError(f"missing required arguments: {', '.join(missing)}")


def _cmd_run(args, qa: bool) -> int:
    if args.from_manifest:
        _apply_manifest(args)
    _require_run_args(args)
    config = _resolve_config(args)
    bundle = load_movie_bundle(args.features, args.subs, args.anchors, args.ontology)
    weights = PoolingWeights.load(args.weights) if args.weights else None
    backend = _build_backend(args, bundle, config)
    recorder = None
    if args.record_scores:
        recorder = RecordingBackend(backend)
        backend = recorder
    pipeline = Pipeline(bundle, config, backend, weights)
    answers = []
    if qa:
        for query in load_qa_queries(args.queries):
            answers.append(pipeline.answer_qa(query.query_id, query.question, query.options).to_dict())
    else:
        for query in load_graph_queries(args.queries):
            answers.append(pipeline.answer(query).to_dict())
    Path(args.out).write_text(json.dumps(answers, indent=2) + "\n", encoding="utf-8")
    log.info("%d answers written to %s", len(answers), args.out)
    if recorder is not None:
        recorder.save(args.record_scores)
        log.info("recorded scores written to %s", args.record_scores)
    _write_manifest(args, config, "run-qa" if qa else "run")
    return 0


def _cmd_gen(args) -> int:
    spec = SynthSpec(
        n_entities=args.entities,
        n_frames=args.frames,
        feature_dim=args.dim,
        p=args.period,
        noise_sigma=args.noise,
        n_relations=args.relations,
        n_queries=args.queries,
        seed=args.seed,
        anchor_separation=args.separation,
    )
    movie = generate(spec)
    paths = movie.write_files(args.out)
    log.info(
        "generated movie %s: %d frames, %d queries -> %s",
        movie.movie_id,
        len(movie.bundle.frames),
        len(movie.queries),
        args.out,
    )
    for name in sorted(paths):
        log.info("  %s: %s", name, paths[name])
    return 0


def _cmd_eval(args) -> int:
    answers = _load_json(args.results)
    gold = _load_json(args.gold)
    results = join_answers_with_gold(answers, gold, args.task)
    report = build_graph_report(results) if args.task == "graph" else build_qa_report(results)
    print(report.render_text())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        log.info("report written to %s", args.out)
    return 0


def _cmd_compare(args) -> int:
    clean = Report.from_dict(_load_json(args.clean))
    noisy = Report.from_dict(_load_json(args.noisy))
    delta = robustness_compare(clean, noisy)
    print(delta.render_text())
    if args.out:
        Path(args.out).write_text(json.dumps(delta.to_dict(), indent=2) + "\n", encoding="utf-8")
        log.info("delta report written to %s", args.out)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "run":
            return _cmd_run(args, qa=False)
        if args.command == "run-qa":
            return _cmd_run(args, qa=True)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "compare":
            return _cmd_compare(args)
        parser.error(f"unknown command {args.command!r}")
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except PipelineError as exc:
        if _backend_at_fault(exc):
            log.error("backend failure: %s", exc)
            return 2
        log.error("%s", exc)
        return 1
    return 0


def _backend_at_fault(exc: BaseException) -> bool:
    """True when the error is, or was caused by, a backend failure."""
    seen = set()
    current: BaseException | None = exc
    while current is not None and id(current) not in seen:
        if isinstance(current, BackendError):
            return True
        seen.add(id(current))
        current = current.__cause__ or current.__context__
    return False


if __name__ == "__main__":
    sys.exit(main())
