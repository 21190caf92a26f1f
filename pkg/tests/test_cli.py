import json
from pathlib import Path

import pytest

from relloc.cli import main

GEN_ARGS = [
    "gen",
    "--entities", "6",
    "--frames", "40",
    "--dim", "8",
    "--relations", "7",
    "--queries", "8",
    "--seed", "5",
]


@pytest.fixture()
def movie_dir(tmp_path):
    out = tmp_path / "movie"
    assert main(GEN_ARGS + ["--out", str(out)]) == 0
    return out


def run_args(movie_dir, out, backend="mock", queries="queries.json", extra=()):
    args = [
        "run",
        "--features", str(movie_dir / "features.jsonl"),
        "--subs", str(movie_dir / "subtitles.srt"),
        "--anchors", str(movie_dir / "anchors.json"),
        "--ontology", str(movie_dir / "ontology.json"),
        "--queries", str(movie_dir / queries),
        "--backend", backend,
        "--out", str(out),
    ]
    if backend == "mock":
        args += ["--truth", str(movie_dir / "truth.json")]
    args.extend(extra)
    return args


def test_gen_writes_all_files(movie_dir):
    names = {p.name for p in movie_dir.iterdir()}
    assert {
        "features.jsonl", "subtitles.srt", "anchors.json", "ontology.json",
        "truth.json", "queries.json", "qa_queries.json", "gold.json", "qa_gold.json",
    } <= names


def test_run_mock_end_to_end(movie_dir, tmp_path):
    out = tmp_path / "answers.json"
    assert main(run_args(movie_dir, out)) == 0
    answers = json.loads(out.read_text())
    assert len(answers) == 8
    assert all({"query_id", "predicted", "ranking"} <= set(a) for a in answers)
    manifest = json.loads((tmp_path / "answers.json.manifest.json").read_text())
    assert manifest["tool"] == "relloc"
    assert manifest["backend"]["kind"] == "mock"
    assert manifest["config"]["top_k"] == 10


def test_run_is_byte_deterministic(movie_dir, tmp_path):
    out1, out2 = tmp_path / "a1.json", tmp_path / "a2.json"
    assert main(run_args(movie_dir, out1)) == 0
    assert main(run_args(movie_dir, out2)) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_eval_graph_reports_perfect_oracle(movie_dir, tmp_path, capsys):
    out = tmp_path / "answers.json"
    main(run_args(movie_dir, out))
    report_path = tmp_path / "report.json"
    code = main([
        "eval",
        "--results", str(out),
        "--gold", str(movie_dir / "gold.json"),
        "--task", "graph",
        "--out", str(report_path),
    ])
    assert code == 0
    printed = capsys.readouterr().out
    assert "Acc@1" in printed and "100.00" in printed
    report = json.loads(report_path.read_text())
    assert report["total"]["acc_at_1"] == 100.0


def test_run_qa_and_eval(movie_dir, tmp_path, capsys):
    out = tmp_path / "qa_answers.json"
    args = run_args(movie_dir, out, queries="qa_queries.json")
    args[0] = "run-qa"
    assert main(args) == 0
    answers = json.loads(out.read_text())
    assert all({"query_id", "chosen_option", "option_confidences"} <= set(a) for a in answers)
    code = main([
        "eval",
        "--results", str(out),
        "--gold", str(movie_dir / "qa_gold.json"),
        "--task", "qa",
    ])
    assert code == 0
    assert "100.00" in capsys.readouterr().out


def test_record_scores_then_file_backend_reproduces_answers(movie_dir, tmp_path):
    out_live = tmp_path / "live.json"
    recorded = tmp_path / "recorded_scores.json"
    assert main(run_args(movie_dir, out_live, extra=["--record-scores", str(recorded)])) == 0
    out_replay = tmp_path / "replay.json"
    replay_args = [
        a if a != "mock" else "file"
        for a in run_args(movie_dir, out_replay, backend="mock")
    ]
    truth_at = replay_args.index("--truth")
    replay_args[truth_at:truth_at + 2] = ["--scores", str(recorded)]
    assert main(replay_args) == 0
    assert out_live.read_bytes() == out_replay.read_bytes()


def test_rerun_from_manifest_is_identical(movie_dir, tmp_path):
    out = tmp_path / "answers.json"
    assert main(run_args(movie_dir, out)) == 0
    redo = tmp_path / "redo.json"
    assert main(["run", "--from-manifest", str(out) + ".manifest.json", "--out", str(redo)]) == 0
    assert out.read_bytes() == redo.read_bytes()


def test_compare_identical_runs_gives_zero_delta(movie_dir, tmp_path, capsys):
    out = tmp_path / "answers.json"
    main(run_args(movie_dir, out))
    report = tmp_path / "report.json"
    main(["eval", "--results", str(out), "--gold", str(movie_dir / "gold.json"),
          "--task", "graph", "--out", str(report)])
    capsys.readouterr()
    delta_out = tmp_path / "delta.json"
    code = main(["compare", "--clean", str(report), "--noisy", str(report), "--out", str(delta_out)])
    assert code == 0
    assert "+0.00" in capsys.readouterr().out
    doc = json.loads(delta_out.read_text())
    assert doc["total"]["metrics"]["Acc@1"]["delta"] == 0.0


def test_flag_beats_config_file(movie_dir, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"top_k": 3, "subtitle_window_s": 20.0}))
    out = tmp_path / "answers.json"
    assert main(run_args(movie_dir, out, extra=["--config", str(config), "--top-k", "2"])) == 0
    manifest = json.loads((tmp_path / "answers.json.manifest.json").read_text())
    assert manifest["config"]["top_k"] == 2  # flag wins
    assert manifest["config"]["subtitle_window_s"] == 20.0  # file beats default


def test_unknown_flag_exits_1(capsys):
    assert main(["run", "--bogus-flag", "x"]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_config_key_exits_1(movie_dir, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"frames_per_second": 24}))
    out = tmp_path / "answers.json"
    assert main(run_args(movie_dir, out, extra=["--config", str(config)])) == 1


def test_mock_without_truth_exits_1(movie_dir, tmp_path):
    args = run_args(movie_dir, tmp_path / "a.json")
    truth_at = args.index("--truth")
    del args[truth_at:truth_at + 2]
    assert main(args) == 1


def test_validation_error_exits_1(movie_dir, tmp_path):
    args = run_args(movie_dir, tmp_path / "a.json")
    args[args.index(str(movie_dir / "features.jsonl"))] = str(movie_dir / "missing.jsonl")
    assert main(args) == 1


def test_unreachable_remote_exits_2(movie_dir, tmp_path):
    args = run_args(movie_dir, tmp_path / "a.json", backend="remote",
                    extra=["--endpoint", "http://127.0.0.1:1"])
    args = [a for a in args if a != "--truth" and "truth.json" not in a]
    assert main(args) == 2


def test_missing_score_strict_policy_exits_2(movie_dir, tmp_path):
    empty_scores = tmp_path / "scores.json"
    empty_scores.write_text(json.dumps({"records": []}))
    args = run_args(movie_dir, tmp_path / "a.json", backend="file",
                    extra=["--scores", str(empty_scores)])
    args = [a for a in args if a != "--truth" and "truth.json" not in a]
    assert main(args) == 2


def test_gen_infeasible_spec_exits_1(tmp_path):
    code = main(["gen", "--out", str(tmp_path / "x"), "--frames", "2", "--queries", "30"])
    assert code == 1
