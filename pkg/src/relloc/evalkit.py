"""Accuracy metrics, per-movie report tables and clean-vs-noisy comparison.

Graph-space answers are scored with Acc@n (gold within the first n ranked
entities); QA answers with plain accuracy. Percentages are rounded
half-up to two decimals. Reports group by movie with a totals row
computed from the concatenated results.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .errors import ValidationError


def round_half_up(value: float, digits: int = 2) -> float:
    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class GraphResult:
    query_id: str
    movie_id: str
    ranking: list[str]  # entity ids, best first
    gold: str

    def __post_init__(self):
        if self.gold not in self.ranking:
            raise ValidationError(
                f"query {self.query_id!r}: gold {self.gold!r} absent from the ranking universe"
            )


@dataclass(frozen=True)
class QaResult:
    query_id: str
    movie_id: str
    chosen_option: int
    n_options: int
    gold: int

    def __post_init__(self):
        if not 0 <= self.gold < self.n_options:
            raise ValidationError(
                f"query {self.query_id!r}: gold option {self.gold} outside 0..{self.n_options - 1}"
            )


def acc_at_n(results: list[GraphResult], n: int) -> float:
    """Percentage of queries whose gold lands in the first n ranked entities."""
    if not results:
        raise ValidationError("Acc@n undefined for an empty result set")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    hits = sum(1 for r in results if r.gold in r.ranking[:n])
    return round_half_up(100.0 * hits / len(results))


def qa_accuracy(results: list[QaResult]) -> float:
    if not results:
        raise ValidationError("accuracy undefined for an empty result set")
    correct = sum(1 for r in results if r.chosen_option == r.gold)
    return round_half_up(100.0 * correct / len(results))


@dataclass
class GraphReportRow:
    movie: str
    n_queries: int
    acc: dict[int, float]  # n -> Acc@n
    query_ids: list[str]


@dataclass
class QaReportRow:
    movie: str
    n_queries: int
    n_correct: int
    acc: float
    query_ids: list[str]


@dataclass
class Report:
    task: str  # "graph" | "qa"
    ns: tuple[int, ...]  # () for qa
    rows: list  # per-movie rows, movie-sorted
    total: object  # totals row over all results

    def to_dict(self) -> dict:
        if self.task == "graph":
            def row_dict(r: GraphReportRow) -> dict:
                return {
                    "movie": r.movie,
                    "n_queries": r.n_queries,
                    **{f"acc_at_{n}": r.acc[n] for n in self.ns},
                    "query_ids": r.query_ids,
                }
        else:
            def row_dict(r: QaReportRow) -> dict:
                return {
                    "movie": r.movie,
                    "n_queries": r.n_queries,
                    "n_correct": r.n_correct,
                    "acc": r.acc,
                    "query_ids": r.query_ids,
                }
        return {
            "task": self.task,
            "ns": list(self.ns),
            "rows": [row_dict(r) for r in self.rows],
            "total": row_dict(self.total),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Report":
        task = doc["task"]
        ns = tuple(doc["ns"])
        if task == "graph":
            def parse_row(raw: dict) -> GraphReportRow:
                return GraphReportRow(
                    movie=raw["movie"],
                    n_queries=int(raw["n_queries"]),
                    acc={n: float(raw[f"acc_at_{n}"]) for n in ns},
                    query_ids=[str(q) for q in raw["query_ids"]],
                )
        elif task == "qa":
            def parse_row(raw: dict) -> QaReportRow:
                return QaReportRow(
                    movie=raw["movie"],
                    n_queries=int(raw["n_queries"]),
                    n_correct=int(raw["n_correct"]),
                    acc=float(raw["acc"]),
                    query_ids=[str(q) for q in raw["query_ids"]],
                )
        else:
            raise ValidationError(f"unknown report task {task!r}")
        return cls(
            task=task,
            ns=ns,
            rows=[parse_row(r) for r in doc["rows"]],
            total=parse_row(doc["total"]),
        )

    def render_text(self) -> str:
        if self.task == "graph":
            header = ["Movie", "No.queries"] + [f"Acc@{n}" for n in self.ns]
            lines = [
                [r.movie, str(r.n_queries)] + [f"{r.acc[n]:.2f}" for n in self.ns]
                for r in self.rows + [self.total]
            ]
        else:
            header = ["Movie", "No.queries", "No.correct", "Acc"]
            lines = [
                [r.movie, str(r.n_queries), str(r.n_correct), f"{r.acc:.2f}"]
                for r in self.rows + [self.total]
            ]
        return _align(header, lines)


def _align(header: list[str], lines: list[list[str]]) -> str:
    widths = [max(len(h), *(len(row[i]) for row in lines)) for i, h in enumerate(header)]
    def fmt(row):
        return "  ".join(cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
                         for i, cell in enumerate(row))
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    body = [fmt(r) for r in lines[:-1]] + [rule, fmt(lines[-1])]
    return "\n".join([fmt(header), rule] + body)


def _by_movie(results):
    grouped: dict[str, list] = {}
    for result in results:
        grouped.setdefault(result.movie_id, []).append(result)
    return grouped


def build_graph_report(results: list[GraphResult], ns: tuple[int, ...] = (1, 2, 3)) -> Report:
    if not results:
        raise ValidationError("cannot build a report from no results")
    rows = []
    for movie in sorted(_by_movie(results)):
        movie_results = _by_movie(results)[movie]
        rows.append(
            GraphReportRow(
                movie=movie,
                n_queries=len(movie_results),
                acc={n: acc_at_n(movie_results, n) for n in ns},
                query_ids=sorted(r.query_id for r in movie_results),
            )
        )
    total = GraphReportRow(
        movie="Total",
        n_queries=len(results),
        acc={n: acc_at_n(results, n) for n in ns},
        query_ids=sorted(r.query_id for r in results),
    )
    return Report(task="graph", ns=ns, rows=rows, total=total)


def build_qa_report(results: list[QaResult]) -> Report:
    if not results:
        raise ValidationError("cannot build a report from no results")
    rows = []
    for movie in sorted(_by_movie(results)):
        movie_results = _by_movie(results)[movie]
        rows.append(
            QaReportRow(
                movie=movie,
                n_queries=len(movie_results),
                n_correct=sum(1 for r in movie_results if r.chosen_option == r.gold),
                acc=qa_accuracy(movie_results),
                query_ids=sorted(r.query_id for r in movie_results),
            )
        )
    total = QaReportRow(
        movie="Total",
        n_queries=len(results),
        n_correct=sum(1 for r in results if r.chosen_option == r.gold),
        acc=qa_accuracy(results),
        query_ids=sorted(r.query_id for r in results),
    )
    return Report(task="qa", ns=(), rows=rows, total=total)


@dataclass
class DeltaRow:
    movie: str
    n_queries: int
    deltas: dict[str, tuple[float, float, float]]  # metric -> (clean, noisy, noisy - clean)


@dataclass
class DeltaReport:
    task: str
    rows: list[DeltaRow]
    total: DeltaRow

    def to_dict(self) -> dict:
        def row_dict(r: DeltaRow) -> dict:
            return {
                "movie": r.movie,
                "n_queries": r.n_queries,
                "metrics": {
                    m: {"clean": c, "noisy": n, "delta": d}
                    for m, (c, n, d) in r.deltas.items()
                },
            }
        return {"task": self.task, "rows": [row_dict(r) for r in self.rows], "total": row_dict(self.total)}

    def render_text(self) -> str:
        metrics = list(self.total.deltas)
        header = ["Movie", "No.queries"] + [f"{m} (clean/noisy/delta)" for m in metrics]
        def cells(r: DeltaRow) -> list[str]:
            return [r.movie, str(r.n_queries)] + [
                f"{c:.2f} / {n:.2f} / {d:+.2f}" for c, n, d in (r.deltas[m] for m in metrics)
            ]
        return _align(header, [cells(r) for r in self.rows + [self.total]])


def _metric_map(row, task: str, ns: tuple[int, ...]) -> dict[str, float]:
    if task == "graph":
        return {f"Acc@{n}": row.acc[n] for n in ns}
    return {"Acc": row.acc}


def robustness_compare(clean: Report, noisy: Report) -> DeltaReport:
    """Per-metric (noisy - clean) deltas, per movie and in total.

    Both reports must cover the same task and exactly the same query sets.
    """
    if clean.task != noisy.task:
        raise ValidationError(f"cannot compare a {clean.task} report with a {noisy.task} report")
    if clean.ns != noisy.ns:
        raise ValidationError(f"reports use different n values: {clean.ns} vs {noisy.ns}")
    clean_rows = {r.movie: r for r in clean.rows}
    noisy_rows = {r.movie: r for r in noisy.rows}
    if set(clean_rows) != set(noisy_rows):
        raise ValidationError(
            f"reports cover different movies: {sorted(clean_rows)} vs {sorted(noisy_rows)}"
        )
    rows = []
    for movie in sorted(clean_rows):
        c_row, n_row = clean_rows[movie], noisy_rows[movie]
        if c_row.query_ids != n_row.query_ids:
            raise ValidationError(f"movie {movie!r}: reports cover different query sets")
        c_metrics = _metric_map(c_row, clean.task, clean.ns)
        n_metrics = _metric_map(n_row, clean.task, clean.ns)
        rows.append(
            DeltaRow(
                movie=movie,
                n_queries=c_row.n_queries,
                deltas={
                    m: (c_metrics[m], n_metrics[m], round_half_up(n_metrics[m] - c_metrics[m]))
                    for m in c_metrics
                },
            )
        )
    c_total = _metric_map(clean.total, clean.task, clean.ns)
    n_total = _metric_map(noisy.total, clean.task, clean.ns)
    total = DeltaRow(
        movie="Total",
        n_queries=clean.total.n_queries,
        deltas={
            m: (c_total[m], n_total[m], round_half_up(n_total[m] - c_total[m])) for m in c_total
        },
    )
    return DeltaReport(task=clean.task, rows=rows, total=total)


def join_answers_with_gold(answers: list[dict], gold: list[dict], task: str):
    """Merge a run's answer records with a gold file into result objects.

    Gold records look like {"query_id", "movie_id", "gold"}; the two files
    must cover exactly the same query ids.
    """
    gold_by_id = {}
    for record in gold:
        try:
            gold_by_id[str(record["query_id"])] = record
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad gold record {record!r}: {exc}") from exc
    answer_ids = {str(a.get("query_id")) for a in answers}
    if answer_ids != set(gold_by_id):
        missing = sorted(set(gold_by_id) ^ answer_ids)
        raise ValidationError(f"answers and gold cover different query ids (diff: {missing[:5]})")
    results = []
    for raw in answers:
        qid = str(raw["query_id"])
        gold_record = gold_by_id[qid]
        movie = str(gold_record.get("movie_id", "all"))
        if task == "graph":
            results.append(
                GraphResult(
                    query_id=qid,
                    movie_id=movie,
                    ranking=[str(e["entity_id"]) for e in raw["ranking"]],
                    gold=str(gold_record["gold"]),
                )
            )
        elif task == "qa":
            results.append(
                QaResult(
                    query_id=qid,
                    movie_id=movie,
                    chosen_option=int(raw["chosen_option"]),
                    n_options=len(raw["option_confidences"]),
                    gold=int(gold_record["gold"]),
                )
            )
        else:
            raise ValidationError(f"unknown task {task!r}")
    return results
