"""Dataset loading, accuracy evaluation, and ablation sweeps.

Datasets are JSONL rows {id, question, answer, candidates?, task_kind?};
one generic schema covers every benchmark, with converters expected to
produce it upstream.  Evaluation is a pure function of (cache, scores,
method): repeated runs produce byte-identical reports.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .aggregation import (
    AggregateResult,
    AggregationMethod,
    MissingScoreError,
    VerifierScore,
    aggregate,
    align_scores,
    read_score_file,
)
from .core import Question, ReasoningPath, TaskKind, normalize_answer
from .generation import cache_shape, load_paths_by_question
from .labeling import TrainingRecord


class SweepError(ValueError):
    """A requested M exceeds the paths available in the cache."""


@dataclass
class EvalReport:
    dataset_name: str
    method: AggregationMethod
    m1: int
    m2: int
    accuracy: float
    n_questions: int
    per_question: list[dict]

    def to_json(self) -> str:
        payload = {
            "dataset_name": self.dataset_name,
            "method": self.method.value,
            "m1": self.m1,
            "m2": self.m2,
            "accuracy": self.accuracy,
            "n_questions": self.n_questions,
            "per_question": self.per_question,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        row = json.loads(text)
        return cls(
            dataset_name=row["dataset_name"],
            method=AggregationMethod(row["method"]),
            m1=int(row["m1"]),
            m2=int(row["m2"]),
            accuracy=float(row["accuracy"]),
            n_questions=int(row["n_questions"]),
            per_question=row["per_question"],
        )


@dataclass
class DiversityStats:
    avg_distinct_chains: float
    avg_distinct_answers: float


def load_dataset(path: str | Path) -> list[Question]:
    """Read a dataset JSONL file into Questions with canonical answers.

    task_kind defaults to multiple_choice when candidates are present and
    arithmetic otherwise; an explicit task_kind field wins.
    """
    questions: list[Question] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            candidates = row.get("candidates")
            if "task_kind" in row:
                kind = TaskKind(row["task_kind"])
            elif candidates:
                kind = TaskKind.MULTIPLE_CHOICE
            else:
                kind = TaskKind.ARITHMETIC
            norm_candidates = (
                tuple(normalize_answer(c, kind) for c in candidates) if candidates else None
            )
            gold = row.get("answer")
            questions.append(
                Question(
                    id=str(row["id"]),
                    text=row["question"],
                    gold_answer=normalize_answer(str(gold), kind) if gold is not None else None,
                    candidates=norm_candidates,
                    task_kind=kind,
                )
            )
    return questions


def _kinds(questions: Sequence[Question]) -> dict[str, TaskKind]:
    return {q.id: q.task_kind for q in questions}


def _score_table(
    scores_path: str | Path | None,
    method: AggregationMethod,
    by_question: dict[str, list[ReasoningPath]],
) -> dict[tuple[str, int, int], VerifierScore] | None:
    """Read the score file once and verify it covers every cached path."""
    if method is AggregationMethod.VOTING:
        return None
    if scores_path is None:
        raise ValueError(f"method {method.value} requires a scores file")
    table = read_score_file(scores_path)
    missing = sorted(
        p.sort_key()
        for paths in by_question.values()
        for p in paths
        if p.sort_key() not in table
    )
    if missing:
        raise MissingScoreError(missing)
    return table


def _aggregate_question(
    paths: list[ReasoningPath],
    method: AggregationMethod,
    table: dict[tuple[str, int, int], VerifierScore] | None,
) -> AggregateResult:
    scores = align_scores(table, paths) if table is not None else None
    return aggregate(paths, method, scores)


def evaluate(
    questions: Sequence[Question],
    cache_path: str | Path,
    scores_path: str | Path | None = None,
    method: AggregationMethod = AggregationMethod.VOTING,
    dataset_name: str = "dataset",
) -> EvalReport:
    """Aggregate each question's paths and score exact-match accuracy."""
    by_question = load_paths_by_question(cache_path, _kinds(questions))
    table = _score_table(scores_path, method, by_question)
    per_question: list[dict] = []
    correct_total = 0
    for question in sorted(questions, key=lambda q: q.id):
        paths = by_question.get(question.id, [])
        result = _aggregate_question(paths, method, table)
        gold = question.gold_answer
        correct = result.chosen is not None and gold is not None and result.chosen == gold
        correct_total += int(correct)
        per_question.append(
            {"id": question.id, "chosen": result.chosen, "gold": gold, "correct": correct}
        )
    m1, m2 = cache_shape(cache_path)
    n = len(per_question)
    return EvalReport(
        dataset_name=dataset_name,
        method=method,
        m1=m1,
        m2=m2,
        accuracy=correct_total / n if n else 0.0,
        n_questions=n,
        per_question=per_question,
    )


def _round_robin(paths: list[ReasoningPath]) -> list[ReasoningPath]:
    # Small-M truncations should still span every prompt, so selection
    # interleaves prompts: sample 0 of each prompt, then sample 1, ...
    return sorted(paths, key=lambda p: (p.sample_index, p.prompt_id))


def sweep_m(
    questions: Sequence[Question],
    cache_path: str | Path,
    scores_path: str | Path | None,
    method: AggregationMethod,
    ms: Sequence[int],
) -> list[tuple[int, float]]:
    """Accuracy when only the first M paths per question are aggregated."""
    by_question = load_paths_by_question(cache_path, _kinds(questions))
    table = _score_table(scores_path, method, by_question)
    ordered = {qid: _round_robin(paths) for qid, paths in by_question.items()}
    available = min((len(paths) for paths in ordered.values()), default=0)
    results: list[tuple[int, float]] = []
    for m in ms:
        if m < 1 or m > available:
            raise SweepError(f"M={m} outside available range 1..{available}")
        correct = 0
        n = 0
        for question in sorted(questions, key=lambda q: q.id):
            selected = ordered.get(question.id, [])[:m]
            result = _aggregate_question(selected, method, table)
            n += 1
            if result.chosen is not None and result.chosen == question.gold_answer:
                correct += 1
        results.append((m, correct / n if n else 0.0))
    return results


def diversity_stats(
    cache_path: str | Path,
    questions: Sequence[Question] | None = None,
) -> DiversityStats:
    """Average distinct intermediate-result chains and final answers per question.

    Chain identity includes the final answer (the chain's last computed
    value), so distinct answers never exceed distinct chains; answerless
    paths count as one distinct answer value.
    """
    kinds = _kinds(questions) if questions else TaskKind.ARITHMETIC
    by_question = load_paths_by_question(cache_path, kinds)
    if not by_question:
        return DiversityStats(0.0, 0.0)
    chain_counts: list[int] = []
    answer_counts: list[int] = []
    for paths in by_question.values():
        chains = {(p.chain, p.final_answer) for p in paths}
        answers = {p.final_answer for p in paths}
        chain_counts.append(len(chains))
        answer_counts.append(len(answers))
    n = len(by_question)
    return DiversityStats(
        avg_distinct_chains=sum(chain_counts) / n,
        avg_distinct_answers=sum(answer_counts) / n,
    )


def subsample_training(
    records: Sequence[TrainingRecord], fraction: float, seed: int
) -> list[TrainingRecord]:
    """Keep a uniform question-level subsample of the training records."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    question_ids = sorted({r.question_id for r in records})
    keep_count = int(len(question_ids) * fraction + 0.5)
    rng = random.Random(seed)
    keep = set(rng.sample(question_ids, keep_count))
    return [r for r in records if r.question_id in keep]


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "chosen", "gold", "correct"])
        for row in report.per_question:
            writer.writerow([row["id"], row["chosen"], row["gold"], int(row["correct"])])
        writer.writerow([])
        writer.writerow(["dataset", "method", "m1", "m2", "n_questions", "accuracy"])
        writer.writerow(
            [
                report.dataset_name,
                report.method.value,
                report.m1,
                report.m2,
                report.n_questions,
                f"{report.accuracy:.4f}",
            ]
        )


def write_sweep_csv(points: Sequence[tuple[int, float]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "accuracy"])
        for m, accuracy in points:
            writer.writerow([m, f"{accuracy:.4f}"])


def summary_table(reports: Sequence[EvalReport]) -> tuple[list[str], list[str], dict]:
    """(methods, datasets, accuracy lookup) for the method x dataset table."""
    methods: list[str] = []
    datasets: list[str] = []
    cells: dict[tuple[str, str], float] = {}
    for report in reports:
        if report.method.value not in methods:
            methods.append(report.method.value)
        if report.dataset_name not in datasets:
            datasets.append(report.dataset_name)
        cells[(report.method.value, report.dataset_name)] = report.accuracy
    return methods, datasets, cells


def write_summary(reports: Sequence[EvalReport], path: str | Path, fmt: str = "csv") -> None:
    """Method x dataset accuracy table, as CSV or a Markdown table."""
    methods, datasets, cells = summary_table(reports)
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", *datasets])
            for method in methods:
                writer.writerow(
                    [method]
                    + [
                        f"{cells[(method, ds)]:.4f}" if (method, ds) in cells else ""
                        for ds in datasets
                    ]
                )
    elif fmt == "md":
        lines = ["| Method | " + " | ".join(datasets) + " |"]
        lines.append("|" + "---|" * (len(datasets) + 1))
        for method in methods:
            row = [
                f"{cells[(method, ds)] * 100:.1f}" if (method, ds) in cells else "-"
                for ds in datasets
            ]
            lines.append(f"| {method} | " + " | ".join(row) + " |")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
