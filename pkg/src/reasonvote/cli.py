"""Command-line entry point tying the pipeline together.

    reasonvote generate  --dataset d.jsonl --pool pool.jsonl --m1 5 --m2 20 \
                         --k 5 --temp 0.5 --out cache.jsonl --endpoint URL
    reasonvote label     --cache cache.jsonl --dataset d.jsonl --oracle exact --out train.jsonl
    reasonvote score     --cache cache.jsonl --dataset d.jsonl --endpoint URL --out scores.jsonl
    reasonvote aggregate --cache cache.jsonl --scores scores.jsonl --method voting-verifier --out agg.jsonl
    reasonvote evaluate  --dataset d.jsonl --cache cache.jsonl --method voting --out report.json
    reasonvote sweep-m   --dataset d.jsonl --cache cache.jsonl --method voting --ms 5,10,20 --out sweep.csv
    reasonvote diversity --cache cache.jsonl --out diversity.csv
    reasonvote subsample --data train.jsonl --fraction 0.25 --seed 0 --out subset.jsonl
    reasonvote report    --inputs r1.json r2.json --format md --out table.md
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import requests

from . import figures
from .aggregation import (
    AggregationMethod,
    VerifierScore,
    aggregate,
    align_scores,
    read_score_file,
    save_scores,
)
from .core import step_spans
from .generation import HttpCompletionClient, RunConfig, generate_dataset, load_paths_by_question
from .harness import (
    EvalReport,
    diversity_stats,
    evaluate,
    load_dataset,
    subsample_training,
    sweep_m,
    write_report_csv,
    write_summary,
    write_sweep_csv,
)
from .labeling import (
    EquivalenceOracle,
    OracleKind,
    build_training_set,
    load_training_records,
    save_training_records,
)
from .prompts import build_prompts, load_pool


def _add_generate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("generate", help="sample reasoning paths into a cache")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--m1", type=int, default=5)
    p.add_argument("--m2", type=int, default=20)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--temp", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--stop", default="\n\nQ:")


def _add_label(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("label", help="build verifier training records from a cache")
    p.add_argument("--cache", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--oracle", choices=["exact", "nli"], default="exact")
    p.add_argument("--nli-endpoint", default=None)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)


def _add_score(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("score", help="score cached paths via a verifier endpoint")
    p.add_argument("--cache", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--out", required=True)


def _add_aggregate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("aggregate", help="pick one answer per question")
    p.add_argument("--cache", required=True)
    p.add_argument("--scores", default=None)
    p.add_argument("--method", choices=["voting", "verifier", "voting-verifier"], required=True)
    p.add_argument("--dataset", default=None, help="optional, for task-kind-aware parsing")
    p.add_argument("--out", required=True)


def _add_evaluate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("evaluate", help="accuracy of an aggregation method")
    p.add_argument("--dataset", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--scores", default=None)
    p.add_argument("--method", choices=["voting", "verifier", "voting-verifier"], default="voting")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", default=None, help="optional per-question CSV path")


def _add_sweep(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("sweep-m", help="accuracy at several path budgets")
    p.add_argument("--dataset", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--scores", default=None)
    p.add_argument("--method", choices=["voting", "verifier", "voting-verifier"], default="voting")
    p.add_argument("--ms", required=True, help="comma-separated M values, e.g. 5,10,20")
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--no-figures", action="store_true")


def _add_diversity(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("diversity", help="distinct chains/answers per question")
    p.add_argument("--cache", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--no-figures", action="store_true")


def _add_subsample(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("subsample", help="question-level subsample of training records")
    p.add_argument("--data", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def _add_report(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("report", help="method x dataset accuracy table from report JSONs")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--format", choices=["csv", "md"], default="csv")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")


def _figure_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_suffix(".png")


def _cmd_generate(args: argparse.Namespace) -> int:
    questions = load_dataset(args.dataset)
    pool = load_pool(args.pool)
    config = RunConfig(
        m1=args.m1,
        m2=args.m2,
        k=args.k,
        temperature=args.temp,
        stop_sequence=args.stop,
        max_tokens=args.max_tokens,
        parallelism=args.parallelism,
        seed=args.seed,
        endpoint_url=args.endpoint,
    )
    prompts = build_prompts(pool, config.k, config.m1, config.seed)
    client = HttpCompletionClient(args.endpoint)
    cache = generate_dataset(questions, prompts, config, client, args.out)
    print(f"cache written: {cache}")
    return 0


def _cmd_label(args: argparse.Namespace) -> int:
    questions = load_dataset(args.dataset)
    kind = OracleKind.EXACT_VALUE if args.oracle == "exact" else OracleKind.NLI_ENDPOINT
    oracle = EquivalenceOracle(
        kind=kind, threshold=args.threshold, endpoint_url=args.nli_endpoint
    )
    records = build_training_set(args.cache, questions, oracle)
    save_training_records(records, args.out)
    positives = sum(1 for r in records if r.path_label)
    print(f"{len(records)} training records ({positives} positive) -> {args.out}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    questions = {q.id: q for q in load_dataset(args.dataset)}
    kinds = {qid: q.task_kind for qid, q in questions.items()}
    by_question = load_paths_by_question(args.cache, kinds)
    endpoint = args.endpoint.rstrip("/")
    entries = []
    session = requests.Session()
    for question_id in sorted(by_question):
        question = questions.get(question_id)
        if question is None:
            continue
        for path in by_question[question_id]:
            spans = step_spans(path.raw_text, path.steps)
            response = session.post(
                f"{endpoint}/score",
                json={
                    "question": question.text,
                    "path": path.raw_text,
                    "step_spans": [list(s) for s in spans],
                },
                timeout=60,
            )
            response.raise_for_status()
            payload = response.json()
            entries.append(
                (
                    path.sort_key(),
                    VerifierScore(
                        path_score=float(payload["path_score"]),
                        step_scores=[float(s) for s in payload["step_scores"]],
                    ),
                )
            )
    save_scores(entries, args.out)
    print(f"{len(entries)} scores -> {args.out}")
    return 0


def _cmd_aggregate(args: argparse.Namespace) -> int:
    method = AggregationMethod.parse(args.method)
    kinds = (
        {q.id: q.task_kind for q in load_dataset(args.dataset)}
        if args.dataset
        else None
    )
    by_question = load_paths_by_question(args.cache, kinds if kinds is not None else {})
    table = None
    if method is not AggregationMethod.VOTING:
        if not args.scores:
            print("error: this method requires --scores", file=sys.stderr)
            return 2
        table = read_score_file(args.scores)
    with open(args.out, "w", encoding="utf-8") as fh:
        for question_id in sorted(by_question):
            paths = by_question[question_id]
            scores = align_scores(table, paths) if table is not None else None
            result = aggregate(paths, method, scores)
            fh.write(
                json.dumps(
                    {
                        "question_id": question_id,
                        "chosen": result.chosen,
                        "tallies": {
                            ans: {"count": t.count, "weight": t.weight}
                            for ans, t in sorted(result.tallies.items())
                        },
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"aggregated {len(by_question)} question(s) -> {args.out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    questions = load_dataset(args.dataset)
    report = evaluate(
        questions,
        args.cache,
        scores_path=args.scores,
        method=AggregationMethod.parse(args.method),
        dataset_name=Path(args.dataset).stem,
    )
    Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    if args.csv:
        write_report_csv(report, args.csv)
    print(
        f"{report.dataset_name} {report.method.value}: "
        f"accuracy {report.accuracy:.4f} over {report.n_questions} question(s)"
    )
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    questions = load_dataset(args.dataset)
    ms = [int(tok) for tok in args.ms.split(",") if tok.strip()]
    points = sweep_m(
        questions, args.cache, args.scores, AggregationMethod.parse(args.method), ms
    )
    write_sweep_csv(points, args.out)
    if not args.no_figures:
        figures.plot_sweep(points, _figure_path(args.out), title=Path(args.dataset).stem)
    for m, accuracy in points:
        print(f"M={m}: accuracy {accuracy:.4f}")
    return 0


def _cmd_diversity(args: argparse.Namespace) -> int:
    questions = load_dataset(args.dataset) if args.dataset else None
    stats = diversity_stats(args.cache, questions)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["avg_distinct_chains", "avg_distinct_answers"])
        writer.writerow([f"{stats.avg_distinct_chains:.4f}", f"{stats.avg_distinct_answers:.4f}"])
    if not args.no_figures:
        figures.plot_diversity(stats, _figure_path(args.out))
    print(
        f"avg distinct chains {stats.avg_distinct_chains:.2f}, "
        f"answers {stats.avg_distinct_answers:.2f}"
    )
    return 0


def _cmd_subsample(args: argparse.Namespace) -> int:
    records = load_training_records(args.data)
    subset = subsample_training(records, args.fraction, args.seed)
    save_training_records(subset, args.out)
    print(f"kept {len(subset)}/{len(records)} records -> {args.out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    reports = [
        EvalReport.from_json(Path(p).read_text(encoding="utf-8")) for p in args.inputs
    ]
    write_summary(reports, args.out, fmt=args.format)
    if not args.no_figures:
        figures.plot_summary(reports, _figure_path(args.out))
    print(f"summary table -> {args.out}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "label": _cmd_label,
    "score": _cmd_score,
    "aggregate": _cmd_aggregate,
    "evaluate": _cmd_evaluate,
    "sweep-m": _cmd_sweep,
    "diversity": _cmd_diversity,
    "subsample": _cmd_subsample,
    "report": _cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reasonvote",
        description="Diverse reasoning paths, verifier-weighted voting, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_label(sub)
    _add_score(sub)
    _add_aggregate(sub)
    _add_evaluate(sub)
    _add_sweep(sub)
    _add_diversity(sub)
    _add_subsample(sub)
    _add_report(sub)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
