from __future__ import annotations

import csv
import json

import pytest

from conftest import chain_text, json_server
from reasonvote.cli import main
from reasonvote.generation import GenerationRecord


@pytest.fixture
def workspace(tmp_path):
    """Dataset + cache + pool files for CLI runs."""
    dataset = tmp_path / "dataset.jsonl"
    with open(dataset, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"id": "q1", "question": "What is 2 + 3?", "answer": "5"}) + "\n")
        fh.write(json.dumps({"id": "q2", "question": "What is 4 * 4?", "answer": "16"}) + "\n")

    cache = tmp_path / "cache.jsonl"
    table = {"q1": ["5", "5", "6"], "q2": ["12", "16", "16"]}
    with open(cache, "w", encoding="utf-8") as fh:
        for qid, answers in table.items():
            for i, ans in enumerate(answers):
                record = GenerationRecord(qid, i % 2, i // 2, chain_text([int(ans)], ans))
                fh.write(record.to_json() + "\n")

    pool = tmp_path / "pool.jsonl"
    with open(pool, "w", encoding="utf-8") as fh:
        for i in range(4):
            fh.write(
                json.dumps(
                    {
                        "question": f"What is {i} + 1?",
                        "reasoning": f"{i} + 1 = {i + 1}.",
                        "answer": str(i + 1),
                        "source": "seed",
                    }
                )
                + "\n"
            )
    return tmp_path, dataset, cache, pool


def test_generate_via_http(workspace):
    tmp_path, dataset, _, pool = workspace

    def script(prompt, n):
        return [f"We get 1 + 1 = 2. The answer is 2." for _ in range(n)]

    from conftest import completion_server

    out = tmp_path / "generated.jsonl"
    with completion_server(script) as url:
        code = main(
            [
                "generate",
                "--dataset", str(dataset),
                "--pool", str(pool),
                "--m1", "2",
                "--m2", "3",
                "--k", "2",
                "--temp", "0.5",
                "--out", str(out),
                "--endpoint", url,
                "--parallelism", "2",
                "--seed", "9",
            ]
        )
    assert code == 0
    assert len(out.read_text(encoding="utf-8").splitlines()) == 12  # 2q x 2 x 3


def test_label_and_subsample(workspace, tmp_path):
    _, dataset, cache, _ = workspace
    train = tmp_path / "train.jsonl"
    assert main(["label", "--cache", str(cache), "--dataset", str(dataset),
                 "--oracle", "exact", "--out", str(train)]) == 0
    rows = [json.loads(line) for line in train.read_text(encoding="utf-8").splitlines()]
    assert len(rows) == 6
    assert {row["path_label"] for row in rows} == {True, False}

    subset = tmp_path / "subset.jsonl"
    assert main(["subsample", "--data", str(train), "--fraction", "0.5",
                 "--seed", "1", "--out", str(subset)]) == 0
    kept = {json.loads(line)["question_id"]
            for line in subset.read_text(encoding="utf-8").splitlines()}
    assert len(kept) == 1


def test_score_command_writes_score_file(workspace, tmp_path):
    _, dataset, cache, _ = workspace

    def handle(payload):
        n_steps = len(payload["step_spans"])
        return 200, {"path_score": 0.75, "step_scores": [0.5] * n_steps}

    scores = tmp_path / "scores.jsonl"
    with json_server({"/score": handle}) as url:
        assert main(["score", "--cache", str(cache), "--dataset", str(dataset),
                     "--endpoint", url, "--out", str(scores)]) == 0
    rows = [json.loads(line) for line in scores.read_text(encoding="utf-8").splitlines()]
    assert len(rows) == 6
    assert all(row["path_score"] == 0.75 for row in rows)
    assert all(len(row["step_scores"]) == 1 for row in rows)


def test_aggregate_voting_and_weighted(workspace, tmp_path):
    _, dataset, cache, _ = workspace
    out = tmp_path / "agg.jsonl"
    assert main(["aggregate", "--cache", str(cache), "--method", "voting",
                 "--out", str(out)]) == 0
    chosen = {json.loads(line)["question_id"]: json.loads(line)["chosen"]
              for line in out.read_text(encoding="utf-8").splitlines()}
    assert chosen == {"q1": "5", "q2": "16"}

    # Weighted aggregation with a score file that favors q2's "12".
    from reasonvote.aggregation import VerifierScore, save_scores
    from reasonvote.generation import load_paths_by_question

    entries = []
    for qid, paths in load_paths_by_question(cache).items():
        for p in paths:
            score = 0.95 if p.final_answer == "12" else 0.2
            entries.append((p.sort_key(), VerifierScore(path_score=score)))
    scores = tmp_path / "scores.jsonl"
    save_scores(entries, scores)
    weighted = tmp_path / "weighted.jsonl"
    assert main(["aggregate", "--cache", str(cache), "--scores", str(scores),
                 "--method", "voting-verifier", "--out", str(weighted)]) == 0
    chosen = {json.loads(line)["question_id"]: json.loads(line)["chosen"]
              for line in weighted.read_text(encoding="utf-8").splitlines()}
    assert chosen["q2"] == "12"  # 0.95 > 2 * 0.2

    missing_scores = tmp_path / "missing.jsonl"
    assert main(["aggregate", "--cache", str(cache), "--method", "verifier",
                 "--out", str(missing_scores)]) == 2


def test_evaluate_sweep_diversity_report(workspace, tmp_path):
    _, dataset, cache, _ = workspace
    report_json = tmp_path / "report.json"
    report_csv = tmp_path / "report.csv"
    assert main(["evaluate", "--dataset", str(dataset), "--cache", str(cache),
                 "--method", "voting", "--out", str(report_json),
                 "--csv", str(report_csv)]) == 0
    payload = json.loads(report_json.read_text(encoding="utf-8"))
    assert payload["accuracy"] == 1.0
    assert report_csv.exists()

    sweep_csv = tmp_path / "sweep.csv"
    assert main(["sweep-m", "--dataset", str(dataset), "--cache", str(cache),
                 "--method", "voting", "--ms", "1,3", "--out", str(sweep_csv)]) == 0
    with open(sweep_csv, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["m", "accuracy"]
    assert len(rows) == 3
    assert sweep_csv.with_suffix(".png").exists()  # figure alongside the CSV

    diversity_csv = tmp_path / "diversity.csv"
    assert main(["diversity", "--cache", str(cache), "--dataset", str(dataset),
                 "--out", str(diversity_csv)]) == 0
    assert diversity_csv.exists()
    assert diversity_csv.with_suffix(".png").exists()

    table_md = tmp_path / "table.md"
    assert main(["report", "--inputs", str(report_json), "--format", "md",
                 "--out", str(table_md)]) == 0
    assert table_md.read_text(encoding="utf-8").startswith("| Method |")
    assert table_md.with_suffix(".png").exists()

    plain_csv = tmp_path / "plain_table.csv"
    assert main(["report", "--inputs", str(report_json), "--format", "csv",
                 "--out", str(plain_csv), "--no-figures"]) == 0
    assert plain_csv.exists()
    assert not plain_csv.with_suffix(".png").exists()


def test_unknown_command_rejected():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
