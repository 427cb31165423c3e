"""Fixture builders for the training-file schema the pipeline emits."""

from __future__ import annotations

import json

import pytest

from verifier_service.model import ModelConfig


def tiny_config(**overrides) -> ModelConfig:
    base = dict(
        vocab_size=512, dim=32, n_heads=2, n_layers=1, ffn_dim=64, max_len=128, dropout=0.0
    )
    base.update(overrides)
    return ModelConfig(**base)


def make_record(
    question_id: str,
    question_text: str,
    chain: list[int],
    answer: str | None,
    path_label: bool,
    step_labels: str,
    prompt_id: int = 0,
    sample_index: int = 0,
) -> dict:
    """One training-file row; spans are computed while assembling the text."""
    assert len(step_labels) == len(chain)
    sentences = [f"Then we get {chr(97 + i)} = {value}." for i, value in enumerate(chain)]
    steps = []
    raw = ""
    for sentence, value in zip(sentences, chain):
        start = len(raw)
        raw += sentence
        steps.append(
            {
                "text": sentence,
                "intermediate_result": float(value),
                "span": [start, len(raw)],
            }
        )
        raw += " "
    raw = raw + (f"The answer is {answer}." if answer is not None else "No idea.")
    return {
        "question_id": question_id,
        "question_text": question_text,
        "prompt_id": prompt_id,
        "sample_index": sample_index,
        "raw_text": raw,
        "final_answer": answer,
        "path_label": path_label,
        "steps": steps,
        "step_labels": step_labels,
    }


def write_training_file(path, rows: list[dict]):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


@pytest.fixture
def training_rows() -> list[dict]:
    """4 questions x 4 paths with both classes and mixed step labels."""
    rows = []
    for q in range(4):
        gold = str(10 + q)
        rows.append(make_record(f"q{q}", f"question {q}?", [7, 9, 10 + q], gold, True, "+++",
                                sample_index=0))
        rows.append(make_record(f"q{q}", f"question {q}?", [7, 9, 10 + q], gold, True, "+++",
                                sample_index=1, prompt_id=1))
        rows.append(make_record(f"q{q}", f"question {q}?", [7, 8], "8", False, "+-",
                                sample_index=2))
        rows.append(make_record(f"q{q}", f"question {q}?", [5], "5", False, "?",
                                sample_index=3, prompt_id=1))
    return rows


@pytest.fixture
def training_file(tmp_path, training_rows):
    return write_training_file(tmp_path / "train.jsonl", training_rows)
