"""Verifier supervision: path labels from gold answers, step labels by
comparing intermediate results against the positive paths.

A negative path's steps are scanned in order; a step stays positive while
some step anywhere in any positive path is equivalent to it, and the
first step with no equivalent turns that step and every later one
negative.  Equivalence is pluggable: exact intermediate-value match for
arithmetic, bidirectional NLI entailment for prose.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import requests

from .core import (
    NormalizedAnswer,
    Question,
    ReasoningPath,
    Step,
    StepLabel,
    normalize_answer,
    step_spans,
)
from .generation import load_paths

logger = logging.getLogger(__name__)

_LABEL_CHARS = {StepLabel.POSITIVE: "+", StepLabel.NEGATIVE: "-", StepLabel.UNLABELED: "?"}
_CHAR_LABELS = {v: k for k, v in _LABEL_CHARS.items()}


class OracleError(RuntimeError):
    """The equivalence oracle could not answer (transport or endpoint failure)."""


class OracleKind(str, Enum):
    EXACT_VALUE = "exact_value"
    NLI_ENDPOINT = "nli_endpoint"


def _normalized_text(text: str) -> str:
    return " ".join(text.lower().split()).rstrip(".!?")


@dataclass
class EquivalenceOracle:
    """Decides whether two reasoning steps are the same computation.

    exact_value: both intermediate results present and numerically equal;
    steps without results match only other result-less steps with
    identical normalized text (prevents vacuous matches).

    nli_endpoint: entailment probability above `threshold` in both
    directions, via the POST /nli API.
    """

    kind: OracleKind = OracleKind.EXACT_VALUE
    threshold: float = 0.5
    endpoint_url: str | None = None
    timeout: float = 30.0

    def equivalent(self, a: Step, b: Step) -> bool:
        if self.kind is OracleKind.EXACT_VALUE:
            if a.intermediate_result is not None and b.intermediate_result is not None:
                return a.intermediate_result == b.intermediate_result
            if a.intermediate_result is None and b.intermediate_result is None:
                return _normalized_text(a.text) == _normalized_text(b.text)
            return False
        return (
            self._entailment(a.text, b.text) > self.threshold
            and self._entailment(b.text, a.text) > self.threshold
        )

    def _entailment(self, premise: str, hypothesis: str) -> float:
        if not self.endpoint_url:
            raise OracleError("nli oracle requires an endpoint_url")
        try:
            response = requests.post(
                f"{self.endpoint_url.rstrip('/')}/nli",
                json={"premise": premise, "hypothesis": hypothesis},
                timeout=self.timeout,
            )
            response.raise_for_status()
            return float(response.json()["entailment"])
        except (requests.RequestException, KeyError, TypeError, ValueError) as exc:
            raise OracleError(f"nli endpoint failed: {exc}") from exc


def steps_equivalent(a: Step, b: Step, oracle: EquivalenceOracle) -> bool:
    return oracle.equivalent(a, b)


def label_path(path: ReasoningPath, gold: NormalizedAnswer) -> bool:
    """True iff the path's final answer matches gold; answerless paths are false."""
    if path.final_answer is None:
        return False
    return path.final_answer == normalize_answer(gold)


def label_steps(
    negative_path: ReasoningPath,
    positive_paths: Sequence[ReasoningPath],
    oracle: EquivalenceOracle,
) -> list[StepLabel]:
    """Label a negative path's steps against the positive paths.

    Position-independent: a step is positive when ANY step of ANY
    positive path is equivalent to it.  From the first step with no
    equivalent onward, everything is negative.
    """
    if not positive_paths:
        raise ValueError("label_steps requires at least one positive path")
    if not negative_path.steps:
        raise ValueError("label_steps requires a path with at least one step")
    positive_steps = [step for path in positive_paths for step in path.steps]
    labels: list[StepLabel] = []
    diverged = False
    for step in negative_path.steps:
        if diverged:
            labels.append(StepLabel.NEGATIVE)
            continue
        if any(oracle.equivalent(step, pos) for pos in positive_steps):
            labels.append(StepLabel.POSITIVE)
        else:
            diverged = True
            labels.append(StepLabel.NEGATIVE)
    return labels


@dataclass
class TrainingRecord:
    question_id: str
    question_text: str
    path: ReasoningPath
    path_label: bool
    step_labels: list[StepLabel]

    def __post_init__(self) -> None:
        if len(self.step_labels) != len(self.path.steps):
            raise ValueError(
                f"step_labels length {len(self.step_labels)} != "
                f"step count {len(self.path.steps)}"
            )


def build_training_set(
    cache_path: str | Path,
    questions: Sequence[Question],
    oracle: EquivalenceOracle,
) -> list[TrainingRecord]:
    """Turn every cached path into a supervision record.

    Positive paths get all-positive step labels.  Negative paths are
    step-labeled against the question's positive paths; when a question
    has no positive path its negative records stay unlabeled at the step
    level.  Records whose oracle calls fail are dropped and counted.
    """
    records: list[TrainingRecord] = []
    dropped = 0
    for question in sorted(questions, key=lambda q: q.id):
        if question.gold_answer is None:
            raise ValueError(f"question {question.id!r} has no gold answer")
        paths = load_paths(cache_path, question.id, question.task_kind)
        if not paths:
            logger.warning("no cached paths for question %s", question.id)
            continue
        positives = [p for p in paths if label_path(p, question.gold_answer)]
        for path in paths:
            is_positive = label_path(path, question.gold_answer)
            if is_positive:
                labels = [StepLabel.POSITIVE] * len(path.steps)
            elif positives and path.steps:
                try:
                    labels = label_steps(path, positives, oracle)
                except OracleError as exc:
                    dropped += 1
                    logger.warning(
                        "dropping record %s/%d/%d: %s",
                        path.question_id,
                        path.prompt_id,
                        path.sample_index,
                        exc,
                    )
                    continue
            elif positives:
                labels = []
            else:
                labels = [StepLabel.UNLABELED] * len(path.steps)
            records.append(
                TrainingRecord(
                    question_id=question.id,
                    question_text=question.text,
                    path=path,
                    path_label=is_positive,
                    step_labels=labels,
                )
            )
    if dropped:
        logger.warning("dropped %d record(s) due to oracle failures", dropped)
    return records


def encode_step_labels(labels: Sequence[StepLabel]) -> str:
    return "".join(_LABEL_CHARS[label] for label in labels)


def decode_step_labels(encoded: str) -> list[StepLabel]:
    return [_CHAR_LABELS[ch] for ch in encoded]


def save_training_records(records: Sequence[TrainingRecord], path: str | Path) -> None:
    """Write the training-set JSONL consumed by verifier trainers.

    Each line: question id/text, the path key and raw text, per-step text
    with spans and intermediate results, the path label, and step labels
    encoded as a "+"/"-"/"?" string aligned to the steps.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            spans = step_spans(record.path.raw_text, record.path.steps)
            fh.write(
                json.dumps(
                    {
                        "question_id": record.question_id,
                        "question_text": record.question_text,
                        "prompt_id": record.path.prompt_id,
                        "sample_index": record.path.sample_index,
                        "raw_text": record.path.raw_text,
                        "final_answer": record.path.final_answer,
                        "path_label": record.path_label,
                        "steps": [
                            {
                                "text": step.text,
                                "intermediate_result": step.intermediate_result,
                                "span": list(span),
                            }
                            for step, span in zip(record.path.steps, spans)
                        ],
                        "step_labels": encode_step_labels(record.step_labels),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_training_records(path: str | Path) -> list[TrainingRecord]:
    records: list[TrainingRecord] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            labels = decode_step_labels(row["step_labels"])
            steps = [
                Step(
                    index=i,
                    text=s["text"],
                    intermediate_result=s["intermediate_result"],
                    label=labels[i] if i < len(labels) else StepLabel.UNLABELED,
                )
                for i, s in enumerate(row["steps"])
            ]
            path_obj = ReasoningPath(
                question_id=row["question_id"],
                prompt_id=int(row["prompt_id"]),
                sample_index=int(row["sample_index"]),
                raw_text=row["raw_text"],
                steps=steps,
                final_answer=row.get("final_answer"),
            )
            records.append(
                TrainingRecord(
                    question_id=row["question_id"],
                    question_text=row["question_text"],
                    path=path_obj,
                    path_label=bool(row["path_label"]),
                    step_labels=labels,
                )
            )
    return records
