"""Answer aggregation over scored reasoning paths.

Three methods share one result shape:

- voting: the most frequent final answer wins (self-consistency).
- verifier: the answer of the single highest-scored path wins.
- voting_verifier: per answer, sum the verifier probabilities of the
  paths producing it; the answer with the largest weighted vote wins.

Answerless paths carry zero weight everywhere.  Ties break
deterministically: larger weight, then larger raw count, then the
numerically (or lexicographically) smallest canonical answer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .core import NormalizedAnswer, ReasoningPath


class MissingScoreError(KeyError):
    """A score file does not cover every requested path key."""

    def __init__(self, missing: list[tuple[str, int, int]]):
        self.missing = missing
        preview = ", ".join("/".join(map(str, key)) for key in missing[:10])
        suffix = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        super().__init__(f"missing scores for {len(missing)} path(s): {preview}{suffix}")


class AlignmentError(ValueError):
    """Scores do not line up 1:1 with paths (or steps within a path)."""


class AggregationMethod(str, Enum):
    VOTING = "voting"
    VERIFIER = "verifier"
    VOTING_VERIFIER = "voting_verifier"

    @classmethod
    def parse(cls, name: str) -> "AggregationMethod":
        return cls(name.replace("-", "_"))


@dataclass
class VerifierScore:
    path_score: float
    step_scores: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        for value in [self.path_score, *self.step_scores]:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"score {value} outside [0, 1]")


@dataclass
class Tally:
    count: int = 0
    weight: float = 0.0


@dataclass
class AggregateResult:
    chosen: NormalizedAnswer | None
    tallies: dict[NormalizedAnswer, Tally]
    method: AggregationMethod


def _answer_sort_key(answer: str) -> tuple[int, float, str]:
    # Numeric answers order by value ahead of non-numeric ones.
    try:
        return (0, float(answer), answer)
    except ValueError:
        return (1, 0.0, answer)


def _choose(tallies: dict[str, Tally]) -> NormalizedAnswer | None:
    if not tallies:
        return None
    return min(
        tallies,
        key=lambda ans: (-tallies[ans].weight, -tallies[ans].count, _answer_sort_key(ans)),
    )


def _check_alignment(paths: Sequence[ReasoningPath], scores: Sequence[VerifierScore]) -> None:
    if len(paths) != len(scores):
        raise AlignmentError(f"{len(paths)} paths but {len(scores)} scores")
    for path, score in zip(paths, scores):
        if score.step_scores and len(score.step_scores) != len(path.steps):
            raise AlignmentError(
                f"path {path.sort_key()}: {len(score.step_scores)} step scores "
                f"for {len(path.steps)} steps"
            )


def majority_vote(paths: Sequence[ReasoningPath]) -> AggregateResult:
    """Most frequent final answer; answerless paths are excluded."""
    tallies: dict[str, Tally] = {}
    for path in paths:
        if path.final_answer is None:
            continue
        tally = tallies.setdefault(path.final_answer, Tally())
        tally.count += 1
        tally.weight += 1.0
    return AggregateResult(
        chosen=_choose(tallies), tallies=tallies, method=AggregationMethod.VOTING
    )


def voting_verifier(
    paths: Sequence[ReasoningPath], scores: Sequence[VerifierScore]
) -> AggregateResult:
    """Answer with the largest sum of verifier probabilities over its paths."""
    _check_alignment(paths, scores)
    tallies: dict[str, Tally] = {}
    for path, score in zip(paths, scores):
        if path.final_answer is None:
            continue
        tally = tallies.setdefault(path.final_answer, Tally())
        tally.count += 1
        tally.weight += score.path_score
    return AggregateResult(
        chosen=_choose(tallies), tallies=tallies, method=AggregationMethod.VOTING_VERIFIER
    )


def verifier_argmax(
    paths: Sequence[ReasoningPath], scores: Sequence[VerifierScore]
) -> AggregateResult:
    """Answer of the single highest-scored path (first wins on ties)."""
    _check_alignment(paths, scores)
    tallies: dict[str, Tally] = {}
    best: str | None = None
    best_score = float("-inf")
    for path, score in zip(paths, scores):
        if path.final_answer is None:
            continue
        tally = tallies.setdefault(path.final_answer, Tally())
        tally.count += 1
        tally.weight = max(tally.weight, score.path_score)
        if score.path_score > best_score:
            best_score = score.path_score
            best = path.final_answer
    return AggregateResult(chosen=best, tallies=tallies, method=AggregationMethod.VERIFIER)


def aggregate(
    paths: Sequence[ReasoningPath],
    method: AggregationMethod,
    scores: Sequence[VerifierScore] | None = None,
) -> AggregateResult:
    if method is AggregationMethod.VOTING:
        return majority_vote(paths)
    if scores is None:
        raise ValueError(f"method {method.value} requires verifier scores")
    if method is AggregationMethod.VERIFIER:
        return verifier_argmax(paths, scores)
    return voting_verifier(paths, scores)


def save_scores(
    entries: Sequence[tuple[tuple[str, int, int], VerifierScore]], path: str | Path
) -> None:
    """Write a score file: one JSON line per (question, prompt, sample) key."""
    with open(path, "w", encoding="utf-8") as fh:
        for (question_id, prompt_id, sample_index), score in entries:
            fh.write(
                json.dumps(
                    {
                        "question_id": question_id,
                        "prompt_id": prompt_id,
                        "sample_index": sample_index,
                        "path_score": score.path_score,
                        "step_scores": score.step_scores,
                    }
                )
                + "\n"
            )


def read_score_file(path: str | Path) -> dict[tuple[str, int, int], VerifierScore]:
    scores: dict[tuple[str, int, int], VerifierScore] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            key = (row["question_id"], int(row["prompt_id"]), int(row["sample_index"]))
            scores[key] = VerifierScore(
                path_score=float(row["path_score"]),
                step_scores=[float(s) for s in row.get("step_scores", [])],
            )
    return scores


def load_scores(
    score_path: str | Path, keys: Sequence[tuple[str, int, int]]
) -> list[VerifierScore]:
    """One score per key, in key order; missing keys raise MissingScoreError."""
    table = read_score_file(score_path)
    missing = [key for key in keys if key not in table]
    if missing:
        raise MissingScoreError(missing)
    return [table[key] for key in keys]


def align_scores(
    table: dict[tuple[str, int, int], VerifierScore], paths: Sequence[ReasoningPath]
) -> list[VerifierScore]:
    """Select scores for `paths` from a key table, validating alignment."""
    missing = [p.sort_key() for p in paths if p.sort_key() not in table]
    if missing:
        raise MissingScoreError(missing)
    scores = [table[p.sort_key()] for p in paths]
    _check_alignment(paths, scores)
    return scores


def scores_for_paths(
    score_path: str | Path, paths: Sequence[ReasoningPath]
) -> list[VerifierScore]:
    """Load scores aligned to `paths`, validating step-score lengths."""
    return align_scores(read_score_file(score_path), paths)
