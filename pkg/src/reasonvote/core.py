"""Domain types and reasoning-path parsing shared by the whole pipeline.

Parsing conventions (applied uniformly everywhere):

- The final answer is announced by the marker "The answer is" (case
  insensitive); the last occurrence wins.  Completions without the marker
  are answerless, never an error.
- Steps are sentences.  A completion is split on sentence terminators and
  the sentence carrying the answer marker is dropped from the step list.
- A step's intermediate result is the number immediately after the last
  "=" in the sentence, after currency/comma stripping.  Unparseable
  results are None, never an error: generation output is noisy and
  parsing has to be total.
- Answer normalization strips "$", ",", "%" and trailing periods, renders
  numbers minimally ("18.0" -> "18") and lowercases everything else.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class TaskKind(str, Enum):
    ARITHMETIC = "arithmetic"
    MULTIPLE_CHOICE = "multiple_choice"
    RELATION = "relation"


class StepLabel(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNLABELED = "unlabeled"


# Canonical answer form: minimal decimal rendering for numbers, lowercased
# trimmed token otherwise.  Kept as a plain string; `normalize_answer` is
# idempotent so canonical strings can be re-normalized freely.
NormalizedAnswer = str

ANSWER_MARKER = "the answer is"

_INT_RE = re.compile(r"^[-+]?\d+$")
_NUMBER_RE = re.compile(r"[-+]?(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][-+]?\d+)?")
_RESULT_RE = re.compile(r"^[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_SENTENCE_END_RE = re.compile(r"[.!?](?=\s|$)")
_MARKER_RE = re.compile(re.escape(ANSWER_MARKER), re.IGNORECASE)


class NormalizationError(ValueError):
    """Raised when a candidate answer normalizes to the empty string."""


@dataclass(frozen=True)
class Question:
    """One task instance; `gold_answer` and `candidates` hold canonical forms."""

    id: str
    text: str
    gold_answer: NormalizedAnswer | None = None
    candidates: tuple[NormalizedAnswer, ...] | None = None
    task_kind: TaskKind = TaskKind.ARITHMETIC

    def __post_init__(self) -> None:
        if self.candidates is not None and self.gold_answer is not None:
            if self.gold_answer not in self.candidates:
                raise ValueError(
                    f"question {self.id!r}: gold answer {self.gold_answer!r} "
                    f"not among candidates {self.candidates!r}"
                )


@dataclass(frozen=True)
class Exemplar:
    """An annotated (question, reasoning, answer) triple for prompt blocks."""

    question_text: str
    reasoning_text: str
    answer_text: str
    source: str = "seed"  # "seed" or "pseudo"

    def __post_init__(self) -> None:
        if not self.reasoning_text.strip():
            raise ValueError("exemplar reasoning_text must be non-empty")
        if not self.answer_text.strip():
            raise ValueError("exemplar answer_text must be non-empty")
        if self.source not in ("seed", "pseudo"):
            raise ValueError(f"unknown exemplar source {self.source!r}")


@dataclass
class Step:
    index: int
    text: str
    intermediate_result: float | None = None
    label: StepLabel = StepLabel.UNLABELED


@dataclass
class ReasoningPath:
    """One sampled completion, parsed into steps and a final answer."""

    question_id: str
    prompt_id: int
    sample_index: int
    raw_text: str
    steps: list[Step] = field(default_factory=list)
    final_answer: NormalizedAnswer | None = None

    @property
    def chain(self) -> tuple[float, ...]:
        """Per-step intermediate results in order, skipping absent ones."""
        return tuple(
            s.intermediate_result for s in self.steps if s.intermediate_result is not None
        )

    def sort_key(self) -> tuple[str, int, int]:
        return (self.question_id, self.prompt_id, self.sample_index)


def _strip_symbols(text: str) -> str:
    cleaned = text.strip()
    for ch in "$,%":
        cleaned = cleaned.replace(ch, "")
    return cleaned.strip().rstrip(".").strip()


def _render_number(token: str) -> str | None:
    """Minimal decimal rendering, or None when the token is not a number."""
    if _INT_RE.match(token):
        return str(int(token))
    try:
        value = float(token)
    except ValueError:
        return None
    if value != value or value in (float("inf"), float("-inf")):
        return None
    if value.is_integer():
        return str(int(value))
    return repr(value)


def normalize_answer(text: str, task_kind: TaskKind = TaskKind.ARITHMETIC) -> NormalizedAnswer:
    """Canonicalize a raw answer string.

    Numbers lose currency symbols, thousands separators and trailing
    zeros; every other answer becomes a lowercased trimmed token.  For
    arithmetic tasks a non-numeric remainder falls back to the first
    numeric literal it contains ("18 eggs" -> "18").

    Raises NormalizationError when nothing is left after cleaning.
    """
    if not text.strip():
        raise NormalizationError("empty answer text")
    cleaned = _strip_symbols(text)
    if not cleaned:
        raise NormalizationError(f"answer {text!r} is empty after normalization")

    rendered = _render_number(cleaned)
    if rendered is not None:
        return rendered

    if task_kind is TaskKind.ARITHMETIC:
        match = _NUMBER_RE.search(cleaned)
        if match:
            rendered = _render_number(match.group(0))
            if rendered is not None:
                return rendered

    lowered = " ".join(cleaned.lower().split())
    if not lowered:
        raise NormalizationError(f"answer {text!r} is empty after normalization")
    return lowered


def extract_final_answer(
    raw_text: str, task_kind: TaskKind = TaskKind.ARITHMETIC
) -> NormalizedAnswer | None:
    """Normalized answer after the last "The answer is" marker, else None."""
    last = None
    for match in _MARKER_RE.finditer(raw_text):
        last = match
    if last is None:
        return None
    remainder = raw_text[last.end():]
    end = _SENTENCE_END_RE.search(remainder)
    if end:
        remainder = remainder[: end.start()]
    remainder = remainder.lstrip(" \t:")
    if not remainder.strip():
        return None
    try:
        return normalize_answer(remainder, task_kind)
    except NormalizationError:
        return None


def extract_intermediate_result(step_text: str) -> float | None:
    """Number immediately after the last "=", or None when nothing parses."""
    pos = step_text.rfind("=")
    if pos < 0:
        return None
    tail = step_text[pos + 1:].lstrip(" \t$")
    match = _RESULT_RE.match(tail)
    if not match:
        return None
    try:
        return float(match.group(0).replace(",", ""))
    except ValueError:
        return None


def segment_steps(raw_text: str) -> list[Step]:
    """Split a completion into sentence steps, excluding the answer sentence."""
    steps: list[Step] = []
    for sentence in _SENTENCE_SPLIT_RE.split(raw_text.strip()):
        sentence = sentence.strip()
        if not sentence or _MARKER_RE.search(sentence):
            continue
        steps.append(
            Step(
                index=len(steps),
                text=sentence,
                intermediate_result=extract_intermediate_result(sentence),
            )
        )
    return steps


def parse_path(
    question_id: str,
    prompt_id: int,
    sample_index: int,
    raw_text: str,
    task_kind: TaskKind = TaskKind.ARITHMETIC,
) -> ReasoningPath:
    """Parse one raw completion into a ReasoningPath."""
    return ReasoningPath(
        question_id=question_id,
        prompt_id=prompt_id,
        sample_index=sample_index,
        raw_text=raw_text,
        steps=segment_steps(raw_text),
        final_answer=extract_final_answer(raw_text, task_kind),
    )


def step_spans(raw_text: str, steps: list[Step]) -> list[tuple[int, int]]:
    """Character span of each step's text within the raw completion."""
    spans: list[tuple[int, int]] = []
    cursor = 0
    for step in steps:
        start = raw_text.find(step.text, cursor)
        if start < 0:
            raise ValueError(f"step text not found in completion: {step.text!r}")
        end = start + len(step.text)
        spans.append((start, end))
        cursor = end
    return spans
