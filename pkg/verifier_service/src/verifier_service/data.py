"""Training-file ingestion and input featurization.

The service consumes the pipeline's training-set JSONL: one record per
reasoning path with `question_text`, `raw_text`, `path_label`,
`final_answer`, per-step char spans, and step labels encoded as a
"+"/"-"/"?" string aligned to the steps.  Records are featurized into
(token ids, step token positions, labels); the question and path are
joined with a separator token and the model reads each step at its last
token.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

PAD_ID = 0
CLS_ID = 1
SEP_ID = 2
_RESERVED = 3

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class DataFormatError(ValueError):
    """A training record does not match the expected schema."""


@dataclass(frozen=True)
class TokenizerConfig:
    vocab_size: int = 8192


class HashTokenizer:
    """Deterministic hash-bucket tokenizer with char offsets.

    Stable across runs and platforms (md5-based), so saved models keep
    scoring identically after reload.
    """

    def __init__(self, config: TokenizerConfig = TokenizerConfig()):
        if config.vocab_size <= _RESERVED:
            raise ValueError("vocab_size must exceed the reserved id range")
        self.config = config

    def token_id(self, token: str) -> int:
        digest = hashlib.md5(token.lower().encode("utf-8")).hexdigest()
        return _RESERVED + int(digest, 16) % (self.config.vocab_size - _RESERVED)

    def encode(self, text: str) -> list[tuple[int, int, int]]:
        """(token_id, char_start, char_end) for each token."""
        return [
            (self.token_id(m.group(0)), m.start(), m.end())
            for m in _TOKEN_RE.finditer(text)
        ]


@dataclass
class StepAnnotation:
    span: tuple[int, int]
    label: float | None  # 1.0 positive, 0.0 negative, None unlabeled


@dataclass
class TrainingExample:
    question_id: str
    question_text: str
    path_text: str
    final_answer: str | None
    path_label: float
    steps: list[StepAnnotation] = field(default_factory=list)


def load_training_file(path: str | Path) -> list[TrainingExample]:
    examples: list[TrainingExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                labels = row["step_labels"]
                steps = row["steps"]
                if len(labels) != len(steps):
                    raise DataFormatError(
                        f"line {lineno}: {len(labels)} step labels for {len(steps)} steps"
                    )
                annotations = []
                for step_row, char in zip(steps, labels):
                    start, end = step_row["span"]
                    label = {"+": 1.0, "-": 0.0, "?": None}[char]
                    annotations.append(StepAnnotation(span=(int(start), int(end)), label=label))
                examples.append(
                    TrainingExample(
                        question_id=str(row["question_id"]),
                        question_text=row["question_text"],
                        path_text=row["raw_text"],
                        final_answer=row.get("final_answer"),
                        path_label=1.0 if row["path_label"] else 0.0,
                        steps=annotations,
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"line {lineno}: {exc}") from exc
    return examples


@dataclass
class Encoded:
    token_ids: list[int]
    step_positions: list[int | None]  # index into token_ids, None when truncated away


def encode_input(
    tokenizer: HashTokenizer,
    question: str,
    path_text: str,
    spans: list[tuple[int, int]],
    max_len: int,
) -> Encoded:
    """[CLS] question [SEP] path, with each span mapped to its last token.

    A span's readout position is the last path token overlapping it;
    spans that survive truncation but cover no token fall back to the
    closest earlier position.
    """
    question_tokens = tokenizer.encode(question)
    path_tokens = tokenizer.encode(path_text)
    ids = [CLS_ID] + [tid for tid, _, _ in question_tokens] + [SEP_ID]
    offset = len(ids)
    ids.extend(tid for tid, _, _ in path_tokens)
    ids = ids[:max_len]

    positions: list[int | None] = []
    for start, end in spans:
        position: int | None = None
        for i, (_, token_start, token_end) in enumerate(path_tokens):
            if offset + i >= max_len:
                break
            if token_start < end and token_end > start:
                position = offset + i
        if position is None:
            # No direct overlap: closest in-budget token before the span.
            for i, (_, _, token_end) in enumerate(path_tokens):
                if offset + i >= max_len:
                    break
                if token_end <= start:
                    position = offset + i
        positions.append(position)
    return Encoded(token_ids=ids, step_positions=positions)
