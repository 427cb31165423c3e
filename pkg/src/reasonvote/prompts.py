"""Prompt construction: diverse exemplar sampling and self-teaching.

A run uses M1 prompts, each holding K exemplars drawn without replacement
from the pool; the same exemplar may reappear across prompts.  Whole-prompt
duplicates (same exemplar set) are re-drawn so the M1 prompts stay pairwise
distinct.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from .core import Exemplar, Question, TaskKind, normalize_answer

if TYPE_CHECKING:  # pragma: no cover
    from .generation import GenerationClient, RunConfig

logger = logging.getLogger(__name__)

_MAX_REDRAWS = 100


class PoolExhaustedError(RuntimeError):
    """The exemplar pool cannot supply the requested prompts."""


@dataclass
class ExemplarPool:
    exemplars: list[Exemplar] = field(default_factory=list)
    rng_seed: int = 0

    def __post_init__(self) -> None:
        seen: set[tuple[str, str]] = set()
        for ex in self.exemplars:
            key = (ex.question_text, ex.reasoning_text)
            if key in seen:
                raise ValueError(f"duplicate exemplar for question {ex.question_text!r}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.exemplars)


@dataclass(frozen=True)
class Prompt:
    prompt_id: int
    exemplars: tuple[Exemplar, ...]
    rendered_text: str


def render_exemplar(exemplar: Exemplar) -> str:
    return (
        f"Q: {exemplar.question_text}\n"
        f"A: {exemplar.reasoning_text} The answer is {exemplar.answer_text}.\n\n"
    )


def _question_with_candidates(question: Question) -> str:
    text = question.text
    if not question.candidates:
        return text
    listing = ", ".join(question.candidates)
    if question.task_kind is TaskKind.RELATION:
        phrase = f"The possible relationships are: {listing}."
    else:
        phrase = f"The possible answers are: {listing}."
    if phrase.split(":")[0] in text:
        return text
    return f"{text} {phrase}"


def build_prompts(pool: ExemplarPool, k: int, m1: int, seed: int) -> list[Prompt]:
    """Draw m1 pairwise-distinct prompts of k exemplars each.

    Deterministic for a given seed.  Raises PoolExhaustedError when the
    pool is smaller than k or no fresh exemplar set shows up within the
    re-draw budget.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(pool) < k:
        raise PoolExhaustedError(f"pool has {len(pool)} exemplars, need at least {k}")
    rng = random.Random(seed)
    prompts: list[Prompt] = []
    seen_sets: set[frozenset[int]] = set()
    for prompt_id in range(m1):
        for _ in range(_MAX_REDRAWS):
            indices = rng.sample(range(len(pool)), k)
            key = frozenset(indices)
            if key not in seen_sets:
                seen_sets.add(key)
                break
        else:
            raise PoolExhaustedError(
                f"no unused exemplar set of size {k} found after {_MAX_REDRAWS} draws "
                f"(pool size {len(pool)}, prompts built {prompt_id})"
            )
        exemplars = tuple(pool.exemplars[i] for i in indices)
        rendered = "".join(render_exemplar(ex) for ex in exemplars)
        prompts.append(Prompt(prompt_id=prompt_id, exemplars=exemplars, rendered_text=rendered))
    return prompts


def render_prompt(prompt: Prompt, question: Question) -> str:
    """Full completion context: exemplar blocks, then the open question."""
    return f"{prompt.rendered_text}Q: {_question_with_candidates(question)}\nA:"


def bootstrap_pool(
    seed_pool: ExemplarPool,
    unlabeled: list[Question],
    generator: "GenerationClient",
    config: "RunConfig",
) -> ExemplarPool:
    """Grow the pool by self-teaching.

    For each gold-labeled question, sample one reasoning path from a
    seed-pool prompt and keep it as a pseudo exemplar iff its answer
    matches the gold answer.  Generation failures skip the question and
    are logged; the batch never aborts.
    """
    from .generation import GenerationError, sample_paths

    for question in unlabeled:
        if question.gold_answer is None:
            raise ValueError(f"question {question.id!r} has no gold answer")

    merged = list(seed_pool.exemplars)
    seen = {(ex.question_text, ex.reasoning_text) for ex in merged}
    skipped: list[str] = []
    added = 0
    for offset, question in enumerate(sorted(unlabeled, key=lambda q: q.id)):
        prompt = build_prompts(seed_pool, config.k, 1, seed=config.seed + offset)[0]
        try:
            completion = sample_paths(render_prompt(prompt, question), 1, config, generator)[0]
        except GenerationError as exc:
            skipped.append(question.id)
            logger.warning("bootstrap skipped question %s: %s", question.id, exc)
            continue
        from .core import parse_path

        path = parse_path(question.id, 0, 0, completion, question.task_kind)
        gold = normalize_answer(question.gold_answer, question.task_kind)
        if path.final_answer is None or path.final_answer != gold:
            continue
        reasoning = " ".join(step.text for step in path.steps)
        if not reasoning:
            skipped.append(question.id)
            logger.warning("bootstrap skipped question %s: empty reasoning", question.id)
            continue
        key = (question.text, reasoning)
        if key in seen:
            continue
        seen.add(key)
        merged.append(
            Exemplar(
                question_text=question.text,
                reasoning_text=reasoning,
                answer_text=path.final_answer,
                source="pseudo",
            )
        )
        added += 1
    if skipped:
        logger.info("bootstrap skipped %d question(s): %s", len(skipped), ", ".join(skipped))
    logger.info("bootstrap added %d pseudo exemplar(s)", added)
    return ExemplarPool(exemplars=merged, rng_seed=seed_pool.rng_seed)


def load_pool(path: str | Path, rng_seed: int = 0) -> ExemplarPool:
    """Read a JSON Lines pool file ({question, reasoning, answer, source})."""
    exemplars = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            exemplars.append(
                Exemplar(
                    question_text=row["question"],
                    reasoning_text=row["reasoning"],
                    answer_text=row["answer"],
                    source=row.get("source", "seed"),
                )
            )
    return ExemplarPool(exemplars=exemplars, rng_seed=rng_seed)


def save_pool(pool: ExemplarPool, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in pool.exemplars:
            fh.write(
                json.dumps(
                    {
                        "question": ex.question_text,
                        "reasoning": ex.reasoning_text,
                        "answer": ex.answer_text,
                        "source": ex.source,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
