"""Completion fan-out with an append-only, resumable JSONL cache.

Every sampled completion is cached as one JSON line keyed by
(question_id, prompt_id, sample_index).  Re-running a generation pass
only requests keys that are missing, so interrupted batch runs resume
without re-paying for work already done.  Post-processing orders records
by key, never by arrival, so parallel fan-out does not affect results.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol

import requests

from .core import Question, ReasoningPath, TaskKind, parse_path
from .prompts import Prompt, render_prompt

logger = logging.getLogger(__name__)

_MAX_ATTEMPTS = 3


class ParseWarning(UserWarning):
    """A malformed cache line was skipped."""


class GenerationError(RuntimeError):
    """A sampling request failed after retries.

    Carries the hash of the offending prompt and whatever completions
    arrived before the failure; partial work is surfaced, not dropped.
    """

    def __init__(self, message: str, prompt_hash: str = "", partial: list[str] | None = None):
        super().__init__(message)
        self.prompt_hash = prompt_hash
        self.partial = partial if partial is not None else []


class CompletionRequestError(RuntimeError):
    """Non-retryable endpoint rejection (HTTP 4xx other than 429)."""


class GenerationClient(Protocol):
    """Minimal completion-endpoint contract.

    `start_index` tells deterministic clients which sample positions are
    being filled (used on cache resume); stochastic backends ignore it.
    """

    def complete(
        self,
        prompt: str,
        n: int,
        *,
        temperature: float,
        max_tokens: int,
        stop: list[str],
        start_index: int = 0,
    ) -> list[str]: ...


@dataclass
class RunConfig:
    m1: int = 5
    m2: int = 20
    k: int = 5
    temperature: float = 0.5
    stop_sequence: str = "\n\nQ:"
    max_tokens: int = 256
    parallelism: int = 1
    seed: int = 0
    endpoint_url: str = ""

    def __post_init__(self) -> None:
        if self.m1 < 1 or self.m2 < 1:
            raise ValueError("m1 and m2 must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    @property
    def total_paths(self) -> int:
        return self.m1 * self.m2


@dataclass
class GenerationRecord:
    question_id: str
    prompt_id: int
    sample_index: int
    raw_completion: str
    timestamp: float = 0.0
    model_name: str = "unknown"

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.question_id, self.prompt_id, self.sample_index)

    def to_json(self) -> str:
        return json.dumps(
            {
                "question_id": self.question_id,
                "prompt_id": self.prompt_id,
                "sample_index": self.sample_index,
                "raw_completion": self.raw_completion,
                "timestamp": self.timestamp,
                "model_name": self.model_name,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "GenerationRecord":
        row = json.loads(line)
        return cls(
            question_id=row["question_id"],
            prompt_id=int(row["prompt_id"]),
            sample_index=int(row["sample_index"]),
            raw_completion=row["raw_completion"],
            timestamp=float(row.get("timestamp", 0.0)),
            model_name=row.get("model_name", "unknown"),
        )


class HttpCompletionClient:
    """Client for the POST /complete API.

    Request: {prompt, n, temperature, max_tokens, stop} -> {completions}.
    A bearer token is read from COMPLETION_API_TOKEN when set.  429/5xx
    responses raise retryable errors; other 4xx raise
    CompletionRequestError and are not retried.
    """

    def __init__(
        self,
        endpoint_url: str,
        model_name: str = "unknown",
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ):
        self.endpoint_url = endpoint_url.rstrip("/")
        self.model_name = model_name
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(
        self,
        prompt: str,
        n: int,
        *,
        temperature: float,
        max_tokens: int,
        stop: list[str],
        start_index: int = 0,
    ) -> list[str]:
        headers = {}
        token = os.environ.get("COMPLETION_API_TOKEN")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        response = self.session.post(
            f"{self.endpoint_url}/complete",
            json={
                "prompt": prompt,
                "n": n,
                "temperature": temperature,
                "max_tokens": max_tokens,
                "stop": stop,
            },
            headers=headers,
            timeout=self.timeout,
        )
        if response.status_code == 429 or response.status_code >= 500:
            raise requests.HTTPError(f"retryable status {response.status_code}")
        if response.status_code >= 400:
            raise CompletionRequestError(
                f"endpoint rejected request with status {response.status_code}"
            )
        completions = response.json().get("completions")
        if not isinstance(completions, list):
            raise CompletionRequestError("malformed response: missing completions list")
        return [str(c) for c in completions]


def _prompt_hash(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()[:16]


def _truncate(text: str, stop_sequence: str) -> str:
    if stop_sequence and stop_sequence in text:
        return text.split(stop_sequence)[0]
    return text


def sample_paths(
    prompt_text: str,
    n: int,
    config: RunConfig,
    client: GenerationClient,
    start_index: int = 0,
    retry_wait: float = 0.5,
) -> list[str]:
    """Sample n completions for one prompt, truncated at the stop sequence.

    Transport failures retry with exponential backoff; after three
    consecutive failures a GenerationError carries the prompt hash and
    any partial completions already received.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    collected: list[str] = []
    failures = 0
    while len(collected) < n:
        remaining = n - len(collected)
        try:
            batch = client.complete(
                prompt_text,
                remaining,
                temperature=config.temperature,
                max_tokens=config.max_tokens,
                stop=[config.stop_sequence],
                start_index=start_index + len(collected),
            )
        except CompletionRequestError as exc:
            raise GenerationError(
                f"endpoint rejected prompt {_prompt_hash(prompt_text)}: {exc}",
                prompt_hash=_prompt_hash(prompt_text),
                partial=collected,
            ) from exc
        except Exception as exc:
            failures += 1
            if failures >= _MAX_ATTEMPTS:
                raise GenerationError(
                    f"sampling failed after {failures} attempts "
                    f"for prompt {_prompt_hash(prompt_text)}: {exc}",
                    prompt_hash=_prompt_hash(prompt_text),
                    partial=collected,
                ) from exc
            time.sleep(retry_wait * 2 ** (failures - 1))
            continue
        if not batch:
            failures += 1
            if failures >= _MAX_ATTEMPTS:
                raise GenerationError(
                    f"endpoint returned no completions for prompt {_prompt_hash(prompt_text)}",
                    prompt_hash=_prompt_hash(prompt_text),
                    partial=collected,
                )
            continue
        failures = 0
        collected.extend(_truncate(text, config.stop_sequence) for text in batch[:remaining])
    return collected


def read_cache(cache_path: str | Path) -> list[GenerationRecord]:
    """Load all cache records, skipping malformed lines with a ParseWarning."""
    records: list[GenerationRecord] = []
    path = Path(cache_path)
    if not path.exists():
        return records
    bad = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(GenerationRecord.from_json(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                bad += 1
                warnings.warn(
                    f"skipping malformed cache line {lineno} in {path}", ParseWarning,
                    stacklevel=2,
                )
    if bad:
        logger.warning("skipped %d malformed line(s) in %s", bad, path)
    return records


def _missing_runs(present: set[int], m2: int) -> list[tuple[int, int]]:
    """Contiguous (start, count) runs of sample indices absent from the cache."""
    runs: list[tuple[int, int]] = []
    start = None
    for i in range(m2):
        if i in present:
            if start is not None:
                runs.append((start, i - start))
                start = None
        elif start is None:
            start = i
    if start is not None:
        runs.append((start, m2 - start))
    return runs


def generate_dataset(
    questions: list[Question],
    prompts: list[Prompt],
    config: RunConfig,
    client: GenerationClient,
    cache_path: str | Path,
    retry_wait: float = 0.5,
) -> Path:
    """Fill the cache with |questions| x m1 x m2 completions.

    Resume is idempotent: keys already cached are never re-requested, and
    missing keys are requested by contiguous runs so deterministic
    clients reproduce an uninterrupted run exactly.  Failed groups are
    logged and skipped (their partial completions are still cached).
    """
    if len(prompts) != config.m1:
        raise ValueError(f"expected {config.m1} prompts, got {len(prompts)}")
    path = Path(cache_path)
    present: dict[tuple[str, int], set[int]] = {}
    for record in read_cache(path):
        present.setdefault((record.question_id, record.prompt_id), set()).add(
            record.sample_index
        )

    tasks = []
    for question in questions:
        for prompt in prompts:
            have = present.get((question.id, prompt.prompt_id), set())
            runs = _missing_runs(have, config.m2)
            if runs:
                tasks.append((question, prompt, runs))

    model_name = getattr(client, "model_name", "unknown")
    skips = 0
    write_lock = threading.Lock()

    def fetch(question: Question, prompt: Prompt, runs: list[tuple[int, int]]):
        rendered = render_prompt(prompt, question)
        results: list[tuple[int, str]] = []
        error: GenerationError | None = None
        for start, count in runs:
            try:
                batch = sample_paths(
                    rendered, count, config, client, start_index=start, retry_wait=retry_wait
                )
            except GenerationError as exc:
                results.extend((start + i, text) for i, text in enumerate(exc.partial))
                error = exc
                break
            results.extend((start + i, text) for i, text in enumerate(batch))
        return question, prompt, results, error

    with open(path, "a", encoding="utf-8") as out:

        def write(question: Question, prompt: Prompt, indexed: list[tuple[int, str]]) -> None:
            with write_lock:
                for sample_index, text in indexed:
                    record = GenerationRecord(
                        question_id=question.id,
                        prompt_id=prompt.prompt_id,
                        sample_index=sample_index,
                        raw_completion=text,
                        timestamp=time.time(),
                        model_name=model_name,
                    )
                    out.write(record.to_json() + "\n")
                    out.flush()

        if config.parallelism == 1:
            for question, prompt, runs in tasks:
                question, prompt, indexed, error = fetch(question, prompt, runs)
                write(question, prompt, indexed)
                if error is not None:
                    skips += 1
                    logger.warning(
                        "skipping question %s prompt %d: %s", question.id, prompt.prompt_id, error
                    )
        else:
            with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                futures = [pool.submit(fetch, q, p, runs) for q, p, runs in tasks]
                for future in as_completed(futures):
                    question, prompt, indexed, error = future.result()
                    write(question, prompt, indexed)
                    if error is not None:
                        skips += 1
                        logger.warning(
                            "skipping question %s prompt %d: %s",
                            question.id,
                            prompt.prompt_id,
                            error,
                        )
    if skips:
        logger.warning("generation finished with %d skipped group(s)", skips)
    return path


def load_paths(
    cache_path: str | Path,
    question_id: str | None = None,
    task_kind: TaskKind = TaskKind.ARITHMETIC,
) -> list[ReasoningPath]:
    """Parse cached completions into ReasoningPaths ordered by key."""
    records = [
        r for r in read_cache(cache_path) if question_id is None or r.question_id == question_id
    ]
    records.sort(key=lambda r: r.key)
    return [
        parse_path(r.question_id, r.prompt_id, r.sample_index, r.raw_completion, task_kind)
        for r in records
    ]


def load_paths_by_question(
    cache_path: str | Path,
    task_kinds: Mapping[str, TaskKind] | TaskKind = TaskKind.ARITHMETIC,
) -> dict[str, list[ReasoningPath]]:
    """Group parsed paths by question id, each list ordered by key."""
    by_question: dict[str, list[GenerationRecord]] = {}
    for record in read_cache(cache_path):
        by_question.setdefault(record.question_id, []).append(record)
    result: dict[str, list[ReasoningPath]] = {}
    for question_id, records in by_question.items():
        records.sort(key=lambda r: r.key)
        if isinstance(task_kinds, TaskKind):
            kind = task_kinds
        else:
            kind = task_kinds.get(question_id, TaskKind.ARITHMETIC)
        result[question_id] = [
            parse_path(r.question_id, r.prompt_id, r.sample_index, r.raw_completion, kind)
            for r in records
        ]
    return result


def cache_shape(cache_path: str | Path) -> tuple[int, int]:
    """(m1, m2) implied by the cache: distinct prompts, max samples per prompt."""
    prompt_ids: set[int] = set()
    counts: dict[tuple[str, int], int] = {}
    for record in read_cache(cache_path):
        prompt_ids.add(record.prompt_id)
        key = (record.question_id, record.prompt_id)
        counts[key] = max(counts.get(key, 0), record.sample_index + 1)
    if not prompt_ids:
        return (0, 0)
    return (len(prompt_ids), max(counts.values()))


def iter_cache_keys(records: Iterable[GenerationRecord]) -> list[tuple[str, int, int]]:
    return sorted(r.key for r in records)
