from __future__ import annotations

import hashlib
import json

import pytest

from conftest import FlakyClient, ScriptedClient, completion_server, json_server
from reasonvote.core import Question
from reasonvote.generation import (
    CompletionRequestError,
    GenerationError,
    GenerationRecord,
    HttpCompletionClient,
    ParseWarning,
    RunConfig,
    cache_shape,
    generate_dataset,
    load_paths,
    load_paths_by_question,
    read_cache,
    sample_paths,
)
from reasonvote.prompts import ExemplarPool, build_prompts
from reasonvote.core import Exemplar


def small_pool(n: int = 6) -> ExemplarPool:
    return ExemplarPool(
        exemplars=[
            Exemplar(
                question_text=f"What is {i} + 1?",
                reasoning_text=f"{i} + 1 = {i + 1}.",
                answer_text=str(i + 1),
            )
            for i in range(n)
        ]
    )


def questions(n: int) -> list[Question]:
    return [Question(id=f"q{i}", text=f"What is {i} * 2?", gold_answer=str(2 * i)) for i in range(n)]


def scripted(prompt: str, index: int) -> str:
    digest = hashlib.sha256(f"{prompt}|{index}".encode()).hexdigest()[:6]
    return f"We find 1 + {index} = {index + 1}. The answer is {digest}."


class TestRunConfig:
    def test_total_paths(self):
        assert RunConfig(m1=5, m2=20).total_paths == 100

    @pytest.mark.parametrize("kwargs", [
        {"m1": 0}, {"m2": 0}, {"temperature": -0.1}, {"parallelism": 0},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            RunConfig(**kwargs)


class TestSamplePaths:
    def test_scripted_single(self):
        config = RunConfig(m1=1, m2=1, temperature=0.0)
        client = ScriptedClient(lambda p, i: "echo. The answer is 1.")
        assert sample_paths("prompt", 1, config, client) == ["echo. The answer is 1."]

    def test_twenty_samples(self):
        config = RunConfig(m1=1, m2=20)
        client = ScriptedClient(scripted)
        out = sample_paths("prompt", 20, config, client)
        assert len(out) == 20
        assert len(set(out)) == 20  # index-dependent script

    def test_partial_then_permanent_failure(self):
        config = RunConfig()
        client = FlakyClient(good=["a", "b"])
        with pytest.raises(GenerationError) as err:
            sample_paths("prompt", 20, config, client, retry_wait=0.0)
        assert err.value.partial == ["a", "b"]
        assert err.value.prompt_hash

    def test_recovers_after_transient_failures(self):
        config = RunConfig()
        state = {"fails": 2}

        class Recovering:
            model_name = "recovering"

            def complete(self, prompt, n, *, temperature, max_tokens, stop, start_index=0):
                if state["fails"] > 0:
                    state["fails"] -= 1
                    raise ConnectionError("blip")
                return [f"c{start_index + i}" for i in range(n)]

        out = sample_paths("prompt", 3, config, Recovering(), retry_wait=0.0)
        assert out == ["c0", "c1", "c2"]

    def test_stop_sequence_truncation(self):
        config = RunConfig(stop_sequence="\n\nQ:")
        client = ScriptedClient(lambda p, i: "The answer is 4.\n\nQ: next question")
        assert sample_paths("prompt", 1, config, client) == ["The answer is 4."]

    def test_fatal_request_error_not_retried(self):
        config = RunConfig()
        calls = {"n": 0}

        class Rejecting:
            model_name = "rejecting"

            def complete(self, prompt, n, **kwargs):
                calls["n"] += 1
                raise CompletionRequestError("bad request")

        with pytest.raises(GenerationError):
            sample_paths("prompt", 2, config, Rejecting(), retry_wait=0.0)
        assert calls["n"] == 1

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            sample_paths("prompt", 0, RunConfig(), ScriptedClient(scripted))


class TestGenerateDataset:
    def test_record_count(self, tmp_path):
        config = RunConfig(m1=5, m2=20, k=2, parallelism=4, seed=1)
        prompts = build_prompts(small_pool(), config.k, config.m1, config.seed)
        cache = tmp_path / "cache.jsonl"
        generate_dataset(questions(3), prompts, config, ScriptedClient(scripted), cache)
        assert len(read_cache(cache)) == 300

    def test_self_consistency_shape(self, tmp_path):
        config = RunConfig(m1=1, m2=100, k=2, seed=1)
        prompts = build_prompts(small_pool(), config.k, config.m1, config.seed)
        cache = tmp_path / "cache.jsonl"
        generate_dataset(questions(1), prompts, config, ScriptedClient(scripted), cache)
        assert cache_shape(cache) == (1, 100)
        assert len(load_paths(cache, "q0")) == 100

    def test_resume_requests_only_missing(self, tmp_path):
        config = RunConfig(m1=5, m2=20, k=2, seed=1)
        prompts = build_prompts(small_pool(), config.k, config.m1, config.seed)
        cache = tmp_path / "cache.jsonl"
        full_client = ScriptedClient(scripted)
        generate_dataset(questions(3), prompts, config, full_client, cache)
        assert full_client.served == 300

        truncated = tmp_path / "resume.jsonl"
        lines = cache.read_text(encoding="utf-8").splitlines()
        truncated.write_text("\n".join(lines[:150]) + "\n", encoding="utf-8")
        resume_client = ScriptedClient(scripted)
        generate_dataset(questions(3), prompts, config, resume_client, truncated)
        assert resume_client.served == 150
        assert len(read_cache(truncated)) == 300

    def test_resume_reproduces_uninterrupted_run(self, tmp_path):
        config = RunConfig(m1=2, m2=3, k=2, seed=5)
        prompts = build_prompts(small_pool(), config.k, config.m1, config.seed)
        baseline = tmp_path / "baseline.jsonl"
        generate_dataset(questions(2), prompts, config, ScriptedClient(scripted), baseline)
        base_keys = {
            r.key: r.raw_completion for r in read_cache(baseline)
        }

        lines = baseline.read_text(encoding="utf-8").splitlines()
        for boundary in (0, 1, 7, len(lines) - 1):
            partial = tmp_path / f"partial{boundary}.jsonl"
            partial.write_text("".join(line + "\n" for line in lines[:boundary]), encoding="utf-8")
            generate_dataset(questions(2), prompts, config, ScriptedClient(scripted), partial)
            resumed = {r.key: r.raw_completion for r in read_cache(partial)}
            assert resumed == base_keys

    def test_failed_group_logged_and_skipped(self, tmp_path):
        config = RunConfig(m1=2, m2=3, k=2, seed=5)
        prompts = build_prompts(small_pool(), config.k, config.m1, config.seed)

        class FailsOneGroup:
            model_name = "partial"

            def complete(self, prompt, n, *, temperature, max_tokens, stop, start_index=0):
                if prompt.rstrip().endswith("What is 1 * 2?\nA:"):
                    raise ConnectionError("group down")
                return [scripted(prompt, start_index + i) for i in range(n)]

        cache = tmp_path / "cache.jsonl"
        generate_dataset(questions(2), prompts, config, FailsOneGroup(), cache, retry_wait=0.0)
        records = read_cache(cache)
        # q1's two groups both fail; q0 is complete.
        assert len(records) == 6
        assert {r.question_id for r in records} == {"q0"}

    def test_prompt_count_must_match_config(self, tmp_path):
        config = RunConfig(m1=3, m2=2, k=2, seed=1)
        prompts = build_prompts(small_pool(), config.k, 2, config.seed)
        with pytest.raises(ValueError):
            generate_dataset(questions(1), prompts, config, ScriptedClient(scripted),
                             tmp_path / "c.jsonl")


class TestLoadPaths:
    def _write_cache(self, path, n=100, answer="18"):
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(n):
                record = GenerationRecord(
                    question_id="q1",
                    prompt_id=i % 5,
                    sample_index=i // 5,
                    raw_completion=f"First 2 + {i} = {i + 2}. The answer is {answer}.",
                )
                fh.write(record.to_json() + "\n")

    def test_loads_all_records(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        self._write_cache(cache)
        assert len(load_paths(cache, "q1")) == 100

    def test_answerless_record(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        record = GenerationRecord("q1", 0, 0, "No marker here, just text.")
        cache.write_text(record.to_json() + "\n", encoding="utf-8")
        (path,) = load_paths(cache, "q1")
        assert path.final_answer is None

    def test_corrupted_line_warns_and_skips(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        self._write_cache(cache, n=100)
        lines = cache.read_text(encoding="utf-8").splitlines()
        lines[37] = '{"question_id": "q1", "broken": tru'
        cache.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.warns(ParseWarning):
            paths = load_paths(cache, "q1")
        assert len(paths) == 99

    def test_ordering_by_prompt_then_sample(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        rows = [(1, 0), (0, 1), (0, 0), (1, 1)]
        with open(cache, "w", encoding="utf-8") as fh:
            for pid, idx in rows:
                fh.write(GenerationRecord("q1", pid, idx, "The answer is 1.").to_json() + "\n")
        keys = [(p.prompt_id, p.sample_index) for p in load_paths(cache, "q1")]
        assert keys == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_completions_cached_unaltered(self, tmp_path):
        config = RunConfig(m1=1, m2=2, k=1, seed=0)
        prompts = build_prompts(small_pool(1), config.k, config.m1, config.seed)
        weird = 'unicode → "quotes" and\ttabs; the answer is 18.'

        client = ScriptedClient(lambda p, i: weird + str(i))
        cache = tmp_path / "cache.jsonl"
        generate_dataset(questions(1), prompts, config, client, cache)
        for record in read_cache(cache):
            expected = weird + str(record.sample_index)
            assert record.raw_completion == expected
            assert (
                hashlib.sha256(record.raw_completion.encode()).hexdigest()
                == hashlib.sha256(expected.encode()).hexdigest()
            )

    def test_load_paths_by_question_groups(self, tmp_path):
        config = RunConfig(m1=2, m2=2, k=1, seed=0)
        prompts = build_prompts(small_pool(2), config.k, config.m1, config.seed)
        cache = tmp_path / "cache.jsonl"
        generate_dataset(questions(2), prompts, config, ScriptedClient(scripted), cache)
        grouped = load_paths_by_question(cache)
        assert set(grouped) == {"q0", "q1"}
        assert all(len(paths) == 4 for paths in grouped.values())


class TestHttpClient:
    def test_happy_path(self):
        with completion_server(lambda prompt, n: [f"c{i}" for i in range(n)]) as url:
            client = HttpCompletionClient(url)
            out = client.complete("p", 3, temperature=0.5, max_tokens=64, stop=["\n\nQ:"])
            assert out == ["c0", "c1", "c2"]

    def test_retryable_then_success(self):
        state = {"fails": 1}

        def handle(payload):
            if state["fails"] > 0:
                state["fails"] -= 1
                return 503, {"error": "busy"}
            return 200, {"completions": ["ok"]}

        with json_server({"/complete": handle}) as url:
            client = HttpCompletionClient(url)
            out = sample_paths("p", 1, RunConfig(), client, retry_wait=0.0)
            assert out == ["ok"]

    def test_client_error_is_fatal(self):
        with json_server({"/complete": lambda payload: (400, {"error": "nope"})}) as url:
            client = HttpCompletionClient(url)
            with pytest.raises(CompletionRequestError):
                client.complete("p", 1, temperature=0.5, max_tokens=64, stop=[])

    def test_rate_limit_is_retryable(self):
        state = {"fails": 2}

        def handle(payload):
            if state["fails"] > 0:
                state["fails"] -= 1
                return 429, {"error": "slow down"}
            return 200, {"completions": ["done"]}

        with json_server({"/complete": handle}) as url:
            out = sample_paths("p", 1, RunConfig(), HttpCompletionClient(url), retry_wait=0.0)
            assert out == ["done"]
