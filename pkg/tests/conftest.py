"""Shared test helpers: scripted clients, local JSON servers, path builders."""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

from reasonvote.core import ReasoningPath, TaskKind, parse_path


class ScriptedClient:
    """Deterministic in-process completion client.

    The completion for a slot is a pure function of (prompt, sample
    index), which is what makes resume runs reproduce uninterrupted runs.
    """

    model_name = "scripted"

    def __init__(self, fn: Callable[[str, int], str]):
        self.fn = fn
        self.calls = 0
        self.served = 0

    def complete(self, prompt, n, *, temperature, max_tokens, stop, start_index=0):
        self.calls += 1
        batch = [self.fn(prompt, start_index + i) for i in range(n)]
        self.served += len(batch)
        return batch


class FlakyClient:
    """Serves `good` completions on the first call, then always fails."""

    model_name = "flaky"

    def __init__(self, good: list[str]):
        self.good = list(good)
        self.calls = 0

    def complete(self, prompt, n, *, temperature, max_tokens, stop, start_index=0):
        self.calls += 1
        if self.calls == 1 and self.good:
            return self.good[:n]
        raise ConnectionError("simulated transport failure")


def _make_handler(routes: dict[str, Callable[[dict], tuple[int, dict]]]):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            payload = json.loads(self.rfile.read(length) or b"{}")
            handler = routes.get(self.path)
            if handler is None:
                self.send_response(404)
                self.end_headers()
                return
            status, body = handler(payload)
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            handler = routes.get(self.path)
            if handler is None:
                self.send_response(404)
                self.end_headers()
                return
            status, body = handler({})
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):  # keep test output quiet
            pass

    return Handler


@contextmanager
def json_server(routes: dict[str, Callable[[dict], tuple[int, dict]]]):
    """Local HTTP server with JSON routes; yields its base URL."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _make_handler(routes))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}"
    finally:
        server.shutdown()
        server.server_close()


@contextmanager
def completion_server(script: Callable[[str, int], list[str]]):
    """POST /complete server backed by script(prompt, n) -> completions."""

    def handle(payload: dict) -> tuple[int, dict]:
        return 200, {"completions": script(payload["prompt"], payload["n"])}

    with json_server({"/complete": handle}) as url:
        yield url


def chain_text(values, answer=None) -> str:
    """Completion text whose steps compute `values` in order."""
    sentences = [f"Then we get {chr(97 + i)} = {value:g}." for i, value in enumerate(values)]
    if answer is not None:
        sentences.append(f"The answer is {answer}.")
    return " ".join(sentences)


def make_path(
    values,
    answer=None,
    question_id: str = "q",
    prompt_id: int = 0,
    sample_index: int = 0,
    task_kind: TaskKind = TaskKind.ARITHMETIC,
) -> ReasoningPath:
    """Parse a synthetic completion with the given chain and answer."""
    return parse_path(
        question_id, prompt_id, sample_index, chain_text(values, answer), task_kind
    )


def answer_only_path(
    answer, question_id: str = "q", prompt_id: int = 0, sample_index: int = 0
) -> ReasoningPath:
    """Path with no steps; `answer` may be None for an answerless path."""
    raw = f"The answer is {answer}." if answer is not None else "No idea."
    return parse_path(question_id, prompt_id, sample_index, raw)
