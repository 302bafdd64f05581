from __future__ import annotations

import json
import threading
from collections.abc import Callable
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from tarkit.judge.gateway import JudgeRequest
from tarkit.model import TraceRecord, validate_claimset

OPTIONS = (("A", "red car"), ("B", "blue car"), ("C", "green truck"), ("D", "white van"))


def make_record(response: str, **overrides) -> TraceRecord:
    fields = dict(
        id="r1",
        question="What vehicle enters the frame first?",
        answer_gt="A",
        response_text=response,
        options=OPTIONS,
    )
    if "reference_claims" in overrides and isinstance(overrides["reference_claims"], dict):
        overrides["reference_claims"] = validate_claimset(overrides["reference_claims"])
    fields.update(overrides)
    return TraceRecord(**fields)


def respond(think: str, answer: str) -> str:
    return f"<think>{think}</think><answer>{answer}</answer>"


class ScriptedTransport:
    """In-process judge: ``script(request)`` returns the raw reply text."""

    def __init__(self, script: Callable[[JudgeRequest], str]) -> None:
        self.script = script
        self.calls: list[JudgeRequest] = []
        self._lock = threading.Lock()

    def __call__(self, request: JudgeRequest, model: str) -> str:
        with self._lock:
            self.calls.append(request)
        return self.script(request)


class FakeServer:
    """Tiny HTTP server whose POST handler is swappable per test."""

    def __init__(self) -> None:
        self.handler: Callable[[str, dict, dict], tuple[int, object]] = lambda path, body, headers: (404, {})
        self.requests: list[tuple[str, dict, dict]] = []
        owner = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:  # noqa: N802
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                headers = {k.lower(): v for k, v in self.headers.items()}
                owner.requests.append((self.path, body, headers))
                status, payload = owner.handler(self.path, body, headers)
                data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args) -> None:
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self._server.server_address[1]}"
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def fake_server():
    server = FakeServer()
    yield server
    server.close()


def chat_reply(text: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


def _after(text: str, marker: str) -> str:
    return text.split(marker, 1)[1] if marker in text else ""


def fake_judge_reply(system: str, user: str, model: str) -> str:
    """Deterministic stand-in for the judge model, keyed on the prompt wording."""
    from tarkit.answers import scan_answer_block, scan_think_conclusion
    from tarkit.trace import scan_claims, segment

    options = None
    if user.startswith("Options:\n"):
        block = user.split("\n\n", 1)[0].splitlines()[1:]
        options = tuple((line[0], line[3:]) for line in block)
    if system.startswith("You are a strict extractor"):
        reasoning = _after(user, "Reasoning:\n").rsplit("\n\n", 1)[0]
        return scan_think_conclusion(reasoning, options)
    if system.startswith("You are a deterministic parsing agent"):
        snippet = _after(user, "Text to parse (final answer snippet):\n").rsplit("\n\n", 1)[0]
        return scan_answer_block(snippet, options)
    if system.startswith("You are a precise temporal"):
        return json.dumps(scan_claims(_after(user, "The reasoning text is:\n")).to_dict())
    if system.startswith("You are an expert judge"):
        response = _after(user, "\nResponse: ").rsplit("\n\n", 1)[0]
        think = segment(response).think_text or ""
        hits = len(scan_claims(think))
        score = min(10, 3 * hits) if model.endswith("secondary") else min(10, 2 * hits + 1)
        return json.dumps({"score": score, "rationale": f"{hits} timestamped observations."})
    if system.startswith("You are a meticulous auditor"):
        think = _after(user, "THINK (model's internal reasoning):\n").split("\n\nANSWER", 1)[0]
        answer = _after(user, "ANSWER (model's final answer):\n").split("\n\nTASK:", 1)[0]
        a, b = scan_think_conclusion(think, OPTIONS), scan_answer_block(answer, OPTIONS)
        return ("TRUE" if a == b and a != "UNKNOWN" else "FALSE") + "\nCompared conclusions."
    return "?"


def fake_judge_handler(path: str, body: dict, headers: dict):
    system, user = (m["content"] for m in body["messages"])
    return 200, chat_reply(fake_judge_reply(system, user, body["model"]))


@pytest.fixture
def judge_server(fake_server):
    fake_server.handler = fake_judge_handler
    return fake_server


REFERENCE = {
    "00:04": "A red car enters the frame.",
    "00:12": "A man waves at the camera.",
    "00:30": "A dog runs past the gate.",
}
_EVENTS = [
    ("00:05", "a red car enters the frame"),
    ("00:13", "a man waves at the camera"),
    ("00:31", "a dog runs past the gate"),
    ("00:50", "clouds drift over the hills"),
]


def synthetic_response(rng, *, malformed: bool = False) -> str:
    events = rng.sample(_EVENTS, rng.randint(0, 3))
    think = " ".join(f"At {t} {text}." for t, text in sorted(events))
    concluded = rng.choice("AB")
    final = concluded if rng.random() < 0.75 else rng.choice("CD")
    body = f"<think>{think} Therefore, {concluded}.</think><answer>{final}</answer>"
    return body.replace("</answer>", "") if malformed else body


def synthetic_corpus(seed: int, groups: int = 3, k: int = 8) -> list[dict]:
    import random

    rng = random.Random(seed)
    rows = []
    for g in range(groups):
        for c in range(k):
            rows.append({
                "id": f"g{g}-c{c}",
                "question": f"Which vehicle appears in clip {g}?",
                "options": dict(OPTIONS),
                "answer_gt": "A",
                "response_text": synthetic_response(rng, malformed=(c == k - 1 and g == 0)),
                "reference_claims": REFERENCE,
                "meta": {"group": f"g{g}", "benchmark": f"bench{g % 2}", "category": "generic" if g % 2 else "reasoning"},
            })
    return rows


def write_jsonl(path, rows) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write((row if isinstance(row, str) else json.dumps(row)) + "\n")
    return str(path)
