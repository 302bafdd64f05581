"""Rendering judge requests, talking to a chat-completion endpoint, caching replies."""

from __future__ import annotations

import json
import logging
import re
import threading
from concurrent.futures import Future
from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Union

import httpx

from tarkit._http import RetriesExhausted, auth_headers, post_json
from tarkit.errors import InvalidKeyFormat, MalformedReply, MissingField, ReplayMiss, TransportError, ValidationError
from tarkit.judge import prompts
from tarkit.model import ClaimSet, TraceRecord, validate_claimset
from tarkit.store import FileStore, content_key
from tarkit.timestamp import parse_key
from tarkit.trace import SegmentedTrace

logger = logging.getLogger(__name__)

DEFAULT_JUDGE_MODEL = "Qwen3-Next-80B-A3B"


class PromptKind(str, Enum):
    ANSWER_FROM_THINK = "answer_from_think"
    ANSWER_FROM_ANSWER = "answer_from_answer"
    VAS_SCORE = "vas_score"
    CLAIM_EXTRACT = "claim_extract"
    CONSISTENCY_GATE = "consistency_gate"


_MAX_TOKENS = {
    PromptKind.ANSWER_FROM_THINK: 32,
    PromptKind.ANSWER_FROM_ANSWER: 32,
    PromptKind.VAS_SCORE: 512,
    PromptKind.CLAIM_EXTRACT: 1024,
    PromptKind.CONSISTENCY_GATE: 256,
}


@dataclass(frozen=True)
class JudgeRequest:
    kind: PromptKind
    system_text: str
    user_text: str
    mcq: bool = False
    temperature: float = 0.0
    max_tokens: int = 512

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "system_text": self.system_text,
            "user_text": self.user_text,
            "mcq": self.mcq,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class ExtractedAnswer:
    value: str

    @property
    def unknown(self) -> bool:
        return self.value == "UNKNOWN"


@dataclass(frozen=True)
class VasScore:
    vas_raw: int
    rationale: str


@dataclass(frozen=True)
class ClaimMap:
    claims: dict[str, str]


@dataclass(frozen=True)
class ConsistencyVerdict:
    consistent: bool
    rationale: str


@dataclass(frozen=True)
class JudgeMalformed:
    """The judge replied, but not in the shape its prompt demands."""

    reason: str


Payload = Union[ExtractedAnswer, VasScore, ClaimMap, ConsistencyVerdict, JudgeMalformed]


@dataclass(frozen=True)
class JudgeVerdict:
    kind: PromptKind
    payload: Payload
    raw_text: str
    cache_hit: bool

    @property
    def malformed(self) -> bool:
        return isinstance(self.payload, JudgeMalformed)


def _input_text(record: TraceRecord) -> str:
    if record.options:
        return f"{record.question}\n{prompts.format_options(record.options)}"
    return record.question


def _require(value: str | None, name: str, kind: PromptKind) -> str:
    if value is None:
        raise MissingField(f"{kind.value} needs the {name} block")
    return value


def render_prompt(kind: PromptKind | str, record: TraceRecord, segment: SegmentedTrace) -> JudgeRequest:
    kind = PromptKind(kind)
    options = record.options
    if kind is PromptKind.ANSWER_FROM_THINK:
        think = _require(segment.think_text, "think", kind)
        system, user = prompts.ANSWER_FROM_THINK_SYSTEM, prompts.answer_from_think_user(think, options)
    elif kind is PromptKind.ANSWER_FROM_ANSWER:
        answer = _require(segment.answer_text, "answer", kind)
        system, user = prompts.ANSWER_FROM_ANSWER_SYSTEM, prompts.answer_from_answer_user(answer, options)
    elif kind is PromptKind.VAS_SCORE:
        system, user = prompts.VAS_SYSTEM, prompts.vas_user(_input_text(record), record.response_text)
    elif kind is PromptKind.CLAIM_EXTRACT:
        return claim_extract_request(_require(segment.think_text, "think", kind))
    else:
        think = _require(segment.think_text, "think", kind)
        answer = _require(segment.answer_text, "answer", kind)
        system = prompts.CONSISTENCY_SYSTEM
        user = prompts.consistency_user(_input_text(record), think, answer)
    return JudgeRequest(kind, system, user, mcq=bool(options), max_tokens=_MAX_TOKENS[kind])


def claim_extract_request(text: str) -> JudgeRequest:
    return JudgeRequest(
        PromptKind.CLAIM_EXTRACT,
        prompts.CLAIM_EXTRACT_SYSTEM,
        prompts.claim_extract_user(text),
        max_tokens=_MAX_TOKENS[PromptKind.CLAIM_EXTRACT],
    )


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\s*\n?(.*?)\n?```$", re.DOTALL)


def _json_object(raw: str) -> dict | None:
    text = raw.strip()
    fenced = _FENCE_RE.match(text)
    if fenced:
        text = fenced.group(1).strip()
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        lo, hi = text.find("{"), text.rfind("}")
        if lo < 0 or hi <= lo:
            return None
        try:
            value = json.loads(text[lo : hi + 1])
        except json.JSONDecodeError:
            return None
    return value if isinstance(value, dict) else None


def parse_reply(kind: PromptKind, raw: str, *, mcq: bool = False) -> Payload:
    if kind in (PromptKind.ANSWER_FROM_THINK, PromptKind.ANSWER_FROM_ANSWER):
        lines = [line.strip() for line in raw.strip().splitlines() if line.strip()]
        if not lines:
            return JudgeMalformed("empty reply")
        value = lines[0]
        if mcq and value != "UNKNOWN":
            letter = value.strip("()[]. ")
            if len(letter) != 1 or not letter.isalpha() or not letter.isascii():
                return JudgeMalformed(f"expected a single letter, got {value!r}")
            value = letter.upper()
        return ExtractedAnswer(value)

    if kind is PromptKind.VAS_SCORE:
        obj = _json_object(raw)
        if obj is None or "score" not in obj:
            return JudgeMalformed("reply is not a JSON object with a score")
        score = obj["score"]
        if isinstance(score, bool) or not isinstance(score, (int, float)) or score != int(score):
            return JudgeMalformed(f"score is not an integer: {score!r}")
        if not 0 <= int(score) <= 10:
            return JudgeMalformed(f"score out of range: {score!r}")
        return VasScore(int(score), str(obj.get("rationale", "")))

    if kind is PromptKind.CLAIM_EXTRACT:
        obj = _json_object(raw)
        if obj is None:
            return JudgeMalformed("reply is not a JSON object")
        if not all(isinstance(v, str) for v in obj.values()):
            return JudgeMalformed("claim values must be strings")
        return ClaimMap(dict(obj))

    lines = raw.strip().splitlines()
    first = lines[0].strip() if lines else ""
    if first not in ("TRUE", "FALSE"):
        return JudgeMalformed(f"first line must be TRUE or FALSE, got {first!r}")
    return ConsistencyVerdict(first == "TRUE", "\n".join(lines[1:]).strip())


class Transport(Protocol):
    def __call__(self, request: JudgeRequest, model: str) -> str: ...


class HttpChatTransport:
    """POSTs to an OpenAI-style ``/chat/completions`` endpoint."""

    def __init__(
        self,
        base_url: str,
        *,
        api_key_env: str | None = "TARKIT_JUDGE_API_KEY",
        timeout_s: float = 120.0,
        attempts: int = 3,
        backoff_s: float = 0.5,
        client: httpx.Client | None = None,
    ) -> None:
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.attempts = attempts
        self.backoff_s = backoff_s
        self._headers = auth_headers(api_key_env)
        self._client = client or httpx.Client(timeout=timeout_s)

    def __call__(self, request: JudgeRequest, model: str) -> str:
        payload = {
            "model": model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        try:
            body = post_json(
                self._client, self.url, payload, headers=self._headers,
                attempts=self.attempts, backoff_s=self.backoff_s,
            )
        except RetriesExhausted as exc:
            raise TransportError(str(exc)) from exc
        try:
            return body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected chat completion body: {body!r:.200}") from exc


class JudgeGateway:
    """Cached, optionally replay-only access to an LLM judge.

    Replies are cached by a hash of (kind, system text, user text, model). In
    replay mode nothing goes upstream and a cache miss raises
    :class:`ReplayMiss`. Concurrent misses on the same key share one upstream
    call, and at most ``max_in_flight`` upstream calls run at once.
    """

    def __init__(
        self,
        transport: Transport | None = None,
        *,
        model: str = DEFAULT_JUDGE_MODEL,
        store: FileStore | None = None,
        replay: bool = False,
        max_in_flight: int = 8,
    ) -> None:
        self.transport = transport
        self.model = model
        self.store = store
        self.replay = replay
        self.request_count = 0
        self._memory: dict[str, str] = {}
        self._pending: dict[str, Future[str]] = {}
        self._lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def cache_key(self, request: JudgeRequest) -> str:
        return content_key(request.kind.value, request.system_text, request.user_text, self.model)

    def _cached(self, key: str) -> str | None:
        if key in self._memory:
            return self._memory[key]
        if self.store is not None:
            entry = self.store.get(key)
            if entry is not None:
                self._memory[key] = entry["raw_text"]
                return entry["raw_text"]
        return None

    def _verdict(self, request: JudgeRequest, raw: str, hit: bool) -> JudgeVerdict:
        return JudgeVerdict(request.kind, parse_reply(request.kind, raw, mcq=request.mcq), raw, hit)

    def invoke(self, request: JudgeRequest, *, refresh: bool = False) -> JudgeVerdict:
        """Return the judge's verdict, from cache when possible.

        ``refresh`` skips the cache and overwrites the entry; it has no effect
        in replay mode.
        """
        key = self.cache_key(request)
        if self.replay or not refresh:
            raw = self._cached(key)
            if raw is not None:
                return self._verdict(request, raw, True)
            if self.replay:
                raise ReplayMiss(key)

        with self._lock:
            pending = self._pending.get(key)
            leader = pending is None
            if leader:
                pending = self._pending[key] = Future()
        if not leader:
            return self._verdict(request, pending.result(), True)

        try:
            raw = self._call_upstream(request)
        except BaseException as exc:
            pending.set_exception(exc)
            raise
        else:
            self._memory[key] = raw
            if self.store is not None:
                self.store.put(key, {"key": key, "model": self.model, "request": request.to_dict(), "raw_text": raw})
            pending.set_result(raw)
        finally:
            with self._lock:
                self._pending.pop(key, None)
        return self._verdict(request, raw, False)

    def _call_upstream(self, request: JudgeRequest) -> str:
        if self.transport is None:
            raise TransportError("no judge endpoint configured")
        with self._slots:
            with self._lock:
                self.request_count += 1
            return self.transport(request, self.model)

    def record(self, request: JudgeRequest, raw_text: str) -> str:
        """Store a reply for ``request`` without calling upstream (fixture authoring)."""
        key = self.cache_key(request)
        self._memory[key] = raw_text
        if self.store is not None:
            self.store.put(key, {"key": key, "model": self.model, "request": request.to_dict(), "raw_text": raw_text})
        return key


def extract_claims_llm(reasoning: str, gateway: JudgeGateway, *, strict: bool = False) -> ClaimSet:
    """Extract timestamped claims from ``reasoning`` with the judge.

    Keys go through the lenient normaliser. Outside strict mode, entries with
    unusable keys or empty sentences are dropped, as are repeats of a key
    after normalisation; in strict mode those raise.
    """
    if not reasoning.strip():
        return ClaimSet()
    verdict = gateway.invoke(claim_extract_request(reasoning))
    if isinstance(verdict.payload, JudgeMalformed):
        raise MalformedReply(verdict.payload.reason, verdict.raw_text)
    claims = verdict.payload.claims
    if strict:
        return validate_claimset(claims, normalize=True, strict=True)
    kept: dict[str, str] = {}
    for key, sentence in claims.items():
        try:
            canonical = parse_key(key, lenient=True).text
        except InvalidKeyFormat as exc:
            logger.warning("dropping claim with bad key: %s", exc)
            continue
        if canonical in kept or not sentence.strip():
            logger.warning("dropping duplicate or empty claim %r", key)
            continue
        kept[canonical] = sentence
    try:
        return validate_claimset(kept, normalize=True)
    except ValidationError as exc:  # pragma: no cover - kept entries are pre-validated
        raise MalformedReply(str(exc), verdict.raw_text) from exc
