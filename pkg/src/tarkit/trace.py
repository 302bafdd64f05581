"""Segmenting ``<think>``/``<answer>`` responses and scanning prose for timestamps."""

from __future__ import annotations

import re
from dataclasses import dataclass

from tarkit.errors import InvalidKeyFormat
from tarkit.model import ClaimSet, validate_claimset
from tarkit.timestamp import parse_key

POST_PROMPT = (
    "Please think about this question as if you were a human pondering deeply. "
    "Engage in an internal dialogue using expressions such as 'let me think', 'wait', "
    "'Hmm', 'oh, I see', 'let's break it down', etc, or other natural language thought "
    "expressions. It's encouraged to include self-reflection or verification in the "
    "reasoning process. Provide your detailed reasoning between the <think> and </think> "
    "tags, and then give your final answer between the <answer> and </answer> tags."
)

THINK_OPEN, THINK_CLOSE = "<think>", "</think>"
ANSWER_OPEN, ANSWER_CLOSE = "<answer>", "</answer>"

MAX_SENTENCE_CHARS = 200


@dataclass(frozen=True, slots=True)
class SegmentedTrace:
    think_text: str | None
    answer_text: str | None
    think_count: int
    well_formed: bool


def _block(text: str, open_tag: str, close_tag: str, start: int = 0) -> tuple[str, int, int] | None:
    """First ``open_tag ... close_tag`` block at or after ``start``: (inner, begin, end)."""
    begin = text.find(open_tag, start)
    if begin < 0:
        return None
    inner_start = begin + len(open_tag)
    close = text.find(close_tag, inner_start)
    if close < 0:
        return None
    return text[inner_start:close], begin, close + len(close_tag)


def segment(response_text: str, *, strict: bool = False) -> SegmentedTrace:
    """Split a response into its first think block and first answer block.

    Never raises: malformed responses come back with ``well_formed=False``.
    With ``strict=True`` any non-whitespace text outside the two blocks also
    voids ``well_formed``.
    """
    think = _block(response_text, THINK_OPEN, THINK_CLOSE)
    answer = None
    if think is not None:
        answer = _block(response_text, ANSWER_OPEN, ANSWER_CLOSE, think[2])
    if answer is None:
        answer = _block(response_text, ANSWER_OPEN, ANSWER_CLOSE)

    think_text = think[0].strip() if think is not None else None
    answer_text = answer[0].strip() if answer is not None else None
    think_count = response_text.count(THINK_OPEN)

    well_formed = (
        think is not None
        and answer is not None
        and think_count == 1
        and response_text.count(THINK_CLOSE) == 1
        and response_text.count(ANSWER_OPEN) == 1
        and response_text.count(ANSWER_CLOSE) == 1
        and think[2] <= answer[1]
        and bool(think_text)
        and bool(answer_text)
    )
    if well_formed and strict:
        outside = response_text[: think[1]] + response_text[think[2] : answer[1]] + response_text[answer[2] :]
        well_formed = not outside.strip()
    return SegmentedTrace(think_text, answer_text, think_count, well_formed)


def format_reward(trace: SegmentedTrace) -> int:
    return 1 if trace.well_formed else 0


_KEY_IN_PROSE_RE = re.compile(
    r"(?<!\d)(?<!\d:)"
    r"(\d{2}:\d{2}(?::\d{2})?(?:[.]\d+)?"
    r"(?:\s*[-‐‑‒–—―−]\s*\d{2}:\d{2}(?::\d{2})?(?:[.]\d+)?)?)"
    r"(?!\d|:\d)"
)
# A terminator only ends a sentence when followed by whitespace or end of text,
# so "23,666/sec." ends a sentence but "3.5" does not. Newlines also split.
_SENTENCE_END_RE = re.compile(r"[.!?](?=\s|$)|\n")


def _sentence_bounds(text: str) -> list[tuple[int, int]]:
    bounds = []
    start = 0
    for match in _SENTENCE_END_RE.finditer(text):
        bounds.append((start, match.end()))
        start = match.end()
    if start < len(text):
        bounds.append((start, len(text)))
    return bounds


def scan_claims(text: str) -> ClaimSet:
    """Offline stand-in for judge-based claim extraction.

    Every canonical timestamp key embedded in ``text`` becomes a claim whose
    sentence is the enclosing sentence (trimmed, capped at 200 characters).
    Repeated keys keep their first sentence; unparseable hits are skipped.
    """
    bounds = _sentence_bounds(text)
    found: dict[str, str] = {}
    idx = 0
    for match in _KEY_IN_PROSE_RE.finditer(text):
        try:
            key = parse_key(match.group(1), lenient=True).text
        except InvalidKeyFormat:
            continue
        if key in found:
            continue
        while bounds[idx][1] <= match.start():
            idx += 1
        lo, hi = bounds[idx]
        sentence = text[lo:hi].strip()[:MAX_SENTENCE_CHARS].strip()
        found[key] = sentence
    return validate_claimset(found, normalize=True)
