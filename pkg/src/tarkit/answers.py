"""Answer normalisation, comparison and regex fallbacks for judge-based extraction."""

from __future__ import annotations

import math
import re
from collections.abc import Sequence

UNKNOWN = "UNKNOWN"

Options = Sequence[tuple[str, str]]

_WS_RE = re.compile(r"\s+")
_TRAILING_PUNCT_RE = re.compile(r"[.!?,;:]+$")
_QUOTES = "\"'“”‘’`"
_NUMBER_RE = re.compile(r"[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[+-]?\.\d+")

_BARE_LETTER_RE = re.compile(r"[(\[]?\s*([A-Za-z])\s*[)\].:]?")
_LEADING_LETTER_RE = re.compile(r"[(\[]?([A-Z])[)\].:](?:\s|$)")
_OPTION_WORD_RE = re.compile(r"\b(?i:option|choice)\s*[(\[]?([A-Za-z])(?![A-Za-z])")
_ANSWER_LABEL_RE = re.compile(r"^(?i:(?:the\s+)?(?:final\s+)?answer\s*(?:is)?\s*[:\-=]?)\s*")

# Explicit conclusions naming a letter, e.g. "Therefore, D", "Answer: A", "D is correct".
_LETTER_CONCLUSIONS = [
    re.compile(
        r"(?i:answer|choice|option)\s*(?i:is|:|=|would\s+be|should\s+be|must\s+be)?\s*"
        r"(?i:option\s*)?[(\[]?([A-Z])(?![A-Za-z])"
    ),
    re.compile(
        r"(?i:therefore|thus|hence|so),?\s+(?:(?i:the\s+answer\s+is|it\s+is|it's)\s+)?"
        r"[(\[]?([A-Z])(?![A-Za-z'])"
    ),
    re.compile(
        r"[(\[]?([A-Z])[)\]]?\s+(?i:is\s+(?:the\s+)?(?:correct|right|best|answer))"
    ),
]
# Conclusions stated as text, e.g. "the correct answer is 'red car'".
_TEXT_CONCLUSION_RE = re.compile(
    r"(?i:(?:the\s+)?(?:correct\s+|final\s+|right\s+)?answer\s*(?:is|:|=|would\s+be|should\s+be))"
    r"\s*[\"'“‘]?(?P<text>[^\n\"”’]+?)[\"'”’]?\s*(?=[.!?](?:\s|$)|\n|$)"
)


def normalize_answer(text: str) -> str:
    text = _WS_RE.sub(" ", text).strip().strip(_QUOTES).strip()
    return _TRAILING_PUNCT_RE.sub("", text).strip().casefold()


def parse_number(text: str) -> float | None:
    text = text.strip()
    if not _NUMBER_RE.fullmatch(text):
        return None
    value = float(text.replace(",", ""))
    return value if math.isfinite(value) else None


def answers_match(a: str | None, b: str | None, *, mcq: bool) -> bool:
    """Equality for extracted answers.

    MCQ answers compare as single uppercase letters. Open-form answers match when
    both parse as numbers within a relative tolerance of 1e-6, or when their
    case-folded, whitespace-normalised text is equal.
    """
    if a is None or b is None or a.strip() == UNKNOWN or b.strip() == UNKNOWN:
        return False
    if mcq:
        return a.strip().upper() == b.strip().upper() and len(a.strip()) == 1
    na, nb = normalize_answer(a), normalize_answer(b)
    if not na or not nb:
        return False
    xa, xb = parse_number(na), parse_number(nb)
    if xa is not None and xb is not None:
        return math.isclose(xa, xb, rel_tol=1e-6)
    return na == nb


def _letters(options: Options | None) -> set[str]:
    return {letter for letter, _ in options} if options else set()


def _match_option_text(text: str, options: Options) -> str | None:
    target = normalize_answer(text)
    for letter, option_text in options:
        if normalize_answer(option_text) == target:
            return letter
    return None


def _last_conclusion_letter(text: str, options: Options) -> str | None:
    letters = _letters(options)
    best: tuple[int, str] | None = None
    for pattern in _LETTER_CONCLUSIONS:
        for match in pattern.finditer(text):
            letter = match.group(1)
            if letter in letters and (best is None or match.start(1) >= best[0]):
                best = (match.start(1), letter)
    for match in _TEXT_CONCLUSION_RE.finditer(text):
        letter = _match_option_text(match.group("text"), options)
        if letter is not None and (best is None or match.start("text") >= best[0]):
            best = (match.start("text"), letter)
    return best[1] if best else None


def scan_answer_block(text: str, options: Options | None) -> str:
    """Fallback for the final-answer extractor: a letter, a minimal answer, or ``UNKNOWN``."""
    stripped = text.strip()
    if not stripped:
        return UNKNOWN
    if options:
        letters = _letters(options)
        unlabeled = _ANSWER_LABEL_RE.sub("", stripped, count=1)
        for candidate in (stripped, unlabeled):
            bare = _BARE_LETTER_RE.fullmatch(candidate)
            if bare and bare.group(1).upper() in letters:
                return bare.group(1).upper()
            lead = _LEADING_LETTER_RE.match(candidate)
            if lead and lead.group(1) in letters:
                return lead.group(1)
        words = [m.group(1).upper() for m in _OPTION_WORD_RE.finditer(stripped)]
        words = [w for w in words if w in letters]
        if words:
            return words[-1]
        by_text = _match_option_text(unlabeled, options)
        if by_text is not None:
            return by_text
        return _last_conclusion_letter(stripped, options) or UNKNOWN
    answer = _ANSWER_LABEL_RE.sub("", stripped, count=1)
    answer = _TRAILING_PUNCT_RE.sub("", _WS_RE.sub(" ", answer)).strip().strip(_QUOTES).strip()
    return answer or UNKNOWN


def scan_think_conclusion(text: str, options: Options | None) -> str:
    """Fallback for the reasoning extractor: the LAST explicit conclusion, or ``UNKNOWN``."""
    if options:
        return _last_conclusion_letter(text, options) or UNKNOWN
    matches = list(_TEXT_CONCLUSION_RE.finditer(text))
    if not matches:
        return UNKNOWN
    answer = matches[-1].group("text").strip().strip(_QUOTES).strip()
    return answer or UNKNOWN


def normalize_ground_truth(answer_gt: str, options: Options | None) -> str:
    if options:
        letter = scan_answer_block(answer_gt, options)
        return letter if letter != UNKNOWN else answer_gt.strip().upper()
    return answer_gt.strip()
