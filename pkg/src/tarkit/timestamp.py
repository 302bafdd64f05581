"""Strict timestamp keys: ``MM:SS``, ``HH:MM:SS`` and hyphenated ranges.

Accepted shapes (two-digit zero-padded fields)::

    MM:SS    HH:MM:SS    MM:SS-MM:SS    MM:SS-HH:MM:SS    HH:MM:SS-HH:MM:SS

Seconds must be below 60 everywhere; minutes must be below 60 when an hours
field is present. A leading minutes field (``MM:SS``) may run up to 99.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from tarkit.errors import FieldOverflow, InvalidFormat, InvertedRange, TrailingGarbage

MAX_SECONDS = 99 * 3600 + 59 * 60 + 59

_TIME = r"\d{2}:\d{2}(?::\d{2})?"
_FULL_RE = re.compile(rf"(?P<start>{_TIME})(?:-(?P<end>{_TIME}))?")
# A valid key followed by junk such as "end", "EOF" or "+".
_PREFIX_RE = re.compile(rf"(?:{_TIME})(?:-(?:{_TIME}))?(?!\d|:\d)")
_DASHES_RE = re.compile("[‐‑‒–—―−]")
_WS_RE = re.compile(r"\s+")
_DECIMAL_RE = re.compile(r"(?<![\d:])(\d{2}(?::\d{2}){1,2})\.(\d+)(?!\d)")


@dataclass(frozen=True, slots=True)
class TimeSpan:
    """A point (``start == end``) or closed interval on the timeline, in whole seconds."""

    start: int
    end: int

    def __post_init__(self) -> None:
        for name in ("start", "end"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError(f"TimeSpan.{name} must be an int, got {value!r}")
            if value < 0:
                raise ValueError(f"TimeSpan.{name} must be non-negative, got {value}")
            if value > MAX_SECONDS:
                raise ValueError(f"TimeSpan.{name} exceeds 99:59:59, got {value}")
        if self.start > self.end:
            raise ValueError(f"TimeSpan start {self.start} is after end {self.end}")

    @classmethod
    def point(cls, t: int) -> TimeSpan:
        return cls(t, t)

    @classmethod
    def from_seconds(cls, start: float, end: float | None = None) -> TimeSpan:
        """Build a span from possibly fractional seconds, rounding half away from zero."""
        s = round_seconds(start)
        return cls(s, s if end is None else round_seconds(end))

    @property
    def is_point(self) -> bool:
        return self.start == self.end


@dataclass(frozen=True, slots=True)
class TimestampKey:
    text: str
    span: TimeSpan

    def __post_init__(self) -> None:
        if self.text != format_key(self.span):
            raise ValueError(f"{self.text!r} is not the canonical key for {self.span}")


def round_seconds(value: float) -> int:
    return int(Decimal(str(value)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def _format_time(seconds: int) -> str:
    hours, rem = divmod(seconds, 3600)
    minutes, secs = divmod(rem, 60)
    if hours:
        return f"{hours:02d}:{minutes:02d}:{secs:02d}"
    return f"{minutes:02d}:{secs:02d}"


def format_key(span: TimeSpan) -> str:
    if span.is_point:
        return _format_time(span.start)
    return f"{_format_time(span.start)}-{_format_time(span.end)}"


def _round_decimal(match: re.Match[str]) -> str:
    fields = [int(part) for part in match.group(1).split(":")]
    total = 0
    for part in fields:
        total = total * 60 + part
    return _format_time(round_seconds(float(f"{total}.{match.group(2)}")))


def normalize(text: str) -> str:
    """Repair near-miss formatting from model output before strict parsing.

    Removes whitespace, maps typographic dashes to ``-`` and rounds decimal
    seconds (``00:01.77`` becomes ``00:02``).
    """
    text = _WS_RE.sub("", text)
    text = _DASHES_RE.sub("-", text)
    return _DECIMAL_RE.sub(_round_decimal, text)


def _to_seconds(token: str, original: str) -> int:
    fields = [int(part) for part in token.split(":")]
    if fields[-1] >= 60:
        raise FieldOverflow(original, f"seconds field {fields[-1]:02d} >= 60")
    if len(fields) == 3:
        hours, minutes, secs = fields
        if minutes >= 60:
            raise FieldOverflow(original, f"minutes field {minutes:02d} >= 60 in HH:MM:SS")
        return hours * 3600 + minutes * 60 + secs
    minutes, secs = fields
    return minutes * 60 + secs


def parse_key(text: str, *, lenient: bool = False) -> TimestampKey:
    """Parse a timestamp key into its canonical text and span.

    With ``lenient=True`` the input first goes through :func:`normalize`;
    reference data should be parsed strictly.
    """
    original = text
    if lenient:
        text = normalize(text)
    match = _FULL_RE.fullmatch(text)
    if match is None:
        if _PREFIX_RE.match(text):
            raise TrailingGarbage(original, "trailing characters after timestamp")
        raise InvalidFormat(original, "expected zero-padded MM:SS or HH:MM:SS")
    start_tok, end_tok = match.group("start"), match.group("end")
    if end_tok is not None and start_tok.count(":") == 2 and end_tok.count(":") == 1:
        raise InvalidFormat(original, "HH:MM:SS-MM:SS is not an accepted range shape")
    start = _to_seconds(start_tok, original)
    end = start if end_tok is None else _to_seconds(end_tok, original)
    if start > end:
        raise InvertedRange(original, "range start is after range end")
    span = TimeSpan(start, end)
    return TimestampKey(format_key(span), span)


def span_distance(a: TimeSpan, b: TimeSpan) -> int:
    """Gap in seconds between two spans; 0 when they overlap or touch."""
    return max(0, b.start - a.end, a.start - b.end)
