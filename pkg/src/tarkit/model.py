"""Shared domain types: claims, trace records, configuration and reward breakdowns."""

from __future__ import annotations

import math
import string
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from tarkit.errors import DuplicateKey, EmptySentence, OutOfOrder
from tarkit.timestamp import TimeSpan, format_key, parse_key

__all__ = [
    "AlignmentResult",
    "Claim",
    "ClaimSet",
    "GateMode",
    "MatchConfig",
    "MatchingMode",
    "RewardBreakdown",
    "RewardWeights",
    "TarVariant",
    "TimeSpan",
    "TraceRecord",
    "validate_claimset",
]


class MatchingMode(str, Enum):
    GREEDY = "greedy"
    EXACT_ORACLE = "exact_oracle"


class TarVariant(str, Enum):
    PRECISION = "precision"
    F1 = "f1"


class GateMode(str, Enum):
    LLM_JUDGE = "llm_judge"
    STRING_COMPARE = "string_compare"
    DISABLED = "disabled"


class ClaimSource(str, Enum):
    THINK = "think"
    RESPONSE = "response"


@dataclass(frozen=True, slots=True)
class Claim:
    span: TimeSpan
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise EmptySentence(f"claim at {format_key(self.span)} has an empty sentence")

    @property
    def key(self) -> str:
        return format_key(self.span)


def _order(claim: Claim) -> tuple[int, int]:
    return (claim.span.start, claim.span.end)


@dataclass(frozen=True)
class ClaimSet:
    """Claims ordered by start time, with unique canonical keys.

    ``raw_keys`` records the canonical keys in the order they were supplied,
    so a set can be written back out exactly as it came in.
    """

    claims: tuple[Claim, ...] = ()
    raw_keys: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        keys = [c.key for c in self.claims]
        if len(set(keys)) != len(keys):
            raise DuplicateKey(f"duplicate claim keys in {keys}")
        if any(_order(a) > _order(b) for a, b in zip(self.claims, self.claims[1:])):
            raise OutOfOrder(f"claims are not ordered by start time: {keys}")
        if not self.raw_keys:
            object.__setattr__(self, "raw_keys", tuple(keys))
        elif sorted(self.raw_keys) != sorted(keys):
            raise ValueError("raw_keys must be a permutation of the claim keys")

    @classmethod
    def from_claims(cls, claims: Iterable[Claim]) -> ClaimSet:
        return cls(tuple(sorted(claims, key=_order)))

    def __len__(self) -> int:
        return len(self.claims)

    def __iter__(self):
        return iter(self.claims)

    def __getitem__(self, index: int) -> Claim:
        return self.claims[index]

    def to_dict(self) -> dict[str, str]:
        by_key = {c.key: c.text for c in self.claims}
        return {k: by_key[k] for k in self.raw_keys}


def validate_claimset(
    raw: Mapping[str, str], *, normalize: bool = False, strict: bool = False
) -> ClaimSet:
    """Turn a key-to-sentence map into a :class:`ClaimSet`.

    ``normalize`` runs the lenient key repair first (for model output).
    ``strict`` rejects keys that are not already in ascending order instead of
    re-sorting them.
    """
    claims: list[Claim] = []
    keys: list[str] = []
    seen: set[str] = set()
    for raw_key, sentence in raw.items():
        if not isinstance(raw_key, str):
            raise TypeError(f"claim key must be a string, got {raw_key!r}")
        parsed = parse_key(raw_key, lenient=normalize)
        if parsed.text in seen:
            raise DuplicateKey(f"{raw_key!r} duplicates key {parsed.text!r}")
        if not isinstance(sentence, str) or not sentence.strip():
            raise EmptySentence(f"claim {raw_key!r} has an empty sentence")
        seen.add(parsed.text)
        keys.append(parsed.text)
        claims.append(Claim(parsed.span, sentence.strip()))
    ordered = sorted(claims, key=_order)
    if strict and ordered != claims:
        raise OutOfOrder(f"keys are not ordered by start time: {keys}")
    return ClaimSet(tuple(ordered), tuple(keys))


_LETTERS = frozenset(string.ascii_uppercase)


@dataclass(frozen=True)
class TraceRecord:
    id: str
    question: str
    answer_gt: str
    response_text: str
    options: tuple[tuple[str, str], ...] | None = None
    reference_reasoning: str | None = None
    reference_claims: ClaimSet | None = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.answer_gt or not self.answer_gt.strip():
            raise ValueError(f"record {self.id!r}: answer_gt must be non-empty")
        if self.options is not None:
            letters = [letter for letter, _ in self.options]
            if any(letter not in _LETTERS for letter in letters):
                raise ValueError(f"record {self.id!r}: option letters must be A-Z, got {letters}")
            if len(set(letters)) != len(letters):
                raise ValueError(f"record {self.id!r}: duplicate option letters {letters}")

    @property
    def is_mcq(self) -> bool:
        return bool(self.options)


@dataclass(frozen=True)
class MatchConfig:
    delta_seconds: int = 2
    tau: float = 0.75
    matching_mode: MatchingMode = MatchingMode.GREEDY
    tar_variant: TarVariant = TarVariant.PRECISION
    gate_mode: GateMode = GateMode.LLM_JUDGE
    # Consistency check used for tac_bit when the gate itself is disabled.
    tac_mode: GateMode = GateMode.STRING_COMPARE
    claims_source: ClaimSource = ClaimSource.THINK

    def __post_init__(self) -> None:
        if isinstance(self.delta_seconds, bool) or not isinstance(self.delta_seconds, int):
            raise TypeError("delta_seconds must be an int")
        if self.delta_seconds < 0:
            raise ValueError("delta_seconds must be non-negative")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        for name, kind in (
            ("matching_mode", MatchingMode),
            ("tar_variant", TarVariant),
            ("gate_mode", GateMode),
            ("tac_mode", GateMode),
            ("claims_source", ClaimSource),
        ):
            object.__setattr__(self, name, kind(getattr(self, name)))
        if self.tac_mode is GateMode.DISABLED:
            raise ValueError("tac_mode cannot be disabled")


@dataclass(frozen=True)
class RewardWeights:
    lambda_acc: float = 1.0
    lambda_fmt: float = 1.0
    lambda_tar: float = 1.0
    lambda_tac: float = 0.0

    def __post_init__(self) -> None:
        for name in ("lambda_acc", "lambda_fmt", "lambda_tar", "lambda_tac"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class RewardBreakdown:
    r_acc: int
    r_fmt: int
    tar_precision: float
    gate: int
    tac_bit: int
    total: float
    tar_variant: TarVariant = TarVariant.PRECISION
    tar_recall: float | None = None
    tar_f1: float | None = None

    @property
    def tar_value(self) -> float:
        """The configured TAR variant before gating."""
        if self.tar_variant is TarVariant.F1:
            return self.tar_f1 if self.tar_f1 is not None else 0.0
        return self.tar_precision

    @property
    def gated_tar(self) -> float:
        return self.gate * self.tar_value

    def recompose(self, weights: RewardWeights) -> float:
        return compose_total(
            weights, self.r_acc, self.r_fmt, self.gated_tar, self.tac_bit
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "r_acc": self.r_acc,
            "r_fmt": self.r_fmt,
            "tar_variant": self.tar_variant.value,
            "tar_precision": self.tar_precision,
            "tar_recall": self.tar_recall,
            "tar_f1": self.tar_f1,
            "gate": self.gate,
            "gated_tar": self.gated_tar,
            "tac_bit": self.tac_bit,
            "total": self.total,
        }


def compose_total(
    weights: RewardWeights, r_acc: int, r_fmt: int, gated_tar: float, tac_bit: int
) -> float:
    # Single evaluation order so the total is bit-reproducible from a breakdown.
    return (
        weights.lambda_acc * r_acc
        + weights.lambda_fmt * r_fmt
        + weights.lambda_tar * gated_tar
        + weights.lambda_tac * tac_bit
    )


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    """Match matrices between ``n`` predicted and ``m`` reference claims."""

    temporal: np.ndarray
    semantic: np.ndarray
    similarity: np.ndarray
    assignment: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        shape = self.temporal.shape
        if self.semantic.shape != shape or self.similarity.shape != shape:
            raise ValueError("temporal, semantic and similarity matrices must share a shape")
        for name in ("temporal", "semantic", "similarity"):
            _frozen(getattr(self, name))
        preds = [i for i, _ in self.assignment]
        refs = [j for _, j in self.assignment]
        if len(set(preds)) != len(preds) or len(set(refs)) != len(refs):
            raise ValueError("assignment is not one-to-one")
        for i, j in self.assignment:
            if not (self.temporal[i, j] and self.semantic[i, j]):
                raise ValueError(f"assigned pair ({i}, {j}) is not feasible")

    @property
    def n(self) -> int:
        return self.temporal.shape[0]

    @property
    def m(self) -> int:
        return self.temporal.shape[1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "m": self.m,
            "temporal": self.temporal.astype(int).tolist(),
            "semantic": self.semantic.astype(int).tolist(),
            "similarity": [[round(float(v), 6) for v in row] for row in self.similarity],
            "assignment": [list(pair) for pair in self.assignment],
        }
