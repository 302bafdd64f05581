"""Corpus-level reasoning metrics: TAC, TAC-All, VAS and judge-stability PCC."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from tarkit.errors import EmptyCorpus, LengthMismatch, ZeroVariance
from tarkit.model import RewardBreakdown


@dataclass(frozen=True)
class SampleEval:
    id: str
    correct: bool
    tac_bit: int
    vas_raw: int | None = None
    vas_norm: float | None = None
    reward: RewardBreakdown | None = None

    def __post_init__(self) -> None:
        if self.tac_bit not in (0, 1):
            raise ValueError(f"tac_bit must be 0 or 1, got {self.tac_bit!r}")
        if self.vas_raw is None:
            if self.vas_norm is not None:
                raise ValueError("vas_norm requires vas_raw")
            return
        if isinstance(self.vas_raw, bool) or not isinstance(self.vas_raw, int) or not 0 <= self.vas_raw <= 10:
            raise ValueError(f"vas_raw must be an integer in [0, 10], got {self.vas_raw!r}")
        if self.vas_norm is None:
            object.__setattr__(self, "vas_norm", self.vas_raw / 10)
        elif self.vas_norm != self.vas_raw / 10:
            raise ValueError("vas_norm must equal vas_raw / 10")


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def tac(evals: Iterable[SampleEval]) -> float | None:
    """Consistency rate over correct samples; ``None`` when no sample is correct."""
    bits = [e.tac_bit for e in evals if e.correct]
    return _mean(bits) if bits else None


def tac_all(evals: Iterable[SampleEval]) -> float:
    bits = [e.tac_bit for e in evals]
    if not bits:
        raise EmptyCorpus("TAC-All needs at least one sample")
    return _mean(bits)


@dataclass(frozen=True)
class VasSummary:
    value: float | None
    scored: int
    total: int


def vas_summary(evals: Iterable[SampleEval]) -> VasSummary:
    evals = list(evals)
    scores = [e.vas_norm for e in evals if e.vas_norm is not None]
    return VasSummary(_mean(scores) if scores else None, len(scores), len(evals))


def vas(evals: Iterable[SampleEval]) -> float | None:
    """Mean normalised VAS over the samples that have a score."""
    return vas_summary(evals).value


def _scaled_deviations(values: Sequence[float]) -> list[float] | None:
    # r is scale invariant; dividing by the largest deviation keeps squares clear of under/overflow
    mean = _mean(values)
    dev = [v - mean for v in values]
    scale = max(abs(d) for d in dev)
    return None if scale == 0 else [d / scale for d in dev]


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys):
        raise LengthMismatch(f"{len(xs)} vs {len(ys)} values")
    if len(xs) < 2:
        raise LengthMismatch("pearson needs at least 2 pairs")
    dx, dy = _scaled_deviations(xs), _scaled_deviations(ys)
    if dx is None or dy is None:
        raise ZeroVariance("pearson is undefined for a constant series")
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class StabilityReport:
    pcc: float | None
    n_common: int
    n_primary: int
    n_secondary: int
    error: str | None = None


def judge_stability(primary: dict[str, int | None], secondary: dict[str, int | None]) -> StabilityReport:
    """PCC between two judges' raw VAS over samples both of them scored."""
    a = {k: v for k, v in primary.items() if v is not None}
    b = {k: v for k, v in secondary.items() if v is not None}
    common = sorted(a.keys() & b.keys())
    try:
        pcc = pearson([a[k] for k in common], [b[k] for k in common])
        error = None
    except (LengthMismatch, ZeroVariance) as exc:
        pcc, error = None, str(exc)
    return StabilityReport(pcc, len(common), len(a), len(b), error)
