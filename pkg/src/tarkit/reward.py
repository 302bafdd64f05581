"""Consistency gating, answer correctness and the composed GRPO reward."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from tarkit.align import align_claims, tar_f1, tar_precision, tar_recall
from tarkit.answers import (
    UNKNOWN,
    answers_match,
    normalize_ground_truth,
    scan_answer_block,
    scan_think_conclusion,
)
from tarkit.embed import EmbeddingProvider, HashingEmbedder
from tarkit.errors import GroupTooSmall, MalformedReply, MissingReference, TransportError
from tarkit.judge.gateway import (
    ConsistencyVerdict,
    ExtractedAnswer,
    JudgeGateway,
    PromptKind,
    extract_claims_llm,
    render_prompt,
)
from tarkit.model import (
    AlignmentResult,
    ClaimSet,
    ClaimSource,
    GateMode,
    MatchConfig,
    RewardBreakdown,
    RewardWeights,
    TarVariant,
    TraceRecord,
    compose_total,
)
from tarkit.trace import SegmentedTrace, format_reward, scan_claims, segment

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GateDecision:
    g: int
    source: GateMode
    rationale: str | None = None

    def __post_init__(self) -> None:
        if self.source is GateMode.DISABLED and self.g != 1:
            raise ValueError("a disabled gate always passes")


def extract_answer(
    record: TraceRecord,
    seg: SegmentedTrace,
    kind: PromptKind,
    *,
    judge: JudgeGateway | None = None,
    fallback: bool = True,
) -> str:
    """The answer concluded by the think block or stated in the answer block.

    Uses the judge when one is given and drops to the regex scanners when the
    judge is unreachable or replies out of format (unless ``fallback`` is off).
    """
    think = kind is PromptKind.ANSWER_FROM_THINK
    text = seg.think_text if think else seg.answer_text
    if text is None:
        return UNKNOWN
    if judge is not None:
        try:
            verdict = judge.invoke(render_prompt(kind, record, seg))
        except TransportError:
            if not fallback:
                raise
            logger.warning("judge unavailable for %s on %s; using scanner", kind.value, record.id)
        else:
            if isinstance(verdict.payload, ExtractedAnswer):
                return verdict.payload.value
            if not fallback:
                raise MalformedReply(verdict.payload.reason, verdict.raw_text)
            logger.warning("malformed %s reply on %s; using scanner", kind.value, record.id)
    if think:
        return scan_think_conclusion(text, record.options)
    return scan_answer_block(text, record.options)


def _string_compare(
    record: TraceRecord, seg: SegmentedTrace, judge: JudgeGateway | None, fallback: bool
) -> GateDecision:
    a_think = extract_answer(record, seg, PromptKind.ANSWER_FROM_THINK, judge=judge, fallback=fallback)
    a_answer = extract_answer(record, seg, PromptKind.ANSWER_FROM_ANSWER, judge=judge, fallback=fallback)
    g = int(answers_match(a_think, a_answer, mcq=record.is_mcq))
    return GateDecision(g, GateMode.STRING_COMPARE, f"think={a_think!r} answer={a_answer!r}")


def consistency_gate(
    record: TraceRecord,
    seg: SegmentedTrace,
    mode: GateMode | str,
    *,
    judge: JudgeGateway | None = None,
    fallback: bool = True,
) -> GateDecision:
    """Decide whether the reasoning's conclusion supports the final answer."""
    mode = GateMode(mode)
    if mode is GateMode.DISABLED:
        return GateDecision(1, GateMode.DISABLED)
    if not seg.think_text or not seg.answer_text:
        return GateDecision(0, mode, "missing think or answer block")
    if mode is GateMode.LLM_JUDGE:
        if judge is None:
            if not fallback:
                raise TransportError("llm_judge gate requested without a judge")
            return _string_compare(record, seg, None, fallback)
        try:
            verdict = judge.invoke(render_prompt(PromptKind.CONSISTENCY_GATE, record, seg))
        except TransportError:
            if not fallback:
                raise
            logger.warning("judge unavailable for gate on %s; using string compare", record.id)
            return _string_compare(record, seg, judge, fallback)
        if isinstance(verdict.payload, ConsistencyVerdict):
            return GateDecision(int(verdict.payload.consistent), GateMode.LLM_JUDGE, verdict.payload.rationale)
        if not fallback:
            raise MalformedReply(verdict.payload.reason, verdict.raw_text)
        return _string_compare(record, seg, judge, fallback)
    return _string_compare(record, seg, judge, fallback)


def accuracy_reward(
    record: TraceRecord,
    seg: SegmentedTrace,
    *,
    judge: JudgeGateway | None = None,
    fallback: bool = True,
) -> int:
    if seg.answer_text is None:
        return 0
    predicted = extract_answer(record, seg, PromptKind.ANSWER_FROM_ANSWER, judge=judge, fallback=fallback)
    truth = normalize_ground_truth(record.answer_gt, record.options)
    return int(answers_match(predicted, truth, mcq=record.is_mcq))


def extract_claims(text: str, *, judge: JudgeGateway | None = None, fallback: bool = True) -> ClaimSet:
    """Claims from prose: the judge when available, else the offline scanner."""
    if judge is None:
        return scan_claims(text)
    try:
        return extract_claims_llm(text, judge)
    except (TransportError, MalformedReply) as exc:
        if not fallback:
            raise
        logger.warning("claim extraction fell back to scanner: %s", exc)
        return scan_claims(text)


def reference_claims(
    record: TraceRecord, *, judge: JudgeGateway | None = None, fallback: bool = True
) -> ClaimSet | None:
    if record.reference_claims is not None:
        return record.reference_claims
    if record.reference_reasoning is not None:
        return extract_claims(record.reference_reasoning, judge=judge, fallback=fallback)
    return None


def predicted_claims(
    seg: SegmentedTrace,
    response_text: str,
    source: ClaimSource,
    *,
    judge: JudgeGateway | None = None,
    fallback: bool = True,
) -> ClaimSet:
    text = seg.think_text if source is ClaimSource.THINK else response_text
    if not text:
        return ClaimSet()
    return extract_claims(text, judge=judge, fallback=fallback)


def build_breakdown(
    *,
    r_acc: int,
    r_fmt: int,
    gate: int,
    tac_bit: int,
    alignment: AlignmentResult | None,
    cfg: MatchConfig,
    weights: RewardWeights,
) -> RewardBreakdown:
    if alignment is None:
        precision, recall, f1 = 0.0, 0.0, 0.0
    else:
        precision = tar_precision(alignment.assignment, alignment.n)
        recall = tar_recall(alignment.assignment, alignment.m)
        f1 = tar_f1(precision, recall)
    value = f1 if cfg.tar_variant is TarVariant.F1 else precision
    total = compose_total(weights, r_acc, r_fmt, gate * value, tac_bit)
    return RewardBreakdown(
        r_acc=r_acc,
        r_fmt=r_fmt,
        tar_precision=precision,
        gate=gate,
        tac_bit=tac_bit,
        total=total,
        tar_variant=cfg.tar_variant,
        tar_recall=recall,
        tar_f1=f1,
    )


@dataclass(frozen=True)
class ScoredCandidate:
    breakdown: RewardBreakdown
    gate: GateDecision
    segment: SegmentedTrace
    predicted: ClaimSet
    reference: ClaimSet | None
    alignment: AlignmentResult | None


def score_candidate(
    record: TraceRecord,
    candidate_response: str,
    cfg: MatchConfig,
    weights: RewardWeights,
    *,
    judge: JudgeGateway | None = None,
    embedder: EmbeddingProvider | None = None,
    fallback: bool = True,
) -> ScoredCandidate:
    """Score one candidate generation, keeping every intermediate."""
    seg = segment(candidate_response)
    if candidate_response != record.response_text:
        record = _with_response(record, candidate_response)
    r_fmt = format_reward(seg)
    r_acc = accuracy_reward(record, seg, judge=judge, fallback=fallback)
    gate = consistency_gate(record, seg, cfg.gate_mode, judge=judge, fallback=fallback)
    if cfg.gate_mode is GateMode.DISABLED:
        tac_bit = consistency_gate(record, seg, cfg.tac_mode, judge=judge, fallback=fallback).g
    else:
        tac_bit = gate.g

    reference = reference_claims(record, judge=judge, fallback=fallback)
    if reference is None and weights.lambda_tar > 0:
        raise MissingReference(f"record {record.id!r} has no reference claims or reasoning")
    predicted = predicted_claims(seg, candidate_response, cfg.claims_source, judge=judge, fallback=fallback)
    alignment = None
    if reference is not None:
        alignment = align_claims(predicted, reference, cfg, embedder or HashingEmbedder())
    breakdown = build_breakdown(
        r_acc=r_acc, r_fmt=r_fmt, gate=gate.g, tac_bit=tac_bit,
        alignment=alignment, cfg=cfg, weights=weights,
    )
    return ScoredCandidate(breakdown, gate, seg, predicted, reference, alignment)


def _with_response(record: TraceRecord, response: str) -> TraceRecord:
    return replace(record, response_text=response)


def total_reward(
    record: TraceRecord,
    candidate_response: str,
    cfg: MatchConfig,
    w: RewardWeights,
    *,
    judge: JudgeGateway | None = None,
    embedder: EmbeddingProvider | None = None,
    fallback: bool = True,
) -> RewardBreakdown:
    return score_candidate(
        record, candidate_response, cfg, w, judge=judge, embedder=embedder, fallback=fallback
    ).breakdown


def group_advantages(rewards: Sequence[float], epsilon: float = 1e-8) -> list[float]:
    """Group-normalised advantages ``(r - mean) / (std + epsilon)`` with population std."""
    if len(rewards) < 2:
        raise GroupTooSmall(f"need at least 2 rewards per group, got {len(rewards)}")
    values = np.asarray(rewards, dtype=float)
    if np.all(values == values[0]):
        return [0.0] * len(values)
    centered = values - values.mean()
    return (centered / (values.std() + epsilon)).tolist()
