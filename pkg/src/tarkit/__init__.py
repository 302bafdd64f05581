"""Consistency-gated temporal alignment rewards and reasoning-quality metrics."""

__version__ = "0.1.0"

from tarkit.align import align_claims, exact_assign, greedy_assign, tar_f1, tar_precision, tar_recall
from tarkit.embed import CachedEmbedder, EmbeddingVector, HashingEmbedder, RemoteEmbedder, cosine
from tarkit.judge import JudgeGateway, JudgeRequest, PromptKind, render_prompt
from tarkit.metrics import SampleEval, judge_stability, pearson, tac, tac_all, vas
from tarkit.model import (
    AlignmentResult,
    Claim,
    ClaimSet,
    ClaimSource,
    GateMode,
    MatchConfig,
    MatchingMode,
    RewardBreakdown,
    RewardWeights,
    TarVariant,
    TraceRecord,
    compose_total,
    validate_claimset,
)
from tarkit.reward import GateDecision, consistency_gate, group_advantages, score_candidate, total_reward
from tarkit.timestamp import TimeSpan, TimestampKey, format_key, parse_key, span_distance
from tarkit.trace import POST_PROMPT, SegmentedTrace, format_reward, scan_claims, segment

__all__ = [
    "AlignmentResult",
    "CachedEmbedder",
    "Claim",
    "ClaimSet",
    "ClaimSource",
    "EmbeddingVector",
    "GateDecision",
    "GateMode",
    "HashingEmbedder",
    "JudgeGateway",
    "JudgeRequest",
    "MatchConfig",
    "MatchingMode",
    "POST_PROMPT",
    "PromptKind",
    "RemoteEmbedder",
    "RewardBreakdown",
    "RewardWeights",
    "SampleEval",
    "SegmentedTrace",
    "TarVariant",
    "TimeSpan",
    "TimestampKey",
    "TraceRecord",
    "align_claims",
    "compose_total",
    "consistency_gate",
    "cosine",
    "exact_assign",
    "format_key",
    "format_reward",
    "greedy_assign",
    "group_advantages",
    "judge_stability",
    "parse_key",
    "pearson",
    "render_prompt",
    "scan_claims",
    "score_candidate",
    "segment",
    "span_distance",
    "tac",
    "tac_all",
    "tar_f1",
    "tar_precision",
    "tar_recall",
    "total_reward",
    "validate_claimset",
    "vas",
]
