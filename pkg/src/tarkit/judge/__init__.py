"""LLM judge access: prompt rendering, reply parsing, caching and replay."""

from tarkit.judge.gateway import (
    DEFAULT_JUDGE_MODEL,
    ClaimMap,
    ConsistencyVerdict,
    ExtractedAnswer,
    HttpChatTransport,
    JudgeGateway,
    JudgeMalformed,
    JudgeRequest,
    JudgeVerdict,
    PromptKind,
    VasScore,
    claim_extract_request,
    extract_claims_llm,
    parse_reply,
    render_prompt,
)

__all__ = [
    "DEFAULT_JUDGE_MODEL",
    "ClaimMap",
    "ConsistencyVerdict",
    "ExtractedAnswer",
    "HttpChatTransport",
    "JudgeGateway",
    "JudgeMalformed",
    "JudgeRequest",
    "JudgeVerdict",
    "PromptKind",
    "VasScore",
    "claim_extract_request",
    "extract_claims_llm",
    "parse_reply",
    "render_prompt",
]
