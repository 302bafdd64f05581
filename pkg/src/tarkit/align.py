"""Temporal and semantic claim matching, one-to-one assignment and TAR scores."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from tarkit.embed import EmbeddingProvider, cosine
from tarkit.errors import ZeroVector
from tarkit.model import AlignmentResult, ClaimSet, MatchConfig, MatchingMode
from tarkit.timestamp import span_distance

logger = logging.getLogger(__name__)

Assignment = tuple[tuple[int, int], ...]


def temporal_matrix(pred: ClaimSet, ref: ClaimSet, delta: int) -> np.ndarray:
    """``T[i, j]`` is True when predicted claim i lies within ``delta`` seconds of reference j."""
    out = np.zeros((len(pred), len(ref)), dtype=bool)
    for i, p in enumerate(pred):
        for j, r in enumerate(ref):
            out[i, j] = span_distance(p.span, r.span) <= delta
    return out


def similarity_matrix(pred: ClaimSet, ref: ClaimSet, provider: EmbeddingProvider) -> np.ndarray:
    sims = np.zeros((len(pred), len(ref)), dtype=float)
    if not len(pred) or not len(ref):
        return sims
    texts = [c.text for c in pred] + [c.text for c in ref]
    vectors = provider.embed_batch(texts)
    pred_vecs, ref_vecs = vectors[: len(pred)], vectors[len(pred) :]
    for i, a in enumerate(pred_vecs):
        for j, b in enumerate(ref_vecs):
            try:
                sims[i, j] = cosine(a, b)
            except ZeroVector:
                logger.warning("zero embedding for claim pair (%d, %d); similarity set to 0", i, j)
                sims[i, j] = 0.0
    return sims


def threshold_similarity(sims: np.ndarray, tau: float) -> np.ndarray:
    return sims >= tau


def semantic_matrix(
    pred: ClaimSet, ref: ClaimSet, provider: EmbeddingProvider, tau: float
) -> tuple[np.ndarray, np.ndarray]:
    """Binary semantic matches (``cosine >= tau``) and the raw cosine matrix."""
    sims = similarity_matrix(pred, ref, provider)
    return threshold_similarity(sims, tau), sims


def greedy_assign(
    T: np.ndarray,
    S: np.ndarray,
    sims: np.ndarray,
    ref_starts: Sequence[int] | None = None,
) -> Assignment:
    """Give each predicted claim, in row order, its most similar unused feasible reference.

    Ties on similarity go to the earliest reference start time, then the lowest
    column index. Without ``ref_starts`` the column order stands in for start
    order, which holds for columns taken from a :class:`ClaimSet`.
    """
    n, m = T.shape
    starts = list(ref_starts) if ref_starts is not None else list(range(m))
    feasible = np.logical_and(T, S)
    used: set[int] = set()
    pairs = []
    for i in range(n):
        best: tuple[float, int, int] | None = None
        for j in range(m):
            if j in used or not feasible[i, j]:
                continue
            candidate = (-float(sims[i, j]), starts[j], j)
            if best is None or candidate < best:
                best = candidate
        if best is not None:
            used.add(best[2])
            pairs.append((i, best[2]))
    return tuple(pairs)


def exact_assign(T: np.ndarray, S: np.ndarray) -> Assignment:
    """Maximum-cardinality matching on the feasibility graph (augmenting paths).

    Used as an oracle to bound the greedy assignment, not to replace it.
    """
    n, m = T.shape
    feasible = np.logical_and(T, S)
    adjacency = [[j for j in range(m) if feasible[i, j]] for i in range(n)]
    owner = [-1] * m

    def augment(i: int, seen: list[bool]) -> bool:
        for j in adjacency[i]:
            if seen[j]:
                continue
            seen[j] = True
            if owner[j] < 0 or augment(owner[j], seen):
                owner[j] = i
                return True
        return False

    for i in range(n):
        augment(i, [False] * m)
    return tuple(sorted((i, j) for j, i in enumerate(owner) if i >= 0))


def align_claims(
    pred: ClaimSet, ref: ClaimSet, cfg: MatchConfig, provider: EmbeddingProvider
) -> AlignmentResult:
    T = temporal_matrix(pred, ref, cfg.delta_seconds)
    S, sims = semantic_matrix(pred, ref, provider, cfg.tau)
    if cfg.matching_mode is MatchingMode.EXACT_ORACLE:
        assignment = exact_assign(T, S)
    else:
        assignment = greedy_assign(T, S, sims, [c.span.start for c in ref])
    return AlignmentResult(T, S, sims, assignment)


def tar_precision(assignment: Sequence[tuple[int, int]], n: int) -> float:
    # No predicted claims earns nothing rather than an undefined 0/0.
    return len(assignment) / n if n else 0.0


def tar_recall(assignment: Sequence[tuple[int, int]], m: int) -> float:
    return len(assignment) / m if m else 0.0


def tar_f1(p: float, r: float) -> float:
    if p + r == 0:
        return 0.0
    # Clamp so floating-point rounding cannot push F1 outside [min(p, r), max(p, r)].
    return min(max(2 * p * r / (p + r), min(p, r)), max(p, r))
