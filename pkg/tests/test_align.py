import random

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from tarkit.align import (
    align_claims,
    exact_assign,
    greedy_assign,
    semantic_matrix,
    tar_f1,
    tar_precision,
    tar_recall,
    temporal_matrix,
)
from tarkit.embed import HashingEmbedder
from tarkit.model import MatchConfig, MatchingMode, validate_claimset

EMB = HashingEmbedder()


def cs(mapping):
    return validate_claimset(mapping)


def test_temporal_matrix_examples():
    assert temporal_matrix(cs({"00:16": "a."}), cs({"00:17": "b."}), 2)[0, 0]
    assert not temporal_matrix(cs({"00:10": "a."}), cs({"00:20": "b."}), 2)[0, 0]
    assert temporal_matrix(cs({"01:45-02:01": "a."}), cs({"01:50": "b."}), 0)[0, 0]
    assert temporal_matrix(cs({}), cs({"00:01": "b."}), 2).shape == (0, 1)
    assert temporal_matrix(cs({"00:01": "b."}), cs({}), 2).shape == (1, 0)


def test_semantic_matrix_examples():
    S, sims = semantic_matrix(cs({"00:01": "The man jumps."}), cs({"00:01": "The man jumps."}), EMB, 0.75)
    assert S[0, 0] and sims[0, 0] == pytest.approx(1.0)
    S, sims = semantic_matrix(cs({"00:01": "red car"}), cs({"00:01": "blue boat"}), EMB, 0.75)
    assert not S[0, 0] and sims[0, 0] == 0.0


def test_zero_vector_similarity_is_zero(caplog):
    S, sims = semantic_matrix(cs({"00:01": "!!!"}), cs({"00:01": "a dog"}), EMB, 0.0)
    assert sims[0, 0] == 0.0 and S[0, 0]
    assert "zero embedding" in caplog.text


def test_greedy_examples():
    one = np.ones((1, 1), dtype=bool)
    assert greedy_assign(one, one, np.ones((1, 1))) == ((0, 0),)
    T = np.array([[True, False], [True, False]])
    assert greedy_assign(T, T, np.ones((2, 2))) == ((0, 0),)


def test_greedy_prefers_higher_similarity_then_earliest_start():
    T = np.ones((1, 3), dtype=bool)
    assert greedy_assign(T, T, np.array([[0.8, 0.9, 0.85]])) == ((0, 1),)
    assert greedy_assign(T, T, np.array([[0.8, 0.8, 0.8]]), ref_starts=[5, 3, 3]) == ((0, 1),)
    assert greedy_assign(T, T, np.array([[0.8, 0.8, 0.8]])) == ((0, 0),)


def test_greedy_gap_fixture():
    T = np.array([[True, True], [True, False]])
    sims = np.array([[0.9, 0.8], [0.95, 0.1]])
    assert greedy_assign(T, T, sims) == ((0, 0),)
    assert len(exact_assign(T, T)) == 2


def test_exact_matches_scipy_cardinality():
    rng = random.Random(7)
    for _ in range(300):
        n, m = rng.randint(0, 8), rng.randint(0, 8)
        F = np.array([[rng.random() < 0.3 for _ in range(m)] for _ in range(n)], dtype=bool).reshape(n, m)
        pairs = exact_assign(F, F)
        assert len({i for i, _ in pairs}) == len(pairs) == len({j for _, j in pairs})
        assert all(F[i, j] for i, j in pairs)
        if n and m:
            rows, cols = linear_sum_assignment(-F.astype(float))
            assert len(pairs) == int(F[rows, cols].sum())
        else:
            assert pairs == ()


def test_partial_permutation_means_no_gap():
    rng = random.Random(3)
    for _ in range(200):
        n = rng.randint(1, 8)
        perm = rng.sample(range(n), n)
        F = np.zeros((n, n), dtype=bool)
        for i in range(n):
            if rng.random() < 0.6:
                F[i, perm[i]] = True
        sims = np.random.default_rng(rng.randint(0, 10**6)).random((n, n))
        assert len(greedy_assign(F, F, sims)) == len(exact_assign(F, F))


def test_align_claims_modes():
    pred = cs({"00:05": "A red car enters the frame.", "00:20": "A man waves at the camera."})
    ref = cs({"00:04": "A red car enters the frame.", "00:40": "A dog runs past."})
    res = align_claims(pred, ref, MatchConfig(), EMB)
    assert res.assignment == ((0, 0),)
    assert tar_precision(res.assignment, res.n) == 0.5
    exact = align_claims(pred, ref, MatchConfig(matching_mode=MatchingMode.EXACT_ORACLE), EMB)
    assert exact.assignment == ((0, 0),)


def test_tar_scores():
    assert tar_precision(((0, 0),), 2) == 0.5
    assert tar_precision(((0, 0), (1, 1)), 2) == 1.0
    assert tar_precision((), 0) == 0.0
    assert tar_recall(((0, 0),), 3) == 1 / 3
    assert tar_recall((), 0) == 0.0
    assert tar_f1(1, 1) == 1
    assert tar_f1(1, 0.5) == pytest.approx(2 / 3, abs=1e-15)
    assert tar_f1(0, 0) == 0


def test_adding_unmatched_prediction_lowers_precision_only():
    ref = cs({"00:04": "A red car enters the frame."})
    small = cs({"00:05": "A red car enters the frame."})
    big = cs({"00:05": "A red car enters the frame.", "00:50": "Unrelated clouds drift."})
    a, b = align_claims(small, ref, MatchConfig(), EMB), align_claims(big, ref, MatchConfig(), EMB)
    assert tar_precision(b.assignment, b.n) < tar_precision(a.assignment, a.n)
    assert tar_recall(b.assignment, b.m) == tar_recall(a.assignment, a.m)
