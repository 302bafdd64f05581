import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tarkit.errors import DuplicateKey, EmptySentence, InvalidFormat, OutOfOrder
from tarkit.model import (
    AlignmentResult,
    Claim,
    ClaimSet,
    GateMode,
    MatchConfig,
    RewardBreakdown,
    RewardWeights,
    TarVariant,
    TimeSpan,
    TraceRecord,
    compose_total,
    validate_claimset,
)


def test_validate_single_claim():
    cs = validate_claimset({"00:42": "Sign reads Gate B."})
    assert len(cs) == 1
    assert cs[0].span == TimeSpan(42, 42)
    assert cs[0].text == "Sign reads Gate B."


def test_validate_empty():
    assert len(validate_claimset({})) == 0


def test_validate_sorts_and_keeps_raw_order():
    raw = {"01:45-02:01": "Counter shows rate.", "00:16": "Performer starts."}
    cs = validate_claimset(raw)
    assert [c.key for c in cs] == ["00:16", "01:45-02:01"]
    assert list(cs.to_dict()) == ["01:45-02:01", "00:16"]
    assert validate_claimset(cs.to_dict()) == cs


def test_validate_strict_rejects_out_of_order():
    with pytest.raises(OutOfOrder):
        validate_claimset({"00:20": "b.", "00:10": "a."}, strict=True)


def test_validate_errors():
    with pytest.raises(EmptySentence):
        validate_claimset({"00:10": "   "})
    with pytest.raises(InvalidFormat):
        validate_claimset({"6": "Plain seconds."})
    with pytest.raises(DuplicateKey):
        validate_claimset({"00:10": "a.", " 00:10": "b."}, normalize=True)


def test_ties_sort_by_end():
    cs = validate_claimset({"00:10-00:20": "long.", "00:10": "point.", "00:10-00:12": "short."})
    assert [c.key for c in cs] == ["00:10", "00:10-00:12", "00:10-00:20"]


def test_claimset_rejects_unsorted_direct_construction():
    a, b = Claim(TimeSpan.point(5), "a."), Claim(TimeSpan.point(1), "b.")
    with pytest.raises(OutOfOrder):
        ClaimSet((a, b))
    assert [c.key for c in ClaimSet.from_claims([a, b])] == ["00:01", "00:05"]


keys = st.integers(0, 7200).map(lambda t: TimeSpan.point(t))


@given(st.dictionaries(keys, st.text(min_size=1).filter(lambda s: s.strip()), max_size=12))
def test_round_trip_property(mapping):
    from tarkit.timestamp import format_key

    raw = {format_key(span): text for span, text in mapping.items()}
    cs = validate_claimset(raw)
    assert validate_claimset(cs.to_dict()) == cs


def test_trace_record_invariants():
    with pytest.raises(ValueError):
        TraceRecord("x", "q", "  ", "r")
    with pytest.raises(ValueError):
        TraceRecord("x", "q", "A", "r", options=(("A", "1"), ("A", "2")))
    with pytest.raises(ValueError):
        TraceRecord("x", "q", "A", "r", options=(("a", "1"),))
    assert not TraceRecord("x", "q", "7", "r").is_mcq


def test_match_config_defaults_and_validation():
    cfg = MatchConfig()
    assert (cfg.delta_seconds, cfg.tau, cfg.gate_mode) == (2, 0.75, GateMode.LLM_JUDGE)
    assert MatchConfig(tar_variant="f1").tar_variant is TarVariant.F1
    with pytest.raises(ValueError):
        MatchConfig(tau=1.5)
    with pytest.raises(ValueError):
        MatchConfig(delta_seconds=-1)
    with pytest.raises(TypeError):
        MatchConfig(delta_seconds=2.0)
    with pytest.raises(ValueError):
        MatchConfig(tac_mode="disabled")


def test_weights_validation():
    assert RewardWeights() == RewardWeights(1.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        RewardWeights(lambda_acc=-1)
    with pytest.raises(ValueError):
        RewardWeights(lambda_tar=math.inf)


def test_breakdown_recompose():
    w = RewardWeights(0.5, 0.25, 2.0, 1.0)
    total = compose_total(w, 1, 1, 0.5, 1)
    b = RewardBreakdown(1, 1, 0.5, 1, 1, total, tar_recall=1.0, tar_f1=2 / 3)
    assert b.recompose(w) == b.total
    f1 = RewardBreakdown(1, 1, 0.5, 1, 1, 0.0, TarVariant.F1, tar_recall=1.0, tar_f1=2 / 3)
    assert f1.gated_tar == 2 / 3
    gated = RewardBreakdown(1, 0, 1.0, 0, 0, 1.0)
    assert gated.gated_tar == 0


def test_alignment_result_invariants():
    T = np.array([[True, False], [True, True]])
    S = np.array([[True, True], [False, True]])
    sims = np.array([[0.9, 0.8], [0.1, 0.95]])
    res = AlignmentResult(T, S, sims, ((0, 0), (1, 1)))
    assert (res.n, res.m) == (2, 2)
    with pytest.raises(ValueError):
        res.temporal[0, 0] = False
    with pytest.raises(ValueError):
        AlignmentResult(T, S, sims, ((0, 1),))
    with pytest.raises(ValueError):
        AlignmentResult(T, S, sims, ((1, 1), (0, 1)))
    assert res.to_dict()["assignment"] == [[0, 0], [1, 1]]
