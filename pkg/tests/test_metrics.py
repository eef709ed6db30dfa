import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from epicast.errors import Empty, InvalidDistribution, LengthMismatch
from epicast.forecast import Forecast
from epicast.metrics import (DEFAULT_THRESHOLDS, accuracy, aggregate, argmax_class, brier, build_report,
                             confidence_curve, confusion_matrix, mse, pair_forecasts, rank_models, rps,
                             score_all, wmse, write_metrics_json, write_ranks_csv)

UNIFORM = [[0.2] * 5]


def onehot(k):
    row = [0.0] * 5
    row[k - 1] = 1.0
    return row


def test_accuracy_examples():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([1, 1], [2, 2]) == 0.0
    assert accuracy([1, 2, 3, 4], [1, 2, 3, 5]) == 0.75


def test_mse_examples():
    assert mse([4, 2], [4, 2]) == 0.0
    assert mse([5], [1]) == 16.0
    assert mse([2, 4], [3, 3]) == 1.0


def test_point_errors():
    with pytest.raises(LengthMismatch):
        accuracy([1, 2], [1])
    with pytest.raises(Empty):
        mse([], [])


def test_wmse_examples():
    assert wmse([onehot(2)], [2]) == 0.0
    assert wmse(UNIFORM, [3]) == pytest.approx(2.0, abs=1e-15)
    for c in range(1, 6):
        assert wmse([onehot(c)], [4]) == mse([c], [4])


def test_brier_examples():
    assert brier([onehot(1)], [1]) == 0.0
    assert brier([onehot(1)], [3]) == 2.0
    for t in range(1, 6):
        assert brier(UNIFORM, [t]) == pytest.approx(0.8, abs=1e-15)


def test_rps_examples():
    assert rps([onehot(5)], [5]) == 0.0
    assert rps(UNIFORM, [3]) == pytest.approx(0.4, abs=1e-15)
    assert rps([onehot(1)], [5]) == 4.0


@pytest.mark.parametrize("fn", [wmse, brier, rps])
def test_invalid_distribution(fn):
    with pytest.raises(InvalidDistribution):
        fn([[0.5, 0.5, 0.5, 0.0, 0.0]], [1])
    with pytest.raises(InvalidDistribution):
        fn([[1.2, -0.2, 0, 0, 0]], [1])
    with pytest.raises(InvalidDistribution):
        fn([[0.25] * 4], [1])


def test_argmax_ties_go_low():
    assert argmax_class([[0, 0.5, 0, 0.5, 0]]).tolist() == [2]
    assert argmax_class(UNIFORM).tolist() == [1]


def test_confusion_matrix():
    assert np.array_equal(confusion_matrix([1, 2, 3, 4, 5], [1, 2, 3, 4, 5]), np.eye(5, dtype=int))
    cm = confusion_matrix([4], [2])
    assert cm[1, 3] == 1 and cm.sum() == 1


def test_confidence_curve_examples():
    probs = [onehot(1), [0.6, 0.4, 0, 0, 0], [0.3, 0.7, 0, 0, 0], UNIFORM[0]]
    truth = [1, 2, 2, 3]
    curve = confidence_curve(probs, truth, [0.0, 0.5, 0.9, 1.01])
    assert curve[0] == {"threshold": 0.0, "accuracy": accuracy(argmax_class(probs), truth), "coverage": 1.0}
    assert curve[1] == {"threshold": 0.5, "accuracy": 2 / 3, "coverage": 0.75}
    assert curve[3]["coverage"] == 0.0 and curve[3]["accuracy"] is None
    with pytest.raises(ValueError):
        confidence_curve(probs, truth, [0.5, 0.1])


def test_two_confidence_tiers_match_oracle():
    rng = random.Random(5)
    probs = [onehot(rng.randrange(1, 6)) if i % 2 else [0.3, 0.25, 0.2, 0.15, 0.1] for i in range(40)]
    truth = [rng.randrange(1, 6) for _ in range(40)]
    for row in confidence_curve(probs, truth, DEFAULT_THRESHOLDS):
        acc, cov = oracles.confidence_filter(probs, truth, row["threshold"])
        assert row["coverage"] == cov
        assert row["accuracy"] == acc


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_metrics_match_oracles(seed, n):
    probs, truth = oracles.random_case(random.Random(seed), n)
    pred = [oracles.argmax_low(r) for r in probs]
    assert argmax_class(probs).tolist() == pred
    assert abs(wmse(probs, truth) - oracles.wmse(probs, truth)) <= 1e-12
    assert abs(brier(probs, truth) - oracles.brier(probs, truth)) <= 1e-12
    assert abs(rps(probs, truth) - oracles.rps(probs, truth)) <= 1e-12
    assert abs(accuracy(pred, truth) - oracles.accuracy(pred, truth)) <= 1e-12
    assert abs(mse(pred, truth) - oracles.mse(pred, truth)) <= 1e-12
    cm = confusion_matrix(pred, truth)
    assert np.trace(cm) / cm.sum() == pytest.approx(accuracy(pred, truth), abs=1e-15)
    assert cm.sum(axis=1).tolist() == [truth.count(k) for k in range(1, 6)]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metric_ranges_and_coverage(seed):
    probs, truth = oracles.random_case(random.Random(seed), 25)
    assert 0 <= wmse(probs, truth) <= 16
    assert 0 <= brier(probs, truth) <= 2
    assert 0 <= rps(probs, truth) <= 4
    cov = [r["coverage"] for r in confidence_curve(probs, truth)]
    assert all(a >= b for a, b in zip(cov, cov[1:]))


def test_score_all_point_forecast_has_two_metrics():
    assert set(score_all([1, 2], pred=[1, 3])) == {"accuracy", "mse"}
    assert set(score_all([1, 2], probs=[onehot(1), onehot(3)])) == {"accuracy", "mse", "wmse", "brier", "rps"}


# --- ranking ---------------------------------------------------------------------------

def test_rank_single_and_dominating():
    one = {"A": {"accuracy": 0.5, "mse": 1.0, "wmse": 1.0, "brier": 0.5, "rps": 0.5}}
    assert rank_models(one)["A"]["average_rank"] == 1.0
    two = dict(one, B={"accuracy": 0.4, "mse": 2.0, "wmse": 2.0, "brier": 0.6, "rps": 0.6})
    r = rank_models(two)
    assert [r["A"][k] for k in ("accuracy", "mse", "wmse", "brier", "rps")] == [1] * 5
    assert [r["B"][k] for k in ("accuracy", "mse", "wmse", "brier", "rps")] == [2] * 5


def test_rank_three_model_table():
    table = {
        "A": {"accuracy": 0.6, "mse": 0.8, "wmse": 1.1, "brier": 0.55, "rps": 0.30},
        "B": {"accuracy": 0.6, "mse": 0.9, "wmse": 1.0, "brier": 0.60, "rps": 0.35},
        "C": {"accuracy": 0.5, "mse": 0.7, "wmse": 1.2, "brier": 0.50, "rps": 0.30},
    }
    # hand computed: A (1,2,2,2,1) B (1,3,1,3,3) C (3,1,3,1,1)
    r = rank_models(table)
    assert {m: r[m]["average_rank"] for m in table} == {"A": 1.6, "B": 2.2, "C": 1.8}
    assert {m: r[m]["average_rank"] for m in table} == oracles.average_ranks(table, {"accuracy"})


def test_point_model_ranked_on_two_metrics():
    table = {"AR": {"accuracy": 0.9, "mse": 0.1},
             "X": {"accuracy": 0.5, "mse": 0.5, "wmse": 1.0, "brier": 0.5, "rps": 0.5}}
    r = rank_models(table)
    assert r["AR"] == {"accuracy": 1, "mse": 1, "average_rank": 1.0}
    assert r["X"]["wmse"] == 1 and r["X"]["average_rank"] == pytest.approx(7 / 5)


# --- reports ----------------------------------------------------------------------------

def _forecasts():
    out = []
    for i, (state, week) in enumerate([(s, w) for s in ("AA", "BB") for w in (10, 11, 12)]):
        out.append(Forecast("M", state, week, 1, probs=tuple(onehot(i % 5 + 1))))
        out.append(Forecast("AR", state, week, 1, point_class=3))
    return out


def test_report_structure(tmp_path):
    truth = {(s, w): 3 for s in ("AA", "BB") for w in (10, 11, 12)}
    scored = pair_forecasts(_forecasts(), truth)
    report = build_report(scored)
    assert set(report["AR"]) == {"overall", "by_state", "by_week", "confusion"}
    assert set(report["AR"]["overall"]) == {"accuracy", "mse"}
    assert report["AR"]["overall"]["accuracy"] == 1.0
    assert set(report["M"]["by_state"]) == {"AA", "BB"}
    assert set(report["M"]["by_week"]) == {"10", "11", "12"}
    assert len(report["M"]["confidence_curve"]) == len(DEFAULT_THRESHOLDS)
    assert aggregate(scored, "state")["M"]["AA"]["accuracy"] == pytest.approx(1 / 3)

    write_metrics_json({"h1": report}, tmp_path / "m.json")
    back = json.loads((tmp_path / "m.json").read_text())
    assert back["h1"]["M"]["overall"]["wmse"] == pytest.approx(report["M"]["overall"]["wmse"], rel=1e-11)
    write_ranks_csv(rank_models(aggregate(scored, "model")), tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "model_id,accuracy,mse,wmse,brier,rps,average_rank"
    assert lines[1] == "AR,1,1,,,,1"
