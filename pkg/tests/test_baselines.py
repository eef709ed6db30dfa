from dataclasses import fields

import numpy as np
import pytest

import oracles
from epicast.baselines import (NUMERIC_FEATURES, SeqTrainConfig, ar_class, ar_fit, ar_forecast, init_seq_classifier,
                               load_seq_classifier, numeric_features, predict_seq_classifier, predict_seq_proba,
                               prevtrend, realized_classes, save_seq_classifier, train_seq_classifier)
from epicast.data.assemble import assemble_dataset
from epicast.data.types import DataRecord
from epicast.errors import EmptyStateSet, InsufficientHistory
from epicast.neural.autodiff import Tensor
from epicast.targets import HtcClass, categorize

S = HtcClass


# --- PrevTrend ----------------------------------------------------------------------

def test_prevtrend_examples():
    assert prevtrend([S.STABLE] * 5 + [S.MODERATE_INCREASE] * 5).probs == (0, 0, 0.5, 0.5, 0)
    assert prevtrend([S.SUBSTANTIAL_DECREASE] * 7).probs == (1, 0, 0, 0, 0)
    with pytest.raises(EmptyStateSet):
        prevtrend([])


def test_prevtrend_matches_counting_oracle(default_panels):
    hr = {c: [p.hosp_rate for p in pts] for c, pts in default_panels.epi.items()}
    for h in (1, 3):
        for t in range(h + 2, 80):
            got = prevtrend(realized_classes(hr, t, h)).probs
            assert got == tuple(oracles.prevtrend_counts(hr, t, h))


def test_realized_classes_backward_only():
    hr = {"A": [1.0, 1.0, 1.0, 1.0, 9.0], "B": [0.0] * 5}
    assert realized_classes(hr, 3, 1) == [S.STABLE, S.STABLE]
    assert realized_classes(hr, 4, 1) == [S.SUBSTANTIAL_INCREASE, S.STABLE]


# --- sequence classifiers ------------------------------------------------------------

def test_feature_schema_is_numeric_only(fixture_panels):
    rec = assemble_dataset(fixture_panels)[0]
    X = numeric_features(rec)
    assert X.shape == (len(rec.epi), len(NUMERIC_FEATURES))
    with pytest.raises(AssertionError):
        numeric_features(rec, NUMERIC_FEATURES + ("policies",))
    text_fields = {"policies", "previous_policies", "genomic", "spatial", "share_ranks"}
    assert text_fields <= {f.name for f in fields(DataRecord)}
    assert not text_fields & set(NUMERIC_FEATURES)


def test_bilstm_width():
    clf = init_seq_classifier("BiLSTM", 5, 7, np.random.default_rng(0))
    assert clf.hidden(Tensor(np.zeros((3, 4, 5)))).shape == (3, 14)
    assert init_seq_classifier("LSTM", 5, 7, np.random.default_rng(0)).hidden(Tensor(np.zeros((3, 4, 5)))).shape == (3, 7)


@pytest.fixture(scope="module")
def separable(default_panels):
    """Labels are a fixed threshold rule on the last one-week trend value."""
    recs = assemble_dataset(default_panels)
    X = np.stack([numeric_features(r) for r in recs])
    y = np.array([int(categorize(r.recent_trend[-1], 1)) - 1 for r in recs])
    idx = np.random.default_rng(0).permutation(len(recs))
    cut = int(0.75 * len(idx))
    return X[idx[:cut]], y[idx[:cut]], X[idx[cut:]], y[idx[cut:]]


@pytest.mark.parametrize("kind", ["GRU", "LSTM", "BiLSTM"])
def test_separable_task(kind, separable):
    Xtr, ytr, Xte, yte = separable
    clf = train_seq_classifier(kind, Xtr, ytr, seed=0, cfg=SeqTrainConfig(hidden_size=32, epochs=10))
    probs = predict_seq_proba(clf, Xte)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert np.mean(probs.argmax(axis=1) == yte) > 0.9


def test_classifier_round_trip_and_determinism(fixture_panels, tmp_path):
    recs = assemble_dataset(fixture_panels)[:24]
    X = np.stack([numeric_features(r) for r in recs])
    y = np.arange(24) % 5
    cfg = SeqTrainConfig(hidden_size=6, epochs=2)
    a = train_seq_classifier("BiLSTM", X, y, seed=1, cfg=cfg)
    b = train_seq_classifier("BiLSTM", X, y, seed=1, cfg=cfg)
    assert np.array_equal(predict_seq_proba(a, X), predict_seq_proba(b, X))
    save_seq_classifier(a, tmp_path / "c.bundle")
    back = load_seq_classifier(tmp_path / "c.bundle")
    assert np.array_equal(predict_seq_proba(back, X), predict_seq_proba(a, X))
    save_seq_classifier(back, tmp_path / "d.bundle")
    assert (tmp_path / "c.bundle").read_bytes() == (tmp_path / "d.bundle").read_bytes()
    assert sum(predict_seq_classifier(a, recs[0]).probs) == pytest.approx(1.0, abs=1e-9)


# --- AR -------------------------------------------------------------------------------

def test_ar_constant_series():
    y = [5.0] * 12
    assert ar_forecast(ar_fit(y), y, 1) == 5.0
    assert ar_class(y, 1) is S.STABLE
    assert ar_class(y, 3) is S.STABLE


def test_ar_linear_series():
    y = 2.0 + 0.7 * np.arange(20)
    for p in (1, 2, 3):
        assert abs(ar_forecast(ar_fit(y[:-1], p), y[:-1], 1) - y[-1]) < 1e-8


def test_ar_recovers_coefficients():
    true = np.array([0.5, -0.3, 0.1])
    rng = np.random.default_rng(0)
    d = list(rng.normal(size=3))
    for _ in range(60):
        d.append(float(np.dot(true, d[-1:-4:-1])))
    y = np.concatenate([[10.0], 10.0 + np.cumsum(d)])
    assert np.allclose(ar_fit(y, 3), true, atol=1e-6)


def test_ar_short_series():
    with pytest.raises(InsufficientHistory):
        ar_fit([1.0, 2.0, 3.0, 4.0], 3)
    ar_fit([1.0, 2.0, 4.0, 3.0, 5.0], 3)


def test_ar_singular_falls_back_to_persistence():
    # differences 0,0,0,1: the lag design is all zeros but the target is not
    y = [4.0, 4.0, 4.0, 4.0, 5.0]
    assert ar_class(y, 1) is categorize(5.0 - (4 + 4 + 5) / 3, 1)
