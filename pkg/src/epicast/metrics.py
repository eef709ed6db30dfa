"""Scoring rules, confusion matrices, confidence curves and model ranking.

Classes are ordinals 1..5. Distributions are (N, 5) arrays whose columns are
ordered by ordinal.
"""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import Empty, InvalidDistribution, LengthMismatch
from .forecast import SUM_TOL, Forecast

K = 5
METRICS = ("accuracy", "mse", "wmse", "brier", "rps")
POINT_METRICS = ("accuracy", "mse")
HIGHER_BETTER = frozenset({"accuracy"})
DEFAULT_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(21))


def _classes(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.int64).reshape(-1)
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    if len(p) != len(t):
        raise LengthMismatch(f"{len(p)} predictions vs {len(t)} truths")
    if len(t) == 0:
        raise Empty("no examples to score")
    return p, t


def _dists(probs, truth) -> tuple[np.ndarray, np.ndarray]:
    P = np.asarray(probs, dtype=float)
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    if P.ndim != 2 or P.shape[1] != K:
        raise InvalidDistribution(f"expected (N, {K}) probabilities, got {P.shape}")
    if len(P) != len(t):
        raise LengthMismatch(f"{len(P)} distributions vs {len(t)} truths")
    if len(t) == 0:
        raise Empty("no examples to score")
    if (P < 0).any() or not np.all(np.abs(P.sum(axis=1) - 1.0) <= SUM_TOL):
        raise InvalidDistribution("rows must be nonnegative and sum to 1")
    return P, t


def argmax_class(probs) -> np.ndarray:
    """Predicted ordinal; np.argmax already resolves ties to the lowest index."""
    return np.argmax(np.asarray(probs, dtype=float), axis=-1) + 1


def accuracy(pred, truth) -> float:
    p, t = _classes(pred, truth)
    return float(np.mean(p == t))


def mse(pred, truth) -> float:
    p, t = _classes(pred, truth)
    return float(np.mean((p - t) ** 2))


def wmse(probs, truth) -> float:
    """Probability-weighted squared ordinal distance to the true class."""
    P, t = _dists(probs, truth)
    k = np.arange(1, K + 1)
    return float(np.mean(np.sum(P * (k[None, :] - t[:, None]) ** 2, axis=1)))


def brier(probs, truth) -> float:
    P, t = _dists(probs, truth)
    onehot = np.eye(K)[t - 1]
    return float(np.mean(np.sum((P - onehot) ** 2, axis=1)))


def rps(probs, truth) -> float:
    """Sum over classes of squared cumulative gaps; no 1/(K-1) normalization."""
    P, t = _dists(probs, truth)
    cum_pred = np.cumsum(P, axis=1)
    cum_true = (np.arange(1, K + 1)[None, :] >= t[:, None]).astype(float)
    return float(np.mean(np.sum((cum_true - cum_pred) ** 2, axis=1)))


def confusion_matrix(pred, truth) -> np.ndarray:
    """Counts indexed [true - 1, pred - 1]."""
    p, t = _classes(pred, truth)
    cm = np.zeros((K, K), dtype=np.int64)
    np.add.at(cm, (t - 1, p - 1), 1)
    return cm


def confidence_curve(probs, truth, thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> list[dict]:
    P, t = _dists(probs, truth)
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    conf = P.max(axis=1)
    hit = argmax_class(P) == t
    out = []
    for tau in thresholds:
        keep = conf >= tau
        n = int(keep.sum())
        out.append({"threshold": float(tau),
                    "accuracy": float(hit[keep].mean()) if n else None,
                    "coverage": n / len(t)})
    return out


def score_all(truth, probs=None, pred=None) -> dict[str, float]:
    """All applicable metrics; point forecasts (pred only) get accuracy and MSE."""
    if probs is not None:
        pred = argmax_class(probs)
        return {"accuracy": accuracy(pred, truth), "mse": mse(pred, truth), "wmse": wmse(probs, truth),
                "brier": brier(probs, truth), "rps": rps(probs, truth)}
    return {"accuracy": accuracy(pred, truth), "mse": mse(pred, truth)}


# --- aggregation and ranking ----------------------------------------------

@dataclass(frozen=True)
class ScoredForecast:
    model_id: str
    state: str
    week_index: int
    truth: int
    probs: tuple[float, ...] | None
    pred: int


def pair_forecasts(forecasts: Iterable[Forecast], truth: Mapping[tuple[str, int], int]) -> list[ScoredForecast]:
    out = []
    for f in forecasts:
        key = (f.state, f.week_index)
        if key not in truth:
            continue
        out.append(ScoredForecast(f.model_id, f.state, f.week_index, int(truth[key]), f.probs, int(f.predicted)))
    return out


def _group_scores(items: Sequence[ScoredForecast]) -> dict[str, float]:
    truth = [s.truth for s in items]
    if all(s.probs is not None for s in items):
        return score_all(truth, probs=[s.probs for s in items])
    return score_all(truth, pred=[s.pred for s in items])


def aggregate(scored: Sequence[ScoredForecast], group_by: str) -> dict:
    """Group means keyed by model, then by state / week (or just by model)."""
    if group_by not in ("model", "state", "week"):
        raise ValueError("group_by must be 'model', 'state' or 'week'")
    by_model: dict[str, list[ScoredForecast]] = defaultdict(list)
    for s in scored:
        by_model[s.model_id].append(s)
    if group_by == "model":
        return {m: _group_scores(items) for m, items in sorted(by_model.items())}
    out = {}
    for m, items in sorted(by_model.items()):
        groups: dict = defaultdict(list)
        for s in items:
            groups[s.state if group_by == "state" else s.week_index].append(s)
        out[m] = {str(g): _group_scores(v) for g, v in sorted(groups.items())}
    return out


def rank_models(aggregates: Mapping[str, Mapping[str, float]]) -> dict[str, dict[str, float]]:
    """Per-metric ranks (1 = best, ties share the minimum rank) and their mean.

    A model is ranked only on the metrics it reports, so point forecasters are
    averaged over accuracy and MSE.
    """
    models = sorted(aggregates)
    ranks: dict[str, dict[str, float]] = {m: {} for m in models}
    for metric in METRICS:
        have = [m for m in models if metric in aggregates[m]]
        for m in have:
            v = aggregates[m][metric]
            if metric in HIGHER_BETTER:
                better = sum(1 for o in have if aggregates[o][metric] > v)
            else:
                better = sum(1 for o in have if aggregates[o][metric] < v)
            ranks[m][metric] = better + 1
    for m in models:
        vals = [ranks[m][k] for k in METRICS if k in ranks[m]]
        ranks[m]["average_rank"] = float(np.mean(vals))
    return ranks


# --- reports ----------------------------------------------------------------

def _sig(x):
    if isinstance(x, float):
        return float(f"{x:.12g}")
    if isinstance(x, dict):
        return {k: _sig(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_sig(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return _sig(float(x))
    return x


def build_report(scored: Sequence[ScoredForecast], thresholds=DEFAULT_THRESHOLDS) -> dict:
    overall = aggregate(scored, "model")
    by_state = aggregate(scored, "state")
    by_week = aggregate(scored, "week")
    report = {}
    for m in overall:
        items = [s for s in scored if s.model_id == m]
        truth = [s.truth for s in items]
        entry = {
            "overall": overall[m],
            "by_state": by_state[m],
            "by_week": by_week[m],
            "confusion": confusion_matrix([s.pred for s in items], truth).tolist(),
        }
        if all(s.probs is not None for s in items):
            entry["confidence_curve"] = confidence_curve([s.probs for s in items], truth, thresholds)
        report[m] = entry
    return report


def write_metrics_json(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_sig(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_ranks_csv(ranks: Mapping[str, Mapping[str, float]], path) -> None:
    cols = ("model_id",) + METRICS + ("average_rank",)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for m in sorted(ranks, key=lambda m: (ranks[m]["average_rank"], m)):
            r = ranks[m]
            w.writerow([m] + [("" if k not in r else f"{r[k]:.12g}") for k in cols[1:]])
