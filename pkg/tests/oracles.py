"""Independent brute-force oracles.

Plain Python loops written straight from the definitions. Nothing here
imports the package; the class thresholds are restated below.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict

K = 5


# scoring rules ---------------------------------------------------------------

def accuracy(pred, truth):
    hits = 0
    for p, t in zip(pred, truth):
        if p == t:
            hits += 1
    return hits / len(truth)


def mse(pred, truth):
    total = 0.0
    for p, t in zip(pred, truth):
        total += (p - t) ** 2
    return total / len(truth)


def wmse(probs, truth):
    total = 0.0
    for row, t in zip(probs, truth):
        s = 0.0
        for k in range(1, K + 1):
            s += row[k - 1] * (k - t) ** 2
        total += s
    return total / len(truth)


def brier(probs, truth):
    total = 0.0
    for row, t in zip(probs, truth):
        s = 0.0
        for k in range(1, K + 1):
            o = 1.0 if k == t else 0.0
            s += (row[k - 1] - o) ** 2
        total += s
    return total / len(truth)


def rps(probs, truth):
    total = 0.0
    for row, t in zip(probs, truth):
        s = 0.0
        for k in range(1, K + 1):
            q = 0.0
            for j in range(1, k + 1):
                q += row[j - 1]
            qbar = 1.0 if t <= k else 0.0
            s += (qbar - q) ** 2
        total += s
    return total / len(truth)


def argmax_low(row):
    best = 0
    for k in range(1, K):
        if row[k] > row[best]:
            best = k
    return best + 1


def confidence_filter(probs, truth, tau):
    kept = [(argmax_low(r), t) for r, t in zip(probs, truth) if max(r) >= tau]
    if not kept:
        return None, 0.0
    return sum(1 for p, t in kept if p == t) / len(kept), len(kept) / len(truth)


# labels ----------------------------------------------------------------------

THRESH = {1: (1.0, 3.0), 3: (1.5, 4.5)}


def category(ht, h):
    m, s = THRESH[h]
    if ht > s:
        return 5
    if ht > m:
        return 4
    if ht < -s:
        return 1
    if ht < -m:
        return 2
    return 3


def labels_from_csv(path, h):
    """{(state, week_index): (ht, class)} recomputed from epi.csv rows."""
    rows = defaultdict(list)
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows[r["state"]].append((int(r["week_index"]), float(r["hosp_rate"])))
    out = {}
    for state, pts in rows.items():
        pts.sort()
        hr = [v for _, v in pts]
        for t in range(2, len(hr) - h):
            # chronological summation order, so HT can be compared exactly
            ht = hr[t + h] - (hr[t - 2] + hr[t - 1] + hr[t]) / 3
            out[(state, pts[t][0])] = (ht, category(ht, h))
    return out


def prev_infections(cases, pop, t):
    if t < 16:
        return None
    return math.fsum(cases[t - 16:t - 3]) / pop


def prevtrend_counts(hr_by_state, t, h):
    counts = [0] * K
    for hr in hr_by_state.values():
        base = (hr[t - h] + hr[t - h - 1] + hr[t - h - 2]) / 3
        counts[category(hr[t] - base, h) - 1] += 1
    n = len(hr_by_state)
    return [c / n for c in counts]


def average_ranks(table, higher_better):
    """table: {model: {metric: value}} -> {model: average min-rank}."""
    models = sorted(table)
    metrics = sorted(next(iter(table.values())))
    ranks = {m: [] for m in models}
    for met in metrics:
        for m in models:
            better = 0
            for o in models:
                a, b = table[o][met], table[m][met]
                if (a > b) if met in higher_better else (a < b):
                    better += 1
            ranks[m].append(better + 1)
    return {m: sum(r) / len(r) for m, r in ranks.items()}


# fixtures --------------------------------------------------------------------

def random_case(rng, n):
    """n (distribution, truth) pairs from a ``random.Random``; includes one-hots and ties."""
    probs, truth = [], []
    for _ in range(n):
        kind = rng.random()
        if kind < 0.15:
            row = [0.0] * K
            row[rng.randrange(K)] = 1.0
        elif kind < 0.25:
            row = [0.2] * K
        elif kind < 0.35:
            a, b = rng.sample(range(K), 2)
            row = [0.0] * K
            row[a] = row[b] = 0.5
        else:
            w = [rng.random() ** 2 for _ in range(K)]
            s = sum(w)
            row = [x / s for x in w]
        probs.append(row)
        truth.append(rng.randrange(1, K + 1))
    return probs, truth
