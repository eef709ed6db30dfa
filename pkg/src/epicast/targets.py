"""Hospitalization trend values, ordinal trend categories and previous infections.

Labels are anchored at the issue week ``t``: a forecast issued at ``t`` for
horizon ``h`` is scored against ``HR(t+h) - mean(HR(t-2..t))``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping, Sequence

from .data.types import DataRecord, EpiSeriesPoint, Panels
from .errors import FutureUnavailable, InsufficientHistory

log = logging.getLogger(__name__)

HORIZONS = (1, 3)
# (moderate, substantial) thresholds in hospitalizations per 100k
THRESHOLDS = {1: (1.0, 3.0), 3: (1.5, 4.5)}
PI_START, PI_END = 16, 4


class HtcClass(IntEnum):
    SUBSTANTIAL_DECREASE = 1
    MODERATE_DECREASE = 2
    STABLE = 3
    MODERATE_INCREASE = 4
    SUBSTANTIAL_INCREASE = 5

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def token(self) -> str:
        return f"<{_LABELS[self]}>"

    @classmethod
    def from_label(cls, label: str) -> "HtcClass":
        return _BY_LABEL[label.strip("<>")]


_LABELS = {
    HtcClass.SUBSTANTIAL_DECREASE: "Substantial Decrease",
    HtcClass.MODERATE_DECREASE: "Moderate Decrease",
    HtcClass.STABLE: "Stable",
    HtcClass.MODERATE_INCREASE: "Moderate Increase",
    HtcClass.SUBSTANTIAL_INCREASE: "Substantial Increase",
}
_BY_LABEL = {v: k for k, v in _LABELS.items()}
CLASS_TOKENS = tuple(c.token for c in HtcClass)


@dataclass(frozen=True)
class TrendValue:
    value: float
    horizon: int

    def __post_init__(self):
        if self.horizon not in THRESHOLDS:
            raise ValueError(f"horizon must be one of {HORIZONS}, got {self.horizon}")
        if not math.isfinite(self.value):
            raise ValueError("trend value must be finite")


@dataclass(frozen=True)
class LabeledExample:
    state: str
    week_index: int
    horizon: int
    ht: float
    target: HtcClass
    record: DataRecord | None = None


def smoothed_hr(series: Sequence[float], t: int) -> float:
    if t < 2:
        raise InsufficientHistory(f"smoothed rate needs t >= 2, got {t}")
    if t >= len(series):
        raise FutureUnavailable(f"week {t} beyond series of length {len(series)}")
    return (series[t - 2] + series[t - 1] + series[t]) / 3.0


def hosp_trend(series: Sequence[float], t: int, h: int) -> TrendValue:
    if t < 2:
        raise InsufficientHistory(f"trend needs t >= 2, got {t}")
    if t + h >= len(series):
        raise FutureUnavailable(f"week {t + h} not observed")
    return TrendValue(series[t + h] - smoothed_hr(series, t), h)


def realized_trend(series: Sequence[float], t: int, h: int) -> TrendValue:
    """Backward-looking analogue: HR(t) against the smoothed rate ``h`` weeks earlier."""
    if t - h < 2:
        raise InsufficientHistory(f"realized trend needs t - h >= 2, got t={t}, h={h}")
    return TrendValue(series[t] - smoothed_hr(series, t - h), h)


def categorize(ht: TrendValue | float, horizon: int | None = None) -> HtcClass:
    """Map a trend value to its ordinal class; exact thresholds go to the less extreme class."""
    if isinstance(ht, TrendValue):
        value, horizon = ht.value, ht.horizon
    else:
        value = float(ht)
    moderate, substantial = THRESHOLDS[horizon]
    if value > substantial:
        return HtcClass.SUBSTANTIAL_INCREASE
    if value > moderate:
        return HtcClass.MODERATE_INCREASE
    if value >= -moderate:
        return HtcClass.STABLE
    if value >= -substantial:
        return HtcClass.MODERATE_DECREASE
    return HtcClass.SUBSTANTIAL_DECREASE


def previous_infections(cases: Sequence[float], pop: float, t: int) -> float:
    if t < PI_START:
        raise InsufficientHistory(f"previous infections need t >= {PI_START}, got {t}")
    if pop <= 0:
        raise ValueError("population must be positive")
    return math.fsum(cases[t - PI_START:t - PI_END + 1]) / pop


def _series_by_state(source) -> Mapping[str, list[EpiSeriesPoint]]:
    if isinstance(source, Panels):
        return source.epi
    return source


def build_labels(source: Panels | Mapping[str, list[EpiSeriesPoint]], h: int) -> list[LabeledExample]:
    """One example per (state, issue week) with ``t >= 2`` and ``HR(t+h)`` observed.

    Week indices in the panel may start at any offset; ``t`` counts from the
    first observed week of each state.
    """
    out = []
    skipped = 0
    for state, points in sorted(_series_by_state(source).items()):
        hr = [p.hosp_rate for p in points]
        for t, point in enumerate(points):
            try:
                ht = hosp_trend(hr, t, h)
            except (InsufficientHistory, FutureUnavailable):
                skipped += 1
                continue
            out.append(LabeledExample(state, point.week.index, h, ht.value, categorize(ht)))
    if skipped:
        log.debug("build_labels(h=%d): skipped %d state-weeks without label", h, skipped)
    return out


def attach_records(labels: Sequence[LabeledExample], records: Sequence[DataRecord]) -> list[LabeledExample]:
    """Pair labels with assembled records; labels with no record are dropped."""
    by_key = {(r.state.code, r.week.index): r for r in records}
    out = []
    for ex in labels:
        rec = by_key.get((ex.state, ex.week_index))
        if rec is not None:
            out.append(LabeledExample(ex.state, ex.week_index, ex.horizon, ex.ht, ex.target, rec))
    return out


LABEL_COLUMNS = ("state", "week_index", "horizon", "ht_value", "htc_ordinal", "htc_label")


def write_labels_csv(labels: Sequence[LabeledExample], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LABEL_COLUMNS)
        for ex in labels:
            writer.writerow([ex.state, ex.week_index, ex.horizon, repr(float(ex.ht)),
                             int(ex.target), ex.target.label])


def read_labels_csv(path) -> list[LabeledExample]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            LabeledExample(row["state"], int(row["week_index"]), int(row["horizon"]),
                           float(row["ht_value"]), HtcClass(int(row["htc_ordinal"])))
            for row in csv.DictReader(fh)
        ]
