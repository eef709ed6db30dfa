"""Class distributions and the forecasts.jsonl record format."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidDistribution
from .targets import HtcClass

N_CLASSES = 5
SUM_TOL = 1e-9


@dataclass(frozen=True)
class ClassDistribution:
    probs: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (N_CLASSES,) or not np.all(np.isfinite(p)) or p.min() < 0:
            raise InvalidDistribution(f"not a 5-class distribution: {self.probs}")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise InvalidDistribution(f"probabilities sum to {p.sum()!r}")

    @classmethod
    def from_logits(cls, logits) -> "ClassDistribution":
        return cls(tuple(softmax(logits).tolist()))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    @property
    def argmax(self) -> HtcClass:
        # ties resolve to the lower ordinal
        return HtcClass(int(np.argmax(self.as_array())) + 1)

    @property
    def confidence(self) -> float:
        return max(self.probs)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def one_hot(cls: HtcClass | int) -> ClassDistribution:
    p = [0.0] * N_CLASSES
    p[int(cls) - 1] = 1.0
    return ClassDistribution(tuple(p))


@dataclass(frozen=True)
class Forecast:
    model_id: str
    state: str
    week_index: int
    horizon: int
    probs: tuple[float, ...] | None = None
    point_class: int | None = None

    def __post_init__(self):
        if (self.probs is None) == (self.point_class is None):
            raise ValueError("exactly one of probs / point_class must be set")

    @property
    def predicted(self) -> HtcClass:
        if self.point_class is not None:
            return HtcClass(self.point_class)
        return ClassDistribution(self.probs).argmax

    def to_json(self) -> str:
        d = {"model_id": self.model_id, "state": self.state,
             "week_index": self.week_index, "horizon": self.horizon}
        if self.probs is not None:
            d["probs"] = [float(_sig(p)) for p in self.probs]
        else:
            d["point_class"] = int(self.point_class)
        return json.dumps(d)

    @classmethod
    def from_json(cls, line: str) -> "Forecast":
        d = json.loads(line)
        probs = d.get("probs")
        return cls(d["model_id"], d["state"], int(d["week_index"]), int(d["horizon"]),
                   tuple(probs) if probs is not None else None, d.get("point_class"))


def _sig(x: float, digits: int = 12) -> float:
    return float(f"{x:.{digits}g}")


def write_forecasts(forecasts: Iterable[Forecast], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f in forecasts:
            fh.write(f.to_json() + "\n")


def read_forecasts(path) -> list[Forecast]:
    with open(path, encoding="utf-8") as fh:
        return [Forecast.from_json(line) for line in fh if line.strip()]


def distributions_array(forecasts: Sequence[Forecast]) -> np.ndarray:
    return np.array([f.probs for f in forecasts], dtype=float)
