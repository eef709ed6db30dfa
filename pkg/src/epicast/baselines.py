"""Reference forecasters: PrevTrend, numeric-only sequence classifiers and AR(p)."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data.types import DataRecord
from .errors import EmptyStateSet, InsufficientHistory, MissingBundle, NonFiniteLoss, SingularSystem
from .forecast import ClassDistribution, softmax
from .neural import autodiff as ad
from .neural.autodiff import Tensor
from .neural.bundle import read_blob, write_blob
from .neural.encoders import SeqEncoder, reverse_time
from .neural.optim import Adam, clip_grad_norm
from .targets import HtcClass, categorize, realized_trend, smoothed_hr

log = logging.getLogger(__name__)

BASELINE_IDS = ("PrevTrend", "GRU", "LSTM", "BiLSTM", "AR")
SEQ_KINDS = ("GRU", "LSTM", "BiLSTM")

# Per-step numeric features. Anything derived from policy, genomic or spatial
# text is deliberately absent.
NUMERIC_FEATURES = ("hosp_rate", "hosp_trend", "case_rate", "vax_complete", "prev_infections")
_TEXT_FIELDS = frozenset({"policies", "previous_policies", "genomic", "spatial", "share_ranks"})


# --- PrevTrend -------------------------------------------------------------

def prevtrend(realized: Sequence[HtcClass]) -> ClassDistribution:
    """Cross-state frequencies of the latest realized trend categories."""
    if len(realized) == 0:
        raise EmptyStateSet("PrevTrend needs at least one state")
    counts = Counter(int(c) for c in realized)
    n = len(realized)
    probs = [counts.get(k, 0) / n for k in range(1, 6)]
    return ClassDistribution(tuple(probs))


def realized_classes(series_by_state: Mapping[str, Sequence[float]], t: int, h: int) -> list[HtcClass]:
    """Backward-looking category HR(t) - smoothed(t - h) per state at issue week t."""
    return [categorize(realized_trend(series, t, h)) for _, series in sorted(series_by_state.items())]


# --- numeric sequence classifiers -----------------------------------------

def numeric_features(record: DataRecord, features: Sequence[str] = NUMERIC_FEATURES) -> np.ndarray:
    """(window, n_features) matrix of numeric inputs for one record."""
    unknown = set(features) - set(NUMERIC_FEATURES)
    assert not unknown, f"non-numeric features requested: {sorted(unknown)}"
    assert not (set(features) & _TEXT_FIELDS)
    pop = record.state.population
    pi = 0.0 if record.prev_infections is None else record.prev_infections
    cols = {
        "hosp_rate": [p.hosp_rate for p in record.epi],
        "hosp_trend": list(record.recent_trend),
        "case_rate": [p.cases / pop * 1e5 for p in record.epi],
        "vax_complete": [p.vax_complete for p in record.epi],
        "prev_infections": [pi] * len(record.epi),
    }
    return np.column_stack([cols[f] for f in features]).astype(float)


@dataclass
class SeqClassifier:
    kind: str
    encoders: list[SeqEncoder]
    head_W: Tensor
    head_b: Tensor
    feat_mean: np.ndarray
    feat_std: np.ndarray
    features: tuple[str, ...] = NUMERIC_FEATURES

    @property
    def params(self) -> list[Tensor]:
        out = [self.head_W, self.head_b]
        for e in self.encoders:
            out += list(e.params.values())
        return out

    def hidden(self, X: Tensor) -> Tensor:
        """Final hidden state; BiLSTM concatenates forward and backward (width 2H)."""
        h = self.encoders[0].forward(X)
        if self.kind == "BiLSTM":
            h = ad.concat([h, self.encoders[1].forward(reverse_time(X))], axis=-1)
        return h

    def logits(self, raw: np.ndarray) -> Tensor:
        X = Tensor((raw - self.feat_mean) / self.feat_std)
        return ad.matmul(self.hidden(X), self.head_W) + self.head_b


@dataclass(frozen=True)
class SeqTrainConfig:
    hidden_size: int = 64
    lr: float = 1e-2
    clip: float = 1.0
    batch_size: int = 16
    epochs: int = 20


def init_seq_classifier(kind: str, n_features: int, hidden: int, rng: np.random.Generator,
                        features: Sequence[str] = NUMERIC_FEATURES) -> SeqClassifier:
    if kind not in SEQ_KINDS:
        raise ValueError(f"kind must be one of {SEQ_KINDS}")
    cell = "GRU" if kind == "GRU" else "LSTM"
    n_dir = 2 if kind == "BiLSTM" else 1
    encoders = [SeqEncoder.init(cell, n_features, hidden, rng, prefix=f"enc{i}") for i in range(n_dir)]
    width = hidden * n_dir
    W = Tensor(rng.normal(0.0, 1.0 / np.sqrt(width), size=(width, 5)), True, "head.W")
    b = Tensor(np.zeros(5), True, "head.b")
    return SeqClassifier(kind, encoders, W, b, np.zeros(n_features), np.ones(n_features), tuple(features))


def train_seq_classifier(kind: str, X: np.ndarray, y: Sequence[int], seed: int,
                         cfg: SeqTrainConfig = SeqTrainConfig(),
                         features: Sequence[str] = NUMERIC_FEATURES) -> SeqClassifier:
    """Fit on X (N, T, F) with integer class indices y in 0..4."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(seed)
    clf = init_seq_classifier(kind, X.shape[2], cfg.hidden_size, rng, features)
    flat = X.reshape(-1, X.shape[2])
    std = flat.std(axis=0)
    clf.feat_mean, clf.feat_std = flat.mean(axis=0), np.where(std > 0, std, 1.0)
    opt = Adam(clf.params, lr=cfg.lr)
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(X))
        for i in range(0, len(order), cfg.batch_size):
            idx = order[i:i + cfg.batch_size]
            opt.zero_grad()
            loss = ad.log_softmax_nll(clf.logits(X[idx]), y[idx])
            if not np.isfinite(loss.data):
                raise NonFiniteLoss(step, f"{kind} classifier")
            loss.backward()
            clip_grad_norm(opt.params, cfg.clip)
            opt.step()
            step += 1
    return clf


def save_seq_classifier(clf: SeqClassifier, path) -> None:
    arrays = [(n, t.data) for e in clf.encoders for n, t in e.params.items()]
    arrays += [("head.W", clf.head_W.data), ("head.b", clf.head_b.data),
               ("feat_mean", clf.feat_mean), ("feat_std", clf.feat_std)]
    header = {"kind": "seq_classifier", "model_id": clf.kind, "features": list(clf.features),
              "hidden_size": clf.encoders[0].hidden_size}
    write_blob(path, header, arrays)


def load_seq_classifier(path) -> SeqClassifier:
    header, arrays = read_blob(path)
    if header.get("kind") != "seq_classifier":
        raise MissingBundle(f"{path} does not hold a sequence classifier")
    kind, hidden = header["model_id"], header["hidden_size"]
    cell = "GRU" if kind == "GRU" else "LSTM"
    n_features = len(header["features"])
    encoders = []
    for i in range(2 if kind == "BiLSTM" else 1):
        names = [e["name"] for e in header["arrays"] if e["name"].startswith(f"enc{i}.")]
        encoders.append(SeqEncoder(cell, n_features, hidden, {n: Tensor(arrays[n], True, n) for n in names}))
    return SeqClassifier(kind, encoders, Tensor(arrays["head.W"], True, "head.W"),
                         Tensor(arrays["head.b"], True, "head.b"), arrays["feat_mean"], arrays["feat_std"],
                         tuple(header["features"]))


def predict_seq_proba(clf: SeqClassifier, X: np.ndarray) -> np.ndarray:
    return softmax(clf.logits(np.asarray(X, dtype=float)).data)


def predict_seq_classifier(clf: SeqClassifier, record: DataRecord) -> ClassDistribution:
    probs = predict_seq_proba(clf, numeric_features(record, clf.features)[None])[0]
    return ClassDistribution(tuple(probs.tolist()))


# --- AR(p) on first differences -------------------------------------------

AR_ORDER = 3
_RESID_TOL = 1e-9


def ar_fit(series: Sequence[float], p: int = AR_ORDER) -> np.ndarray:
    """Least-squares AR(p) coefficients on first differences (no intercept).

    Rank-deficient designs are accepted when the minimum-norm solution fits
    exactly (e.g. a perfectly linear series); otherwise SingularSystem.
    """
    y = np.asarray(series, dtype=float)
    if p < 1:
        raise ValueError("AR order must be >= 1")
    if len(y) <= p + 1:
        raise InsufficientHistory(f"AR({p}) needs more than {p + 1} points, got {len(y)}")
    d = np.diff(y)
    rows = np.array([d[j - p:j][::-1] for j in range(p, len(d))])
    target = d[p:]
    coef, _, rank, _ = np.linalg.lstsq(rows, target, rcond=None)
    if rank < p:
        resid = target - rows @ coef
        if np.max(np.abs(resid)) > _RESID_TOL * max(1.0, np.max(np.abs(target))):
            raise SingularSystem(f"AR({p}) design has rank {rank}")
    return coef


def ar_forecast(coef: np.ndarray, series: Sequence[float], h: int) -> float:
    """Iterated h-step point forecast of the level."""
    y = np.asarray(series, dtype=float)
    p = len(coef)
    d = list(np.diff(y)[-p:])
    level = y[-1]
    for _ in range(h):
        nxt = float(np.dot(coef, d[::-1][:p]))
        d.append(nxt)
        d = d[-p:]
        level += nxt
    return float(level)


def ar_class(series: Sequence[float], h: int, p: int = AR_ORDER) -> HtcClass:
    """Category of the AR forecast relative to the smoothed level at the issue week."""
    y = np.asarray(series, dtype=float)
    try:
        point = ar_forecast(ar_fit(y, p), y, h)
    except SingularSystem:
        log.debug("AR fit singular; using persistence")
        point = float(y[-1])
    return categorize(point - smoothed_hr(y, len(y) - 1), h)
