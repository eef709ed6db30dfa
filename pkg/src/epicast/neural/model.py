"""Prompt-conditioned forecaster: tokenized prompt + encoded hospitalization series.

The forecast is the decoder's distribution over the five class tokens at the
position of the final prompt token ("is" of "The answer is"). Only the token
embeddings, the output projection and the sequence encoder are trained.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from ..data.types import DataRecord
from ..errors import NonFiniteLoss
from ..forecast import ClassDistribution, softmax
from ..targets import HtcClass
from ..textualizer import PromptDocument, assemble_prompt
from . import autodiff as ad
from .autodiff import Tensor
from .decoder import DecoderConfig, embed_tokens, forward_logits, init_decoder, inject, is_frozen
from .encoders import ENCODER_KINDS, SeqEncoder
from .optim import Adam, clip_grad_norm
from .tokenizer import Vocab, build_vocab, tokenize

log = logging.getLogger(__name__)

N_FEATURES = 2  # hospitalization rate, one-week trend


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-2
    clip: float = 1.0
    batch_size: int = 16
    epochs: int = 4
    max_steps: int | None = None
    select_best: bool = True  # restore the epoch with the lowest validation loss


@dataclass(frozen=True)
class ModelConfig:
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    encoder_kind: str | None = "GRU"  # None: the special token keeps its ordinary embedding
    body_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.encoder_kind is not None and self.encoder_kind not in ENCODER_KINDS:
            raise ValueError(f"encoder_kind must be one of {ENCODER_KINDS} or None")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "decoder" in d:
            d["decoder"] = DecoderConfig(**d["decoder"])
        if "train" in d:
            d["train"] = TrainConfig(**d["train"])
        if d.get("encoder_kind") in ("none", "None"):
            d["encoder_kind"] = None
        return cls(**d)


@dataclass
class ModelBundle:
    config: ModelConfig
    vocab: Vocab
    params: dict[str, Tensor]
    encoder: SeqEncoder | None
    feat_mean: np.ndarray
    feat_std: np.ndarray
    horizon: int
    seed: int

    def all_params(self) -> dict[str, Tensor]:
        out = dict(self.params)
        if self.encoder is not None:
            out.update(self.encoder.params)
        return out

    def trainable(self) -> list[Tensor]:
        return [p for p in self.all_params().values() if p.requires_grad]

    def frozen_names(self) -> list[str]:
        return [n for n in self.params if is_frozen(n)]


@dataclass(frozen=True)
class Example:
    ids: np.ndarray
    special: int
    features: np.ndarray  # (T, N_FEATURES), raw
    target: int | None  # class index 0..4


def sequence_features(record: DataRecord) -> np.ndarray:
    return np.column_stack([record.hosp_series, record.recent_trend]).astype(float)


def init_bundle(config: ModelConfig, vocab: Vocab, horizon: int, seed: int,
                feat_mean=None, feat_std=None) -> ModelBundle:
    rng = np.random.default_rng(seed)
    body_rng = np.random.default_rng(config.body_seed)
    params = init_decoder(config.decoder, len(vocab), rng, body_rng)
    encoder = None
    if config.encoder_kind is not None:
        encoder = SeqEncoder.init(config.encoder_kind, N_FEATURES, config.decoder.d_model, rng)
    return ModelBundle(
        config=config, vocab=vocab, params=params, encoder=encoder,
        feat_mean=np.zeros(N_FEATURES) if feat_mean is None else np.asarray(feat_mean, float),
        feat_std=np.ones(N_FEATURES) if feat_std is None else np.asarray(feat_std, float),
        horizon=horizon, seed=seed,
    )


def make_example(vocab: Vocab, doc: PromptDocument, record: DataRecord) -> Example:
    ids = np.asarray(tokenize(doc.prompt, vocab), dtype=np.int64)
    target = None if doc.target_token is None else int(HtcClass.from_label(doc.target_token)) - 1
    return Example(ids, doc.special_token_index, sequence_features(record), target)


def _collate(bundle: ModelBundle, batch: Sequence[Example]):
    L = max(len(e.ids) for e in batch)
    ids = np.full((len(batch), L), bundle.vocab.pad_id, dtype=np.int64)
    for i, e in enumerate(batch):
        ids[i, :len(e.ids)] = e.ids
    last = np.array([len(e.ids) - 1 for e in batch])
    special = np.array([e.special for e in batch])
    X = (np.stack([e.features for e in batch]) - bundle.feat_mean) / bundle.feat_std
    return ids, last, special, X


def batch_class_logits(bundle: ModelBundle, batch: Sequence[Example]) -> Tensor:
    """Class-token logits (B, 5) at each example's answer position."""
    ids, last, special, X = _collate(bundle, batch)
    H = embed_tokens(bundle.params, ids)
    if bundle.encoder is not None:
        z = bundle.encoder.forward(Tensor(X))
        H = inject(H, z, special)
    logits = forward_logits(bundle.params, bundle.config.decoder, H,
                            query_pos=last[:, None], columns=bundle.vocab.class_ids)
    return ad.reshape(logits, (len(batch), 5))


def batch_loss(bundle: ModelBundle, batch: Sequence[Example]) -> Tensor:
    return ad.log_softmax_nll(batch_class_logits(bundle, batch), [e.target for e in batch])


def mean_loss(bundle: ModelBundle, examples: Sequence[Example], batch_size: int = 16) -> float:
    total = 0.0
    for i in range(0, len(examples), batch_size):
        chunk = examples[i:i + batch_size]
        total += float(batch_loss(bundle, chunk).data) * len(chunk)
    return total / max(len(examples), 1)


def train(bundle: ModelBundle, examples: Sequence[Example], train_cfg: TrainConfig | None = None,
          seed: int | None = None, val_examples: Sequence[Example] = ()) -> tuple[ModelBundle, list[dict]]:
    """Fit the trainable parameters in place; returns the bundle and a per-step loss trace."""
    cfg = train_cfg or bundle.config.train
    rng = np.random.default_rng(bundle.seed if seed is None else seed)
    opt = Adam(bundle.trainable(), lr=cfg.lr)
    trace: list[dict] = []
    start = time.perf_counter()
    step = 0
    best = (np.inf, None)
    epochs = cfg.epochs if cfg.max_steps is None else 10 ** 9
    for epoch in range(epochs):
        order = rng.permutation(len(examples))
        for i in range(0, len(order), cfg.batch_size):
            batch = [examples[j] for j in order[i:i + cfg.batch_size]]
            opt.zero_grad()
            loss = batch_loss(bundle, batch)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NonFiniteLoss(step, f"epoch {epoch}, batch starting at {i}")
            loss.backward()
            clip_grad_norm(opt.params, cfg.clip)
            opt.step()
            step += 1
            trace.append({"step": step, "loss": value, "wallclock": time.perf_counter() - start})
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
        if cfg.select_best and val_examples:
            val = mean_loss(bundle, val_examples, cfg.batch_size)
            log.info("epoch %d: val loss %.4f", epoch, val)
            if val < best[0]:
                best = (val, {id(p): p.data.copy() for p in opt.params})
        if cfg.max_steps is not None and step >= cfg.max_steps:
            break
    if best[1] is not None:
        for p in opt.params:
            p.data[...] = best[1][id(p)]
    return bundle, trace


def predict_proba(bundle: ModelBundle, examples: Sequence[Example], batch_size: int = 16) -> np.ndarray:
    out = []
    for i in range(0, len(examples), batch_size):
        out.append(softmax(batch_class_logits(bundle, examples[i:i + batch_size]).data))
    return np.concatenate(out) if out else np.zeros((0, 5))


def class_distribution(logits, vocab: Vocab) -> ClassDistribution:
    """Softmax over the five class-token logits only, from full-vocabulary logits."""
    logits = np.asarray(logits, dtype=float)
    return ClassDistribution.from_logits(logits[vocab.class_ids])


def predict(bundle: ModelBundle, record: DataRecord) -> ClassDistribution:
    doc = assemble_prompt(record, bundle.horizon)
    probs = predict_proba(bundle, [make_example(bundle.vocab, doc, record)])[0]
    return ClassDistribution(tuple(probs.tolist()))


def feature_stats(examples: Sequence[Example]) -> tuple[np.ndarray, np.ndarray]:
    stacked = np.concatenate([e.features for e in examples])
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def fit(records: Sequence[DataRecord], targets: Sequence[HtcClass], horizon: int, config: ModelConfig,
        seed: int, val_records: Sequence[DataRecord] = (), val_targets: Sequence[HtcClass] = ()):
    """Build vocabulary and standardization from the training records, then train."""
    docs = [assemble_prompt(r, horizon, t) for r, t in zip(records, targets)]
    vocab = build_vocab(d.text for d in docs)
    train_ex = [make_example(vocab, d, r) for d, r in zip(docs, records)]
    val_ex = [make_example(vocab, assemble_prompt(r, horizon, t), r) for r, t in zip(val_records, val_targets)]
    mean, std = feature_stats(train_ex)
    bundle = init_bundle(config, vocab, horizon, seed, mean, std)
    return train(bundle, train_ex, config.train, seed, val_ex)


def with_encoder_kind(config: ModelConfig, kind: str | None) -> ModelConfig:
    return replace(config, encoder_kind=kind)
