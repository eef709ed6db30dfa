"""Central finite-difference check of reverse-mode gradients.

The random configurations below are small (d <= 16, at most two blocks) so a
hundred of them run in well under a minute.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .decoder import DecoderConfig, embed_tokens, forward_logits, init_decoder, inject
from .encoders import ENCODER_KINDS, SeqEncoder

STEP = 1e-5
# Denominator floor, relative to the loss magnitude. At step 1e-5 central
# differences carry 1e-11..1e-10 of rounding noise (more when the loss sums
# terms that cancel), which swamps structurally zero gradients such as those of
# attention key biases. Gradients below FLOOR * max(1, |loss|) are therefore
# compared on that absolute scale.
FLOOR = 1e-5


def _rel_error(a: float, n: float, floor: float = FLOOR) -> float:
    return abs(a - n) / max(abs(a), abs(n), floor)


def grad_check(loss_fn: Callable[[], Tensor], params: Sequence[Tensor], rng: np.random.Generator | None = None,
               max_entries: int | None = None, step: float = STEP) -> float:
    """Max relative error between autodiff and central differences over ``params``.

    Every listed tensor is temporarily marked trainable so frozen weights are
    checked too. ``max_entries`` caps how many entries per tensor are probed
    (chosen at random); ``None`` probes all of them.
    """
    saved = [p.requires_grad for p in params]
    try:
        for p in params:
            p.requires_grad = True
            p.grad = None
        base = loss_fn()
        base.backward()
        floor = FLOOR * max(1.0, abs(float(base.data)))
        analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
        worst = 0.0
        for p, g in zip(params, analytic):
            flat = p.data.reshape(-1)
            idx = np.arange(flat.size)
            if max_entries is not None and flat.size > max_entries:
                idx = (rng or np.random.default_rng(0)).choice(flat.size, max_entries, replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + step
                up = float(loss_fn().data)
                flat[i] = orig - step
                down = float(loss_fn().data)
                flat[i] = orig
                worst = max(worst, _rel_error(float(g.reshape(-1)[i]), (up - down) / (2 * step), floor))
        return worst
    finally:
        for p, r in zip(params, saved):
            p.requires_grad = r
            p.grad = None


def frozen_gradients(loss_fn: Callable[[], Tensor], params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of frozen parameters (zeros when none flowed)."""
    for p in params.values():
        p.grad = None
    loss_fn().backward()
    out = {n: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
           for n, p in params.items() if not p.requires_grad}
    for p in params.values():
        p.grad = None
    return out


def _projection(loss_out: Tensor, rng) -> Tensor:
    # random linear functional so every output coordinate contributes
    w = rng.normal(size=loss_out.shape)
    return ad.sum_all(loss_out * w)


def check_encoder(seed: int, kind: str | None = None, max_entries: int | None = None) -> float:
    rng = np.random.default_rng(seed)
    kind = kind or ENCODER_KINDS[seed % len(ENCODER_KINDS)]
    F, H, B, T = int(rng.integers(1, 4)), int(rng.integers(2, 9)), int(rng.integers(1, 4)), int(rng.integers(1, 6))
    enc = SeqEncoder.init(kind, F, H, rng)
    X = Tensor(rng.normal(size=(B, T, F)))
    w = rng.normal(size=(B, H))
    loss = lambda: ad.sum_all(enc.forward(X) * w)  # noqa: E731
    return grad_check(loss, list(enc.params.values()) + [X], rng, max_entries)


def _small_decoder(rng, vocab_size):
    heads = int(rng.choice([1, 2, 4]))
    d = heads * int(rng.integers(2, 5))
    cfg = DecoderConfig(d_model=d, n_blocks=int(rng.integers(1, 3)), n_heads=heads,
                        d_ff=int(rng.integers(4, 17)), max_len=16, out_std=0.3)
    return cfg, init_decoder(cfg, vocab_size, rng)


def check_decoder(seed: int, max_entries: int | None = 6) -> float:
    """Decoder with injection; every parameter (frozen ones included) and z."""
    rng = np.random.default_rng(seed)
    V, T, B = int(rng.integers(6, 12)), int(rng.integers(2, 8)), int(rng.integers(1, 3))
    cfg, params = _small_decoder(rng, V)
    ids = rng.integers(0, V, size=(B, T))
    z = Tensor(rng.normal(size=(B, cfg.d_model)))
    s = rng.integers(0, T, size=B)

    def loss():
        logits = forward_logits(params, cfg, inject(embed_tokens(params, ids), z, s))
        return _projection(logits, np.random.default_rng(seed + 1))

    return grad_check(loss, list(params.values()) + [z], rng, max_entries)


def check_end_to_end(seed: int, max_entries: int | None = 6) -> float:
    """Encoder -> injection -> decoder -> class-restricted cross-entropy."""
    rng = np.random.default_rng(seed)
    V, T, B = int(rng.integers(8, 12)), int(rng.integers(3, 8)), int(rng.integers(1, 4))
    cfg, params = _small_decoder(rng, V)
    enc = SeqEncoder.init(ENCODER_KINDS[seed % 3], 2, cfg.d_model, rng)
    X = Tensor(rng.normal(size=(B, int(rng.integers(2, 6)), 2)))
    ids = rng.integers(0, V, size=(B, T))
    s = rng.integers(0, T - 1, size=B)
    last = np.full((B, 1), T - 1)
    cols = np.arange(V - 5, V)
    y = rng.integers(0, 5, size=B)

    def loss():
        H = inject(embed_tokens(params, ids), enc.forward(X), s)
        logits = forward_logits(params, cfg, H, query_pos=last, columns=cols)
        return ad.log_softmax_nll(ad.reshape(logits, (B, 5)), y)

    trainable = [p for p in params.values() if p.requires_grad] + list(enc.params.values())
    return grad_check(loss, trainable, rng, max_entries)
