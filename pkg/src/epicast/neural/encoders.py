"""Recurrent sequence encoders (GRU, vanilla RNN, LSTM) on the autodiff core.

Gate layouts follow the common convention: GRU gates are ordered
(reset, update, new) and LSTM gates (input, forget, cell, output). The
initial hidden and cell states are zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from . import autodiff as ad
from .autodiff import Tensor

ENCODER_KINDS = ("GRU", "VanillaRNN", "LSTM")
_GATES = {"GRU": 3, "VanillaRNN": 1, "LSTM": 4}


@dataclass
class SeqEncoder:
    kind: str
    input_size: int
    hidden_size: int
    params: dict[str, Tensor] = field(default_factory=dict)

    @classmethod
    def init(cls, kind, input_size, hidden_size, rng, scale=1.0, prefix="enc"):
        if kind not in _GATES:
            raise ValueError(f"unknown encoder kind {kind!r}")
        g = _GATES[kind] * hidden_size
        bound = scale / np.sqrt(hidden_size)

        def u(*shape):
            return rng.uniform(-bound, bound, size=shape)

        params = {
            f"{prefix}.W_x": Tensor(u(input_size, g), True, f"{prefix}.W_x"),
            f"{prefix}.W_h": Tensor(u(hidden_size, g), True, f"{prefix}.W_h"),
            f"{prefix}.b_x": Tensor(u(g), True, f"{prefix}.b_x"),
            f"{prefix}.b_h": Tensor(u(g), True, f"{prefix}.b_h"),
        }
        return cls(kind, input_size, hidden_size, params)

    @property
    def prefix(self) -> str:
        return next(iter(self.params)).rsplit(".", 1)[0]

    def _p(self, name):
        return self.params[f"{self.prefix}.{name}"]

    def forward(self, X: Tensor) -> Tensor:
        """Final hidden state (B, H) for a batch X of shape (B, T, input_size)."""
        if X.ndim != 3 or X.shape[2] != self.input_size or X.shape[1] < 1:
            raise ShapeMismatch(f"expected (B, T>=1, {self.input_size}), got {X.shape}")
        B, T, _ = X.shape
        H = self.hidden_size
        gx = ad.matmul(X, self._p("W_x")) + self._p("b_x")  # (B, T, G*H)
        W_h, b_h = self._p("W_h"), self._p("b_h")
        h = Tensor(np.zeros((B, H)))
        c = Tensor(np.zeros((B, H))) if self.kind == "LSTM" else None
        for t in range(T):
            xt = ad.getitem(gx, (slice(None), t))
            gh = ad.matmul(h, W_h) + b_h
            if self.kind == "VanillaRNN":
                h = ad.tanh(xt + gh)
            elif self.kind == "GRU":
                r = ad.sigmoid(ad.getitem(xt, (slice(None), slice(0, H))) + ad.getitem(gh, (slice(None), slice(0, H))))
                z = ad.sigmoid(ad.getitem(xt, (slice(None), slice(H, 2 * H))) + ad.getitem(gh, (slice(None), slice(H, 2 * H))))
                n = ad.tanh(ad.getitem(xt, (slice(None), slice(2 * H, None)))
                            + r * ad.getitem(gh, (slice(None), slice(2 * H, None))))
                h = n + z * (h - n)
            else:
                pre = xt + gh
                i = ad.sigmoid(ad.getitem(pre, (slice(None), slice(0, H))))
                f = ad.sigmoid(ad.getitem(pre, (slice(None), slice(H, 2 * H))))
                gg = ad.tanh(ad.getitem(pre, (slice(None), slice(2 * H, 3 * H))))
                o = ad.sigmoid(ad.getitem(pre, (slice(None), slice(3 * H, None))))
                c = f * c + i * gg
                h = o * ad.tanh(c)
        return h


def encode_sequence(encoder: SeqEncoder, X) -> np.ndarray:
    """Encode one (T, input_size) sequence to its final hidden state."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D (steps, features) matrix, got shape {X.shape}")
    return encoder.forward(Tensor(X[None])).data[0]


def reverse_time(X: Tensor) -> Tensor:
    return ad.getitem(X, (slice(None), slice(None, None, -1)))
