"""Toy autoregressive transformer decoder with pre-normalization.

Parameter names starting with ``pos``, ``block`` or ``ln_f`` form the frozen
body; ``tok_emb`` (input embeddings) and ``out.*`` (output projection) are the
trainable ends of the network.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DimensionMismatch, IdOutOfRange, IndexOutOfRange
from . import autodiff as ad
from .autodiff import Tensor

FROZEN_PREFIXES = ("pos", "block", "ln_f")


@dataclass(frozen=True)
class DecoderConfig:
    d_model: int = 64
    n_blocks: int = 2
    n_heads: int = 4
    d_ff: int = 256
    max_len: int = 512
    # init std of the frozen body projections is body_scale / sqrt(fan_in)
    body_scale: float = 1.0
    pos_std: float = 0.5
    emb_std: float = 1.0
    out_std: float = 1e-3

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")

    def to_dict(self):
        return asdict(self)


def is_frozen(name: str) -> bool:
    return name.startswith(FROZEN_PREFIXES)


def init_decoder(cfg: DecoderConfig, vocab_size: int, rng: np.random.Generator,
                 body_rng: np.random.Generator | None = None) -> dict[str, Tensor]:
    """Initialize all parameters; the frozen body draws from ``body_rng`` when given.

    A separate body generator keeps the frozen body identical across training
    seeds and vocabulary sizes.
    """
    d, f = cfg.d_model, cfg.d_ff
    body_rng = rng if body_rng is None else body_rng
    params: dict[str, Tensor] = {}

    def add(name, value):
        params[name] = Tensor(value, requires_grad=not is_frozen(name), name=name)

    def proj(n_in, n_out):
        return body_rng.normal(0.0, cfg.body_scale / np.sqrt(n_in), size=(n_in, n_out))

    add("pos_emb", body_rng.normal(0.0, cfg.pos_std, size=(cfg.max_len, d)))
    for b in range(cfg.n_blocks):
        p = f"block{b}."
        add(p + "ln1.g", np.ones(d))
        add(p + "ln1.b", np.zeros(d))
        for m in ("q", "k", "v", "o"):
            add(p + f"W_{m}", proj(d, d))
            add(p + f"b_{m}", np.zeros(d))
        add(p + "ln2.g", np.ones(d))
        add(p + "ln2.b", np.zeros(d))
        add(p + "W_1", proj(d, f))
        add(p + "b_1", np.zeros(f))
        add(p + "W_2", proj(f, d))
        add(p + "b_2", np.zeros(d))
    add("ln_f.g", np.ones(d))
    add("ln_f.b", np.zeros(d))
    add("tok_emb", rng.normal(0.0, cfg.emb_std, size=(vocab_size, d)))
    add("out.W", rng.normal(0.0, cfg.out_std, size=(d, vocab_size)))
    add("out.b", np.zeros(vocab_size))
    return params


def embed_tokens(params: dict[str, Tensor], ids) -> Tensor:
    """Token plus positional embedding; ``ids`` is (T,) or (B, T)."""
    ids = np.asarray(ids, dtype=np.int64)
    squeeze = ids.ndim == 1
    if squeeze:
        ids = ids[None]
    vocab_size = params["tok_emb"].shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise IdOutOfRange(f"token id outside [0, {vocab_size})")
    T = ids.shape[1]
    if T > params["pos_emb"].shape[0]:
        raise IdOutOfRange(f"sequence length {T} exceeds max_len {params['pos_emb'].shape[0]}")
    H = ad.take_rows(params["tok_emb"], ids) + ad.getitem(params["pos_emb"], slice(0, T))
    return ad.getitem(H, 0) if squeeze else H


def inject(H: Tensor, z: Tensor, s) -> Tensor:
    """Replace row ``s`` of H by ``z``. Accepts (T, d) with scalar s or (B, T, d) with per-row s."""
    single = H.ndim == 2
    if single:
        H = ad.reshape(H, (1,) + H.shape)
        z = ad.reshape(ad.as_tensor(z), (1, -1))
        s = [s]
    s = np.asarray(s, dtype=np.int64)
    B, T, d = H.shape
    if z.shape != (B, d):
        raise DimensionMismatch(f"z has shape {z.shape}, expected {(B, d)}")
    if s.shape != (B,) or s.min() < 0 or s.max() >= T:
        raise IndexOutOfRange(f"special-token index {s.tolist()} outside [0, {T})")
    out = ad.inject(H, z, s)
    return ad.getitem(out, 0) if single else out


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    B, T, d = x.shape
    return ad.transpose(ad.reshape(x, (B, T, n_heads, d // n_heads)), (0, 2, 1, 3))


def _block(params, prefix, cfg, x: Tensor, query_pos) -> Tensor:
    B, T, d = x.shape
    p = lambda n: params[prefix + n]  # noqa: E731
    h = ad.layer_norm(x, p("ln1.g"), p("ln1.b"))
    if query_pos is None:
        xq, hq = x, h
        qpos = np.broadcast_to(np.arange(T), (B, T))
    else:
        qpos = np.asarray(query_pos)
        rows = np.arange(B)[:, None]
        xq, hq = ad.getitem(x, (rows, qpos)), ad.getitem(h, (rows, qpos))
    Q = qpos.shape[1]
    q = _split_heads((ad.matmul(hq, p("W_q")) + p("b_q")) * (1.0 / np.sqrt(d // cfg.n_heads)), cfg.n_heads)
    k = _split_heads(ad.matmul(h, p("W_k")) + p("b_k"), cfg.n_heads)
    v = _split_heads(ad.matmul(h, p("W_v")) + p("b_v"), cfg.n_heads)
    scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2)))
    mask = np.arange(T)[None, None, None, :] > qpos[:, None, :, None]
    att = ad.matmul(ad.softmax(scores, mask), v)  # (B, nh, Q, dh)
    att = ad.reshape(ad.transpose(att, (0, 2, 1, 3)), (B, Q, d))
    x1 = xq + (ad.matmul(att, p("W_o")) + p("b_o"))
    h2 = ad.layer_norm(x1, p("ln2.g"), p("ln2.b"))
    ff = ad.matmul(ad.gelu(ad.matmul(h2, p("W_1")) + p("b_1")), p("W_2")) + p("b_2")
    return x1 + ff


def forward_hidden(params, cfg: DecoderConfig, H: Tensor, query_pos=None) -> Tensor:
    """Final-normalized hidden states (B, Q, d).

    With ``query_pos`` (B, Q) only those rows are computed in the last block;
    earlier blocks always run over every position because later queries attend
    to them.
    """
    x = H
    for b in range(cfg.n_blocks):
        last = b == cfg.n_blocks - 1
        x = _block(params, f"block{b}.", cfg, x, query_pos if last else None)
    return ad.layer_norm(x, params["ln_f.g"], params["ln_f.b"])


def forward_logits(params, cfg: DecoderConfig, H: Tensor, query_pos=None, columns=None) -> Tensor:
    """Logits over the vocabulary (or over ``columns`` only) at each queried position.

    Row j of the output depends only on input rows 0..j.
    """
    single = H.ndim == 2
    if single:
        H = ad.reshape(H, (1,) + H.shape)
    hidden = forward_hidden(params, cfg, H, query_pos)
    W, b = params["out.W"], params["out.b"]
    if columns is not None:
        W, b = ad.getitem(W, (slice(None), np.asarray(columns))), ad.getitem(b, np.asarray(columns))
    logits = ad.matmul(hidden, W) + b
    return ad.getitem(logits, 0) if single else logits
