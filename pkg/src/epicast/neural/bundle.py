"""Deterministic on-disk model bundle.

Layout::

    EPICAST-BUNDLE 1\\n
    <header length in bytes>\\n
    <header: JSON with sorted keys>
    <raw little-endian float64 arrays, in header order>

The header carries the model config, vocabulary, horizon, seed and an array
table of (name, shape, offset). No timestamps are written, so saving the same
bundle twice yields identical bytes.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..errors import MissingBundle
from .autodiff import Tensor
from .decoder import is_frozen
from .encoders import SeqEncoder
from .model import ModelBundle, ModelConfig
from .tokenizer import Vocab

MAGIC = b"EPICAST-BUNDLE 1\n"
_DTYPE = np.dtype("<f8")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: ModelConfig) -> str:
    return hashlib.sha256(canonical_json(config.to_dict()).encode()).hexdigest()


def _arrays(bundle: ModelBundle) -> list[tuple[str, np.ndarray]]:
    items = [(n, t.data) for n, t in bundle.params.items()]
    if bundle.encoder is not None:
        items += [(n, t.data) for n, t in bundle.encoder.params.items()]
    items += [("feat_mean", bundle.feat_mean), ("feat_std", bundle.feat_std)]
    return items


def write_blob(path, header: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    """Write a header plus named float64 arrays in the bundle layout."""
    table, blobs, offset = [], [], 0
    for name, arr in arrays:
        raw = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
        table.append({"name": name, "shape": list(np.shape(arr)), "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    head = canonical_json(dict(header, arrays=table)).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(f"{len(head)}\n".encode())
        fh.write(head)
        for raw in blobs:
            fh.write(raw)


def read_blob(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise MissingBundle(f"no model bundle at {path}")
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise MissingBundle(f"{path} is not a model bundle")
    nl = data.index(b"\n", len(MAGIC))
    n = int(data[len(MAGIC):nl])
    header = json.loads(data[nl + 1:nl + 1 + n])
    body = data[nl + 1 + n:]
    arrays = {}
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(body, dtype=_DTYPE, count=count, offset=entry["offset"])
        arrays[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float64)
    return header, arrays


def save_bundle(bundle: ModelBundle, path) -> None:
    enc = bundle.encoder
    header = {
        "kind": "decoder",
        "config": bundle.config.to_dict(),
        "config_hash": config_hash(bundle.config),
        "vocab": list(bundle.vocab.tokens),
        "horizon": bundle.horizon,
        "seed": bundle.seed,
        "encoder": None if enc is None else {
            "kind": enc.kind, "input_size": enc.input_size,
            "hidden_size": enc.hidden_size, "prefix": enc.prefix,
        },
    }
    write_blob(path, header, _arrays(bundle))


def load_bundle(path) -> ModelBundle:
    header, arrays = read_blob(path)
    if header.get("kind") != "decoder":
        raise MissingBundle(f"{path} does not hold a decoder model")
    config = ModelConfig.from_dict(header["config"])
    enc_meta = header["encoder"]
    enc_names: list[str] = []
    encoder = None
    if enc_meta is not None:
        prefix = enc_meta["prefix"] + "."
        enc_names = [e["name"] for e in header["arrays"] if e["name"].startswith(prefix)]
        encoder = SeqEncoder(enc_meta["kind"], enc_meta["input_size"], enc_meta["hidden_size"],
                             {k: Tensor(arrays[k], True, k) for k in enc_names})
    skip = set(enc_names) | {"feat_mean", "feat_std"}
    params = {e["name"]: Tensor(arrays[e["name"]], not is_frozen(e["name"]), e["name"])
              for e in header["arrays"] if e["name"] not in skip}
    return ModelBundle(config, Vocab(tuple(header["vocab"])), params, encoder,
                       arrays["feat_mean"], arrays["feat_std"], header["horizon"], header["seed"])
