"""Run configuration: one JSON document with a schema version.

Schema (version 1), every key optional::

    {
      "schema_version": 1,
      "data_dir": null,            # CSV panel directory; null -> <out_dir>/data from `synth`
      "synth": {...},              # synthetic scenario parameters (SynthConfig fields)
      "synth_seed": 0,
      "out_dir": "runs/default",
      "horizons": [1, 3],
      "window_len": 12,
      "test_weeks": 16,            # final N weeks form the test window ...
      "test_start": null,          # ... unless an explicit first test week index is given
      "train_end": null,           # last training issue week; default test_start - h - 1
      "val_ratio": 0.2,
      "split_seed": 0,
      "seed": 0,                   # model seed for train / predict / eval / gsi
      "seeds": [0, 1, 2],          # seeds for ablate
      "include_genomic": true,
      "model": {...},              # ModelConfig fields (decoder, encoder_kind, body_seed, train)
      "baselines": ["PrevTrend", "GRU", "LSTM", "BiLSTM", "AR"],
      "baseline_train": {...},     # SeqTrainConfig fields
      "ablation_encoders": ["GRU", "VanillaRNN", "LSTM", "none"]
    }
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .baselines import BASELINE_IDS, SeqTrainConfig
from .data.synth import SynthConfig
from .errors import InvalidConfig
from .neural.model import ModelConfig
from .targets import HORIZONS

SCHEMA_VERSION = 1
ABLATION_KINDS = ("GRU", "VanillaRNN", "LSTM", "none")


@dataclass(frozen=True)
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    data_dir: str | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    synth_seed: int = 0
    out_dir: str = "runs/default"
    horizons: tuple[int, ...] = (1, 3)
    window_len: int = 12
    test_weeks: int = 16
    test_start: int | None = None
    train_end: int | None = None
    val_ratio: float = 0.2
    split_seed: int = 0
    seed: int = 0
    seeds: tuple[int, ...] = (0, 1, 2)
    include_genomic: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)
    baselines: tuple[str, ...] = BASELINE_IDS
    baseline_train: SeqTrainConfig = field(default_factory=SeqTrainConfig)
    ablation_encoders: tuple[str, ...] = ABLATION_KINDS

    def validate(self) -> "RunConfig":
        if self.schema_version != SCHEMA_VERSION:
            raise InvalidConfig("schema_version", f"expected {SCHEMA_VERSION}, got {self.schema_version}")
        if not self.horizons or any(h not in HORIZONS for h in self.horizons):
            raise InvalidConfig("horizons", f"each horizon must be one of {HORIZONS}")
        if not 0.0 < self.val_ratio < 1.0:
            raise InvalidConfig("val_ratio", "must lie strictly between 0 and 1")
        if self.test_weeks < 1:
            raise InvalidConfig("test_weeks", "must be positive")
        unknown = set(self.baselines) - set(BASELINE_IDS)
        if unknown:
            raise InvalidConfig("baselines", f"unknown {sorted(unknown)}")
        bad = set(self.ablation_encoders) - set(ABLATION_KINDS)
        if bad:
            raise InvalidConfig("ablation_encoders", f"unknown {sorted(bad)}")
        if not self.seeds:
            raise InvalidConfig("seeds", "need at least one seed")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidConfig(sorted(extra)[0], "unknown config key")
        try:
            if "synth" in d:
                d["synth"] = SynthConfig.from_dict(d["synth"])
            if "model" in d:
                d["model"] = ModelConfig.from_dict(d["model"])
            if "baseline_train" in d:
                d["baseline_train"] = SeqTrainConfig(**d["baseline_train"])
            for key in ("horizons", "seeds", "baselines", "ablation_encoders"):
                if key in d:
                    d[key] = tuple(d[key])
            return cls(**d).validate()
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidConfig):
                raise
            raise InvalidConfig("config", str(exc)) from None

    def with_overrides(self, seed: int | None = None, out_dir: str | None = None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if out_dir is not None:
            cfg = replace(cfg, out_dir=str(out_dir))
        return cfg

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InvalidConfig("config", f"{path} not found") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfig("config", f"{path}:{exc.lineno}: {exc.msg}") from None
    return RunConfig.from_dict(doc)


def write_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
