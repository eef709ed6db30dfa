"""Seeded synthetic scenario generator.

Hospitalization curves are a sum of damped sinusoidal waves plus one bump per
scheduled variant, shaped by that variant's logistic takeover of the sequenced
share. Each state gets its own phase shift, amplitude and baseline. Cases lead
hospitalizations by one week so the case narrative carries signal.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta

import numpy as np

from ..errors import InvalidConfig
from .types import (
    OTHER_VARIANT,
    POLICY_LEVELS,
    STATE_NAMES,
    VIROLOGY_LEVELS,
    EpiSeriesPoint,
    GenomicRow,
    Panels,
    SpatialProfile,
    StateId,
    WeekIndex,
)

START_DATE = date(2021, 1, 3)


@dataclass(frozen=True)
class WaveSpec:
    period: float = 26.0
    amplitude: float = 10.0
    phase: float = 0.0
    damping: float = 0.0  # per week


@dataclass(frozen=True)
class VariantSpec:
    name: str
    emergence_week: int
    growth: float = 0.45  # logistic takeover rate per week
    seed_share: float = 0.01
    wave_amplitude: float = 12.0
    infectiousness: str = "higher"
    severity: str = "comparable"
    immune_resistance: str = "higher"


def _default_waves():
    return (WaveSpec(period=24.0, amplitude=9.0, phase=0.0, damping=0.004),
            WaveSpec(period=11.0, amplitude=3.5, phase=1.3, damping=0.0))


def _default_variants():
    return (
        VariantSpec("BA.1", 6, growth=0.55, wave_amplitude=12.0),
        VariantSpec("BA.2", 28, growth=0.40, wave_amplitude=6.0, severity="lower"),
        VariantSpec("BA.5", 46, growth=0.45, wave_amplitude=9.0),
        VariantSpec("BQ.1", 64, growth=0.50, wave_amplitude=10.0, severity="unknown"),
    )


@dataclass(frozen=True)
class SynthConfig:
    n_states: int = 20
    n_weeks: int = 80
    waves: tuple[WaveSpec, ...] = field(default_factory=_default_waves)
    variants: tuple[VariantSpec, ...] = field(default_factory=_default_variants)
    phase_jitter: float = 4.0  # weeks, uniform +/-
    amplitude_jitter: float = 0.35  # log-normal sigma
    baseline_range: tuple[float, float] = (4.0, 10.0)
    noise_sd: float = 0.25  # additive, per 100k
    case_lead: int = 1
    cases_per_hosp: float = 12.0

    def validate(self) -> None:
        if not 1 <= self.n_states <= len(STATE_NAMES):
            raise InvalidConfig("n_states", f"must be in 1..{len(STATE_NAMES)}")
        if self.n_weeks < 20:
            raise InvalidConfig("n_weeks", "must be >= 20")
        if self.phase_jitter < 0 or self.amplitude_jitter < 0 or self.noise_sd < 0:
            raise InvalidConfig("jitter", "must be nonnegative")
        lo, hi = self.baseline_range
        if not 0 <= lo <= hi:
            raise InvalidConfig("baseline_range")
        if self.case_lead < 0:
            raise InvalidConfig("case_lead", "must be nonnegative")
        for w in self.waves:
            if w.period <= 0 or w.amplitude < 0 or w.damping < 0:
                raise InvalidConfig("waves", f"bad wave {w}")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names) or OTHER_VARIANT in names:
            raise InvalidConfig("variants", "names must be unique and not 'other'")
        for v in self.variants:
            if not 0 <= v.emergence_week < self.n_weeks:
                raise InvalidConfig("variants", f"{v.name} emergence week out of range")
            if v.growth <= 0 or not 0 < v.seed_share < 1:
                raise InvalidConfig("variants", f"{v.name} growth/seed_share invalid")
            for attr in ("infectiousness", "severity", "immune_resistance"):
                if getattr(v, attr) not in VIROLOGY_LEVELS:
                    raise InvalidConfig("variants", f"{v.name}.{attr}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        try:
            if "waves" in d:
                d["waves"] = tuple(WaveSpec(**w) for w in d["waves"])
            if "variants" in d:
                d["variants"] = tuple(VariantSpec(**v) for v in d["variants"])
            if "baseline_range" in d:
                d["baseline_range"] = tuple(d["baseline_range"])
            cfg = cls(**d)
        except TypeError as exc:
            raise InvalidConfig("synthetic", str(exc)) from None
        cfg.validate()
        return cfg


def variant_shares(cfg: SynthConfig, weeks: np.ndarray) -> dict[str, np.ndarray]:
    """National variant proportions per week; a variant is exactly 0 before emergence."""
    logits = {}
    for v in cfg.variants:
        age = weeks - v.emergence_week
        w = np.where(age >= 0, v.seed_share * np.exp(v.growth * np.maximum(age, 0)), 0.0)
        logits[v.name] = w
    # "other" keeps weight 1 - the total seed mass of a fresh variant stays near its seed share
    total = 1.0 + sum(logits.values())
    shares = {name: w / total for name, w in logits.items()}
    shares[OTHER_VARIANT] = 1.0 / total
    return shares


def _takeover(cfg: SynthConfig, v: VariantSpec, t: np.ndarray) -> np.ndarray:
    # logistic fraction of the variant among emerged lineages, continuous in t
    mid = v.emergence_week + math.log(1.0 / v.seed_share) / v.growth
    return 1.0 / (1.0 + np.exp(-v.growth * (t - mid)))


def _hosp_curve(cfg: SynthConfig, t: np.ndarray, phase: float, amp: float, base: float) -> np.ndarray:
    ts = t - phase
    hr = np.full_like(ts, base, dtype=float)
    for w in cfg.waves:
        hr += amp * w.amplitude * np.exp(-w.damping * ts) * 0.5 * (1 + np.sin(2 * np.pi * ts / w.period + w.phase))
    for v in cfg.variants:
        lg = _takeover(cfg, v, ts)
        hr += amp * v.wave_amplitude * 4.0 * lg * (1.0 - lg)
    return hr


def generate_synthetic(config: SynthConfig, seed: int) -> Panels:
    config.validate()
    rng = np.random.default_rng(seed)
    n, T = config.n_states, config.n_weeks
    codes = sorted(STATE_NAMES)[:n]
    weeks = np.arange(T, dtype=float)
    week_ids = [WeekIndex(i, START_DATE + timedelta(weeks=i)) for i in range(T)]

    populations = np.round(np.exp(rng.normal(15.0, 0.8, size=n))).astype(int) + 100_000
    over65 = rng.uniform(0.12, 0.22, size=n)
    vulnerable = rng.uniform(0.05, 0.45, size=n)
    vote_dem = rng.uniform(0.3, 0.7, size=n)
    rank_cols = [rng.permutation(n) + 1 for _ in range(3)]
    phases = rng.uniform(-config.phase_jitter, config.phase_jitter, size=n)
    amps = np.exp(rng.normal(0.0, config.amplitude_jitter, size=n))
    bases = rng.uniform(*config.baseline_range, size=n)
    vmax = rng.uniform(0.55, 0.9, size=n)
    strictness = rng.uniform(0.6, 1.4, size=(n, len(POLICY_LEVELS)))

    states, spatial, epi, policy = {}, {}, {}, {}
    for i, code in enumerate(codes):
        states[code] = StateId(code, STATE_NAMES[code], int(populations[i]))
        dem = float(vote_dem[i])
        spatial[code] = SpatialProfile(
            over65_share=float(over65[i]),
            vulnerable_race_share=float(vulnerable[i]),
            health_overall_rank=int(rank_cols[0][i]),
            health_covid_rank=int(rank_cols[1][i]),
            health_access_rank=int(rank_cols[2][i]),
            party="Democrat" if dem >= 0.5 else "Republican",
            vote_share=dem if dem >= 0.5 else 1.0 - dem,
        )
        clean = _hosp_curve(config, weeks, phases[i], amps[i], bases[i])
        hr = np.maximum(clean + rng.normal(0.0, config.noise_sd, size=T), 0.0)
        lead = _hosp_curve(config, weeks + config.case_lead, phases[i], amps[i], bases[i])
        case_noise = np.exp(rng.normal(0.0, 0.05, size=T))
        cases = np.round(np.maximum(lead, 0.0) * populations[i] / 1e5 * config.cases_per_hosp * case_noise)

        partial = vmax[i] / (1 + np.exp(-(weeks - 12) / 5.0))
        complete = 0.9 * vmax[i] / (1 + np.exp(-(weeks - 18) / 5.0))
        booster = 0.5 * vmax[i] / (1 + np.exp(-(weeks - 45) / 6.0))
        vax = [np.maximum.accumulate(np.round(x, 6)) for x in (partial, complete, booster)]

        epi[code] = [
            EpiSeriesPoint(week_ids[k], float(hr[k]), float(cases[k]),
                           float(vax[0][k]), float(vax[1][k]), float(vax[2][k]))
            for k in range(T)
        ]

        peak = float(np.max(clean))
        relax = np.exp(-weeks / (1.5 * T))
        for k in range(T):
            pressure = clean[max(k - 2, 0)] / peak * relax[k]
            policy[(code, k)] = {
                pid: int(min(len(levels) - 1, math.floor(pressure * strictness[i, j] * len(levels) * 0.9)))
                for j, (pid, levels) in enumerate(POLICY_LEVELS.items())
            }

    shares = variant_shares(config, weeks)
    attrs = {v.name: (v.infectiousness, v.severity, v.immune_resistance) for v in config.variants}
    attrs[OTHER_VARIANT] = ("unknown", "unknown", "unknown")
    genomic = {}
    for k in range(T):
        rows = []
        for name in [v.name for v in config.variants] + [OTHER_VARIANT]:
            p = float(shares[name][k])
            if name != OTHER_VARIANT and p == 0.0:
                continue
            rows.append(GenomicRow(k, name, p, *attrs[name]))
        # fold rounding residue into "other" so each week sums to 1; a vanishing
        # "other" share can otherwise round to a tiny negative number
        resid = 1.0 - math.fsum(r.proportion for r in rows)
        other = max(0.0, rows[-1].proportion + resid)
        rows[-1] = GenomicRow(k, OTHER_VARIANT, other, *attrs[OTHER_VARIANT])
        genomic[k] = rows

    return Panels(epi=epi, states=states, spatial=spatial, policy=policy, genomic=genomic)
