"""CSV ingestion and serialization for the four data modalities.

Every loader validates its schema and the type invariants, raising a
``ValidationError`` subclass that names the offending file line.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from datetime import date
from pathlib import Path

from ..errors import (
    MissingColumn,
    NegativeValue,
    NonContiguousWeeks,
    ProportionSumViolation,
    RankNotPermutation,
    UnknownPolicyLevel,
    ValidationError,
)
from .types import (
    OTHER_VARIANT,
    PARTIES,
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

EPI_COLUMNS = ("state", "week_index", "iso_date", "hosp_rate", "cases",
               "vax_partial", "vax_complete", "vax_booster")
SPATIAL_COLUMNS = ("state", "population", "over65_share", "vulnerable_race_share",
                   "health_overall_rank", "health_covid_rank", "health_access_rank",
                   "party", "vote_share")
POLICY_COLUMNS = ("state", "week_index", "policy_id", "level")
GENOMIC_COLUMNS = ("week_index", "variant_name", "proportion", "infectiousness",
                   "severity", "immune_resistance")
RANK_COLUMNS = ("health_overall_rank", "health_covid_rank", "health_access_rank")

PROPORTION_TOL = 1e-6


def _read_rows(path, columns):
    """Yield (line_number, row dict) after checking the header."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise MissingColumn(col, path)
        for row in reader:
            yield reader.line_num, row


def _number(row, col, line, path, kind=float):
    try:
        value = kind(row[col])
    except (TypeError, ValueError):
        raise ValidationError(f"{path}:{line}: cannot parse {col}={row[col]!r}") from None
    if kind is float and not math.isfinite(value):
        raise NegativeValue(f"{path}:{line}", col)
    return value


def _fraction(row, col, line, path):
    value = _number(row, col, line, path)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{path}:{line}: {col}={value} outside [0, 1]")
    return value


def load_epi_csv(path) -> dict[str, list[EpiSeriesPoint]]:
    by_state: dict[str, list[EpiSeriesPoint]] = defaultdict(list)
    for line, row in _read_rows(path, EPI_COLUMNS):
        hosp = _number(row, "hosp_rate", line, path)
        cases = _number(row, "cases", line, path)
        for col, value in (("hosp_rate", hosp), ("cases", cases)):
            if value < 0:
                raise NegativeValue(f"{path}:{line}", col)
        week = WeekIndex(_number(row, "week_index", line, path, int),
                         date.fromisoformat(row["iso_date"]))
        by_state[row["state"]].append(EpiSeriesPoint(
            week=week,
            hosp_rate=hosp,
            cases=cases,
            vax_partial=_fraction(row, "vax_partial", line, path),
            vax_complete=_fraction(row, "vax_complete", line, path),
            vax_booster=_fraction(row, "vax_booster", line, path),
        ))
    panel = {}
    for state in sorted(by_state):
        points = sorted(by_state[state], key=lambda p: p.week.index)
        for prev, cur in zip(points, points[1:]):
            if cur.week.index != prev.week.index + 1:
                raise NonContiguousWeeks(state, (prev.week.index, cur.week.index))
            for attr in ("vax_partial", "vax_complete", "vax_booster"):
                if getattr(cur, attr) < getattr(prev, attr):
                    raise ValidationError(
                        f"{path}: {attr} decreases for {state} at week {cur.week.index}")
        panel[state] = points
    return panel


def load_spatial_csv(path) -> tuple[dict[str, StateId], dict[str, SpatialProfile]]:
    states, profiles = {}, {}
    for line, row in _read_rows(path, SPATIAL_COLUMNS):
        code = row["state"]
        if code in states:
            raise ValidationError(f"{path}:{line}: duplicate state {code}")
        population = _number(row, "population", line, path, int)
        if population <= 0:
            raise NegativeValue(f"{path}:{line}", "population")
        party = row["party"]
        if party not in PARTIES:
            raise ValidationError(f"{path}:{line}: unknown party {party!r}")
        states[code] = StateId(code, STATE_NAMES.get(code, code), population)
        profiles[code] = SpatialProfile(
            over65_share=_fraction(row, "over65_share", line, path),
            vulnerable_race_share=_fraction(row, "vulnerable_race_share", line, path),
            health_overall_rank=_number(row, "health_overall_rank", line, path, int),
            health_covid_rank=_number(row, "health_covid_rank", line, path, int),
            health_access_rank=_number(row, "health_access_rank", line, path, int),
            party=party,
            vote_share=_fraction(row, "vote_share", line, path),
        )
    n = len(profiles)
    for col in RANK_COLUMNS:
        if sorted(getattr(p, col) for p in profiles.values()) != list(range(1, n + 1)):
            raise RankNotPermutation(col)
    return states, profiles


def load_policy_csv(path) -> dict[tuple[str, int], dict[str, int]]:
    panel: dict[tuple[str, int], dict[str, int]] = defaultdict(dict)
    for line, row in _read_rows(path, POLICY_COLUMNS):
        policy = row["policy_id"]
        level = _number(row, "level", line, path, int)
        if policy not in POLICY_LEVELS:
            raise ValidationError(f"{path}:{line}: unknown policy id {policy!r}")
        if not 0 <= level < len(POLICY_LEVELS[policy]):
            raise UnknownPolicyLevel(policy, level)
        key = (row["state"], _number(row, "week_index", line, path, int))
        panel[key][policy] = level
    return dict(panel)


def load_genomic_csv(path) -> dict[int, list[GenomicRow]]:
    by_week: dict[int, list[GenomicRow]] = defaultdict(list)
    for line, row in _read_rows(path, GENOMIC_COLUMNS):
        for col in ("infectiousness", "severity", "immune_resistance"):
            if row[col] not in VIROLOGY_LEVELS:
                raise ValidationError(f"{path}:{line}: {col}={row[col]!r} not in {VIROLOGY_LEVELS}")
        week = _number(row, "week_index", line, path, int)
        by_week[week].append(GenomicRow(
            week_index=week,
            variant_name=row["variant_name"],
            proportion=_fraction(row, "proportion", line, path),
            infectiousness=row["infectiousness"],
            severity=row["severity"],
            immune_resistance=row["immune_resistance"],
        ))
    for week, rows in by_week.items():
        total = math.fsum(r.proportion for r in rows)
        if abs(total - 1.0) > PROPORTION_TOL:
            raise ProportionSumViolation(week, total)
    return {w: by_week[w] for w in sorted(by_week)}


def load_panels(data_dir) -> Panels:
    data_dir = Path(data_dir)
    states, spatial = load_spatial_csv(data_dir / "spatial.csv")
    return Panels(
        epi=load_epi_csv(data_dir / "epi.csv"),
        states=states,
        spatial=spatial,
        policy=load_policy_csv(data_dir / "policy.csv"),
        genomic=load_genomic_csv(data_dir / "genomic.csv"),
    )


def _fmt(value) -> str:
    # repr round-trips floats exactly
    return repr(float(value)) if isinstance(value, float) else str(value)


def _write(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_panels(panels: Panels, data_dir) -> None:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    _write(data_dir / "epi.csv", EPI_COLUMNS, (
        (state, p.week.index, p.week.iso_date.isoformat(), p.hosp_rate, p.cases,
         p.vax_partial, p.vax_complete, p.vax_booster)
        for state in sorted(panels.epi) for p in panels.epi[state]
    ))
    _write(data_dir / "spatial.csv", SPATIAL_COLUMNS, (
        (code, panels.states[code].population, s.over65_share, s.vulnerable_race_share,
         s.health_overall_rank, s.health_covid_rank, s.health_access_rank, s.party, s.vote_share)
        for code in sorted(panels.spatial) for s in [panels.spatial[code]]
    ))
    _write(data_dir / "policy.csv", POLICY_COLUMNS, (
        (state, week, pid, levels[pid])
        for (state, week), levels in sorted(panels.policy.items())
        for pid in sorted(levels)
    ))
    _write(data_dir / "genomic.csv", GENOMIC_COLUMNS, (
        (r.week_index, r.variant_name, r.proportion, r.infectiousness, r.severity, r.immune_resistance)
        for week in sorted(panels.genomic)
        for r in sorted(panels.genomic[week], key=lambda r: (r.variant_name == OTHER_VARIANT, r.variant_name))
    ))
