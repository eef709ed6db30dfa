from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

# Stringency level summaries per policy, index = level.
POLICY_LEVELS: dict[str, tuple[str, ...]] = {
    "C1": (
        "No measures.",
        "Recommend closing.",
        "Require closing at some levels.",
        "Require closing at all levels.",
    ),
    "C2": (
        "No measures.",
        "Recommend closing.",
        "Require closing for some categories.",
        "Require closing for all but essential workplaces.",
    ),
    "C3": (
        "No measures.",
        "Recommend canceling.",
        "Required canceling.",
    ),
    "C4": (
        "No measures.",
        "Restrictions on very large gatherings.",
        "Restrictions on gatherings between 101-1000 people",
        "Restrictions on gatherings between 11-100 people.",
        "Restrictions on gatherings of 10 people or less.",
    ),
    "H8": (
        "No Measures.",
        "Recommended isolation and visitor restriction.",
        "Narrow restrictions for isolation and some limitations on external visitors.",
        "Extensive restrictions for isolation and all non-essential external visitors prohibited.",
    ),
}
POLICY_IDS = tuple(POLICY_LEVELS)

PARTIES = ("Democrat", "Republican")
VIROLOGY_LEVELS = ("lower", "comparable", "higher", "unknown")
OTHER_VARIANT = "other"

STATE_NAMES: dict[str, str] = {
    "AL": "Alabama", "AK": "Alaska", "AZ": "Arizona", "AR": "Arkansas", "CA": "California",
    "CO": "Colorado", "CT": "Connecticut", "DE": "Delaware", "FL": "Florida", "GA": "Georgia",
    "HI": "Hawaii", "ID": "Idaho", "IL": "Illinois", "IN": "Indiana", "IA": "Iowa",
    "KS": "Kansas", "KY": "Kentucky", "LA": "Louisiana", "ME": "Maine", "MD": "Maryland",
    "MA": "Massachusetts", "MI": "Michigan", "MN": "Minnesota", "MS": "Mississippi", "MO": "Missouri",
    "MT": "Montana", "NE": "Nebraska", "NV": "Nevada", "NH": "New Hampshire", "NJ": "New Jersey",
    "NM": "New Mexico", "NY": "New York", "NC": "North Carolina", "ND": "North Dakota", "OH": "Ohio",
    "OK": "Oklahoma", "OR": "Oregon", "PA": "Pennsylvania", "RI": "Rhode Island", "SC": "South Carolina",
    "SD": "South Dakota", "TN": "Tennessee", "TX": "Texas", "UT": "Utah", "VT": "Vermont",
    "VA": "Virginia", "WA": "Washington", "WV": "West Virginia", "WI": "Wisconsin", "WY": "Wyoming",
}


@dataclass(frozen=True)
class StateId:
    code: str
    name: str
    population: int

    def __post_init__(self):
        if self.population <= 0:
            raise ValueError(f"population must be positive for {self.code}")


@dataclass(frozen=True, order=True)
class WeekIndex:
    index: int
    iso_date: date


@dataclass(frozen=True)
class EpiSeriesPoint:
    week: WeekIndex
    hosp_rate: float
    cases: float
    vax_partial: float
    vax_complete: float
    vax_booster: float


@dataclass(frozen=True)
class SpatialProfile:
    over65_share: float
    vulnerable_race_share: float
    health_overall_rank: int
    health_covid_rank: int
    health_access_rank: int
    party: str
    vote_share: float


@dataclass(frozen=True)
class PolicyRecord:
    policy_id: str
    level: int

    @property
    def summary(self) -> str:
        return POLICY_LEVELS[self.policy_id][self.level]


@dataclass(frozen=True)
class GenomicRecord:
    """One tracked variant; ``proportions`` covers the record's week window, oldest first."""

    variant_name: str
    infectiousness: str
    severity: str
    immune_resistance: str
    proportions: tuple[float, ...]


@dataclass(frozen=True)
class GenomicRow:
    """A single row of genomic.csv."""

    week_index: int
    variant_name: str
    proportion: float
    infectiousness: str
    severity: str
    immune_resistance: str


@dataclass(frozen=True)
class DataRecord:
    state: StateId
    week: WeekIndex
    epi: tuple[EpiSeriesPoint, ...]
    spatial: SpatialProfile
    policies: tuple[PolicyRecord, ...]
    previous_policies: tuple[PolicyRecord, ...] | None
    genomic: tuple[GenomicRecord, ...]
    n_states: int
    # cross-state ranks (1 = highest share) of over65_share and vulnerable_race_share
    share_ranks: tuple[int, int]
    # backward one-week trend HR(j) - mean(HR(j-3..j-1)) for each window week
    recent_trend: tuple[float, ...]
    prev_infections: float | None
    include_genomic: bool = True

    @property
    def hosp_series(self) -> list[float]:
        return [p.hosp_rate for p in self.epi]


@dataclass
class Panels:
    epi: dict[str, list[EpiSeriesPoint]]
    states: dict[str, StateId]
    spatial: dict[str, SpatialProfile]
    policy: dict[tuple[str, int], dict[str, int]]
    genomic: dict[int, list[GenomicRow]] = field(default_factory=dict)

    @property
    def state_codes(self) -> list[str]:
        return sorted(self.states)

    @property
    def week_indices(self) -> list[int]:
        weeks = {p.week.index for pts in self.epi.values() for p in pts}
        return sorted(weeks)
