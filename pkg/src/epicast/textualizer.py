"""Deterministic rendering of a DataRecord into a forecasting prompt.

Section order: task description, spatial, policy, epidemiological (with the
time-series special token), genomic, then the question ending in the answer
suffix. Sections are paragraphs separated by a blank line; the genomic
paragraph is dropped entirely when genomic information is switched off.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data.types import OTHER_VARIANT, POLICY_IDS, POLICY_LEVELS, DataRecord, GenomicRecord, PolicyRecord
from .errors import RankOutOfRange, UnknownPolicyLevel, WindowTooShort
from .neural.tokenizer import SPECIAL_TOKEN, split_tokens
from .targets import THRESHOLDS, HtcClass

ANSWER_SUFFIX = "The answer is"
CANONICAL_STATES = 50

# Upper rank bound (on the 50-state scale) for each label.
RANK_LABELS = (
    (5, "One of the best"),
    (20, "Higher than the national average"),
    (30, "Close to the national average"),
    (45, "Lower than the national average"),
    (50, "One of the lowest"),
)
SHARE_LABELS = (
    "One of the highest",
    "Higher than the national average",
    "Close to the national average",
    "Lower than the national average",
    "One of the lowest",
)

POLICY_NAMES = {
    "C1": "school",
    "C2": "workplace",
    "C3": "public event",
    "C4": "gathering",
    "H8": "elderly protection",
}

STABLE_BAND = 0.02  # |slope| / mean below this reads as stable
PACE_BANDS = (0.06, 0.15)  # slowly < first <= moderately < second <= rapidly
GENOMIC_MIN_SHARE = 0.01
PI_BANDS = (0.02, 0.035)


def _rank_bucket(rank: int, n_states: int) -> int:
    if n_states < 1 or not 1 <= rank <= n_states:
        raise RankOutOfRange(f"rank {rank} outside 1..{n_states}")
    scaled = -(-rank * CANONICAL_STATES // n_states)  # ceil onto the 50-state scale
    for k, (upper, _) in enumerate(RANK_LABELS):
        if scaled <= upper:
            return k
    raise AssertionError("unreachable")


def rank_label(rank: int, n_states: int = CANONICAL_STATES) -> str:
    """Five-level description of a 1-based rank; other state counts are rescaled to 50."""
    return RANK_LABELS[_rank_bucket(rank, n_states)][1]


def share_label(rank: int, n_states: int = CANONICAL_STATES) -> str:
    return SHARE_LABELS[_rank_bucket(rank, n_states)]


def _level_summary(policy: PolicyRecord) -> str:
    levels = POLICY_LEVELS.get(policy.policy_id, ())
    if not 0 <= policy.level < len(levels):
        raise UnknownPolicyLevel(policy.policy_id, policy.level)
    return levels[policy.level].rstrip(".").lower()


def policy_text(current: Sequence[PolicyRecord], previous: Sequence[PolicyRecord] | None) -> list[str]:
    cur = {p.policy_id: p for p in current}
    prev = {p.policy_id: p for p in previous} if previous else cur
    sentences = []
    for pid in POLICY_IDS:
        now, before = _level_summary(cur[pid]), _level_summary(prev[pid])
        name = POLICY_NAMES[pid]
        if cur[pid].level != prev[pid].level:
            sentences.append(f"There have been changes in {name} policy moving from {before} to {now}.")
        else:
            sentences.append(f"The {name} policy remains {now}.")
    return sentences


def _slope(y: np.ndarray) -> float:
    x = np.arange(len(y), dtype=float)
    x -= x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def trend_words(series: Sequence[float]) -> tuple[str, str | None]:
    """(direction, pace) of the last four points; pace is None when stable."""
    y = np.asarray(series, dtype=float)
    if y.size < 4:
        raise WindowTooShort(f"need at least 4 points, got {y.size}")
    slope = _slope(y[-4:])
    scale = abs(float(y.mean()))
    rel = abs(slope) / scale if scale > 0 else (0.0 if slope == 0 else float("inf"))
    if rel < STABLE_BAND:
        return "remained stable", None
    pace = "slowly" if rel < PACE_BANDS[0] else "moderately" if rel < PACE_BANDS[1] else "rapidly"
    return ("increased" if slope > 0 else "decreased"), pace


def series_narrative(series: Sequence[float], subject: str = "The value") -> str:
    direction, pace = trend_words(series)
    if pace is None:
        return f"{subject} {direction} over the recent weeks."
    return f"{subject} {direction} {pace} over the recent weeks."


def _share_phrase(p: float) -> str:
    if p >= 0.9:
        return "nearly all"
    if p >= 0.5:
        return "the majority"
    if p >= 0.1:
        return "a substantial minority"
    return "a small share"


def genomic_text(records: Sequence[GenomicRecord], include: bool = True) -> str:
    if not include:
        return ""
    parts = []
    for rec in records:
        if rec.variant_name == OTHER_VARIANT or rec.proportions[-1] <= GENOMIC_MIN_SHARE:
            continue
        parts.append(
            f"Variant {rec.variant_name} makes up {_share_phrase(rec.proportions[-1])} of sequenced "
            f"cases, with {rec.infectiousness} infectiousness, {rec.severity} severity and "
            f"{rec.immune_resistance} immune resistance relative to earlier variants. "
            + series_narrative(rec.proportions, "Its proportion")
        )
    if not parts:
        parts.append("No tracked variant accounts for a notable share of sequenced cases.")
    return "Genomic surveillance information: " + " ".join(parts)


def _horizon_phrase(h: int) -> str:
    return "week" if h == 1 else f"{'three' if h == 3 else h} weeks"


def _task_paragraph(name: str, horizon: int) -> str:
    lo, hi = THRESHOLDS[horizon]
    span = _horizon_phrase(horizon)
    return (
        f"Task: You are an expert in infectious disease forecasting. Use the spatial, public "
        f"health policy, epidemiological and genomic surveillance information below to predict "
        f"the COVID-19 hospitalization trend in {name} for the next {span}. The trend compares "
        f"the hospitalization rate per 100,000 people at the end of the next {span} with the "
        f"smoothed average rate of the most recent three weeks. Categories: Substantial Decrease "
        f"(fall above {hi:g}), Moderate Decrease (fall of {lo:g} to {hi:g}), Stable (change within "
        f"{lo:g}), Moderate Increase (rise of {lo:g} to {hi:g}), Substantial Increase (rise above {hi:g})."
    )


def _spatial_paragraph(rec: DataRecord) -> str:
    s, n, name = rec.spatial, rec.n_states, rec.state.name
    party = "Democrats" if s.party == "Democrat" else "Republicans"
    return (
        f"Spatial information for {name}. "
        f"Share of the population aged over 65: {share_label(rec.share_ranks[0], n)}. "
        f"Share of vulnerable racial and ethnic groups: {share_label(rec.share_ranks[1], n)}. "
        f"Overall healthcare system performance: {rank_label(s.health_overall_rank, n)}. "
        f"COVID-19 healthcare response: {rank_label(s.health_covid_rank, n)}. "
        f"Healthcare access and affordability: {rank_label(s.health_access_rank, n)}. "
        f"{name} predominantly voted for {party} in the 2020 presidential election."
    )


def _pi_sentence(pi: float | None) -> str:
    if pi is None:
        return "Previous infection data from four to sixteen weeks ago is not yet available."
    level = "low" if pi < PI_BANDS[0] else "moderate" if pi < PI_BANDS[1] else "high"
    return (f"The share of the population with a reported infection between four and sixteen "
            f"weeks ago is {level}.")


def _epi_paragraph(rec: DataRecord) -> str:
    epi = rec.epi
    return " ".join([
        "Epidemiological information:",
        series_narrative([p.cases for p in epi], "The weekly reported COVID-19 cases"),
        series_narrative([p.vax_partial for p in epi], "The partial vaccination rate"),
        series_narrative([p.vax_complete for p in epi], "The completed primary series vaccination rate"),
        series_narrative([p.vax_booster for p in epi], "The booster vaccination rate"),
        _pi_sentence(rec.prev_infections),
        f"The recent weekly hospitalization rate time series is {SPECIAL_TOKEN} .",
    ])


def _question_paragraph(name: str, horizon: int) -> str:
    return (f"Question: What is the hospitalization trend category for {name} over the next "
            f"{_horizon_phrase(horizon)}? {ANSWER_SUFFIX}")


@dataclass(frozen=True)
class PromptDocument:
    state: str
    week_index: int
    horizon: int
    include_genomic: bool
    text: str
    special_token_index: int
    target_token: str | None
    word_count: int
    answer_suffix: str = ANSWER_SUFFIX

    @property
    def prompt(self) -> str:
        """Prompt text without the target token."""
        if self.target_token is None:
            return self.text
        return self.text[: -len(self.target_token) - 1]

    def to_json(self) -> str:
        d = {
            "state": self.state,
            "week_index": self.week_index,
            "horizon": self.horizon,
            "text": self.text,
            "special_token_index": self.special_token_index,
        }
        if self.target_token is not None:
            d["target_token"] = self.target_token
        d["include_genomic"] = self.include_genomic
        return json.dumps(d, ensure_ascii=False, sort_keys=False)


def prompt_paragraphs(record: DataRecord, horizon: int) -> list[str]:
    name = record.state.name
    policy = "Public health policy information: " + " ".join(
        policy_text(record.policies, record.previous_policies))
    paragraphs = [
        _task_paragraph(name, horizon),
        _spatial_paragraph(record),
        policy,
        _epi_paragraph(record),
        genomic_text(record.genomic, record.include_genomic),
        _question_paragraph(name, horizon),
    ]
    return [p for p in paragraphs if p]


def assemble_prompt(record: DataRecord, horizon: int, target: HtcClass | None = None) -> PromptDocument:
    if horizon not in THRESHOLDS:
        raise ValueError(f"unsupported horizon {horizon}")
    prompt = "\n\n".join(prompt_paragraphs(record, horizon))
    tokens = split_tokens(prompt)
    special = [i for i, t in enumerate(tokens) if t == SPECIAL_TOKEN]
    if len(special) != 1:
        raise AssertionError(f"prompt must contain exactly one special token, found {len(special)}")
    target_token = HtcClass(target).token if target is not None else None
    text = prompt if target_token is None else f"{prompt} {target_token}"
    return PromptDocument(
        state=record.state.code,
        week_index=record.week.index,
        horizon=horizon,
        include_genomic=record.include_genomic,
        text=text,
        special_token_index=special[0] + 1,  # position 0 is <bos>
        target_token=target_token,
        word_count=len(prompt.split()),
    )


def write_prompts_jsonl(docs: Sequence[PromptDocument], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(doc.to_json())
            fh.write("\n")
