from __future__ import annotations

from ..errors import CoverageMismatch, InsufficientHistory, InvalidConfig
from ..targets import previous_infections, realized_trend
from .types import OTHER_VARIANT, POLICY_IDS, DataRecord, GenomicRecord, Panels, PolicyRecord

DEFAULT_WINDOW = 12
MIN_WINDOW = 4


def share_ranks(panels: Panels) -> dict[str, tuple[int, int]]:
    """Rank states by descending over-65 and vulnerable-race share (1 = highest)."""
    codes = panels.state_codes
    out = {c: [0, 0] for c in codes}
    for k, attr in enumerate(("over65_share", "vulnerable_race_share")):
        ordered = sorted(codes, key=lambda c: (-getattr(panels.spatial[c], attr), c))
        for rank, code in enumerate(ordered, start=1):
            out[code][k] = rank
    return {c: tuple(v) for c, v in out.items()}


def _policies(panels, state, week):
    levels = panels.policy.get((state, week))
    if levels is None or any(pid not in levels for pid in POLICY_IDS):
        raise CoverageMismatch(state, week, "policy")
    return tuple(PolicyRecord(pid, levels[pid]) for pid in POLICY_IDS)


def _genomic_window(panels, weeks):
    for w in weeks:
        if w not in panels.genomic:
            raise CoverageMismatch("*", w, "genomic")
    current = {r.variant_name: r for r in panels.genomic[weeks[-1]] if r.variant_name != OTHER_VARIANT}
    history = [{r.variant_name: r.proportion for r in panels.genomic[w]} for w in weeks]
    return tuple(
        GenomicRecord(
            variant_name=name,
            infectiousness=row.infectiousness,
            severity=row.severity,
            immune_resistance=row.immune_resistance,
            proportions=tuple(h.get(name, 0.0) for h in history),
        )
        for name, row in sorted(current.items())
    )


def assemble_dataset(panels: Panels, window_len: int = DEFAULT_WINDOW,
                     include_genomic: bool = True) -> list[DataRecord]:
    if window_len < MIN_WINDOW:
        raise InvalidConfig("window_len", f"must be >= {MIN_WINDOW}, got {window_len}")
    if set(panels.epi) != set(panels.states):
        missing = sorted(set(panels.states) ^ set(panels.epi))
        raise CoverageMismatch(missing[0], None, "epi/spatial")
    ranks = share_ranks(panels)
    n_states = len(panels.states)
    records = []
    for code in panels.state_codes:
        points = panels.epi[code]
        state = panels.states[code]
        hr = [p.hosp_rate for p in points]
        cases = [p.cases for p in points]
        weeks = [p.week.index for p in points]
        for w in weeks:
            _policies(panels, code, w)
        trend = []
        for j in range(len(points)):
            try:
                trend.append(realized_trend(hr, j, 1).value)
            except InsufficientHistory:
                trend.append(0.0)
        for t in range(window_len - 1, len(points)):
            lo = t - window_len + 1
            try:
                pi = previous_infections(cases, state.population, t)
            except InsufficientHistory:
                pi = None
            records.append(DataRecord(
                state=state,
                week=points[t].week,
                epi=tuple(points[lo:t + 1]),
                spatial=panels.spatial[code],
                policies=_policies(panels, code, weeks[t]),
                previous_policies=_policies(panels, code, weeks[t - 1]) if t > 0 else None,
                genomic=_genomic_window(panels, weeks[lo:t + 1]),
                n_states=n_states,
                share_ranks=ranks[code],
                recent_trend=tuple(trend[lo:t + 1]),
                prev_infections=pi,
                include_genomic=include_genomic,
            ))
    return records
