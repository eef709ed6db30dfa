"""Golden prompt fixtures: (name, state, week_index, horizon, include_genomic, with_target).

Set EPICAST_REGEN_GOLDENS=1 and run ``python3 tests/goldens.py`` to rewrite the
golden files after an intentional template change; review the diff by hand.
"""
from dataclasses import replace
from pathlib import Path

from epicast.data.assemble import assemble_dataset
from epicast.data.io import load_panels
from epicast.targets import attach_records, build_labels
from epicast.textualizer import assemble_prompt

FIXTURES = Path(__file__).parent / "fixtures"
PANEL = FIXTURES / "panel"
CASES = (
    ("A", "AK", 20, 1, True, True),
    ("B", "AL", 25, 3, True, False),
    ("C", "AR", 12, 1, False, True),
)


def render(case, panels=None):
    name, state, week, h, include, with_target = case
    panels = panels or load_panels(PANEL)
    records = {(r.state.code, r.week.index): r for r in assemble_dataset(panels)}
    rec = replace(records[(state, week)], include_genomic=include)
    target = None
    if with_target:
        (ex,) = [e for e in attach_records(build_labels(panels, h), [rec])]
        target = ex.target
    return assemble_prompt(rec, h, target)


def golden_path(name):
    return FIXTURES / f"prompt_{name}.txt"


if __name__ == "__main__":
    import os
    if os.environ.get("EPICAST_REGEN_GOLDENS") != "1":
        raise SystemExit("set EPICAST_REGEN_GOLDENS=1 to rewrite golden files")
    panels = load_panels(PANEL)
    for case in CASES:
        golden_path(case[0]).write_bytes(render(case, panels).text.encode("utf-8"))
        print("wrote", golden_path(case[0]))
