"""Command implementations behind the ``epicast`` CLI.

Every command is a pure function of the RunConfig: it re-derives what it needs
from the panel CSVs and writes its artifacts under ``out_dir`` together with a
manifest entry (config hash, seeds, tool version and output checksums).
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .baselines import (SEQ_KINDS, ar_class, load_seq_classifier, numeric_features, predict_seq_proba,
                        prevtrend, realized_classes, save_seq_classifier, train_seq_classifier)
from .config import RunConfig, write_config
from .data.assemble import assemble_dataset
from .data.io import load_panels, write_panels
from .data.synth import generate_synthetic
from .data.types import Panels
from .errors import SplitLeakage
from .forecast import Forecast, read_forecasts, write_forecasts
from .metrics import (METRICS, argmax_class, build_report, pair_forecasts, rank_models, score_all,
                      write_metrics_json)
from .neural.bundle import load_bundle, save_bundle
from .neural.model import ModelBundle, fit, make_example, predict_proba
from .report import confusion_svg, line_chart, write_csv, write_text
from .targets import LabeledExample, attach_records, build_labels, write_labels_csv
from .textualizer import assemble_prompt, write_prompts_jsonl

log = logging.getLogger(__name__)

LM_ID = "LM"


# --- shared plumbing ---------------------------------------------------------

def out_path(cfg: RunConfig, *parts) -> Path:
    p = Path(cfg.out_dir).joinpath(*parts)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def data_dir(cfg: RunConfig) -> Path:
    return Path(cfg.data_dir) if cfg.data_dir else Path(cfg.out_dir) / "data"


def load_data(cfg: RunConfig) -> Panels:
    return load_panels(data_dir(cfg))


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get("EPICAST_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Map in worker threads (EPICAST_THREADS); results keep input order."""
    workers = min(n_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def record_manifest(cfg: RunConfig, command: str, outputs: Iterable[Path]) -> Path:
    path = out_path(cfg, "manifest.json")
    manifest = json.loads(path.read_text()) if path.exists() else {}
    root = Path(cfg.out_dir)
    manifest["tool_version"] = __version__
    manifest["config_hash"] = cfg.hash()
    manifest.setdefault("commands", {})[command] = {
        "config_hash": cfg.hash(),
        "seeds": {"seed": cfg.seed, "seeds": list(cfg.seeds), "split_seed": cfg.split_seed,
                  "synth_seed": cfg.synth_seed, "body_seed": cfg.model.body_seed},
        "outputs": {str(Path(p).relative_to(root)): _sha256(Path(p)) for p in sorted(outputs)},
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# --- datasets and splits -----------------------------------------------------

@dataclass
class Split:
    horizon: int
    test_start: int
    train_end: int
    train: list[LabeledExample]
    val: list[LabeledExample]
    test: list[LabeledExample]


def panel_weeks(panels: Panels) -> list[int]:
    return sorted({p.week.index for pts in panels.epi.values() for p in pts})


def labeled_examples(panels: Panels, h: int, window_len: int, include_genomic: bool = True) -> list[LabeledExample]:
    records = assemble_dataset(panels, window_len, include_genomic)
    return attach_records(build_labels(panels, h), records)


def test_start_week(cfg: RunConfig, panels: Panels) -> int:
    weeks = panel_weeks(panels)
    if cfg.test_start is not None:
        return cfg.test_start
    return weeks[max(0, len(weeks) - cfg.test_weeks)]


def check_leakage(train: Iterable[LabeledExample], test_start: int) -> None:
    """Training targets must be observed strictly before the first test week."""
    bad = [e for e in train if e.week_index + e.horizon >= test_start]
    if bad:
        e = bad[0]
        raise SplitLeakage(f"SplitLeakage: training example {e.state} week {e.week_index} "
                           f"(target week {e.week_index + e.horizon}) reaches the test window "
                           f"starting at week {test_start}")


def make_split(cfg: RunConfig, examples: Sequence[LabeledExample], h: int, test_start: int) -> Split:
    train_end = cfg.train_end if cfg.train_end is not None else test_start - h - 1
    pool = [e for e in examples if e.week_index <= train_end]
    check_leakage(pool, test_start)
    test = [e for e in examples if e.week_index >= test_start]
    order = np.random.default_rng(cfg.split_seed).permutation(len(pool))
    n_val = int(round(cfg.val_ratio * len(pool)))
    val = [pool[i] for i in sorted(order[:n_val])]
    train = [pool[i] for i in sorted(order[n_val:])]
    return Split(h, test_start, train_end, train, val, test)


def prepare(cfg: RunConfig, h: int, panels: Panels | None = None, include_genomic: bool | None = None):
    panels = load_data(cfg) if panels is None else panels
    inc = cfg.include_genomic if include_genomic is None else include_genomic
    examples = labeled_examples(panels, h, cfg.window_len, inc)
    return panels, make_split(cfg, examples, h, test_start_week(cfg, panels))


# --- models -------------------------------------------------------------------

def train_lm(cfg: RunConfig, split: Split, seed: int, encoder_kind="default") -> tuple[ModelBundle, list[dict]]:
    model_cfg = cfg.model if encoder_kind == "default" else replace(cfg.model, encoder_kind=encoder_kind)
    check_leakage(split.train + split.val, split.test_start)
    return fit([e.record for e in split.train], [e.target for e in split.train], split.horizon, model_cfg, seed,
               [e.record for e in split.val], [e.target for e in split.val])


def lm_forecasts(bundle: ModelBundle, examples: Sequence[LabeledExample], model_id: str = LM_ID) -> list[Forecast]:
    exs = [make_example(bundle.vocab, assemble_prompt(e.record, bundle.horizon), e.record) for e in examples]
    probs = predict_proba(bundle, exs)
    return [Forecast(model_id, e.state, e.week_index, bundle.horizon, tuple(p.tolist()))
            for e, p in zip(examples, probs)]


def _series(panels: Panels) -> tuple[dict[str, list[float]], dict[str, int]]:
    hr = {s: [p.hosp_rate for p in pts] for s, pts in panels.epi.items()}
    first = {s: pts[0].week.index for s, pts in panels.epi.items()}
    return hr, first


def prevtrend_forecasts(panels: Panels, examples: Sequence[LabeledExample], h: int) -> list[Forecast]:
    hr, first = _series(panels)
    cache = {}
    out = []
    for e in examples:
        t = e.week_index - first[e.state]
        if t not in cache:
            cache[t] = prevtrend(realized_classes(hr, t, h))
        out.append(Forecast("PrevTrend", e.state, e.week_index, h, cache[t].probs))
    return out


def ar_forecasts(panels: Panels, examples: Sequence[LabeledExample], h: int) -> list[Forecast]:
    hr, first = _series(panels)
    return [Forecast("AR", e.state, e.week_index, h,
                     point_class=int(ar_class(hr[e.state][:e.week_index - first[e.state] + 1], h)))
            for e in examples]


def seq_forecasts(clf, examples: Sequence[LabeledExample], h: int) -> list[Forecast]:
    if not examples:
        return []
    X = np.stack([numeric_features(e.record, clf.features) for e in examples])
    probs = predict_seq_proba(clf, X)
    return [Forecast(clf.kind, e.state, e.week_index, h, tuple(p.tolist())) for e, p in zip(examples, probs)]


def _model_dir(cfg: RunConfig, h: int) -> Path:
    return Path(cfg.out_dir) / "models" / f"h{h}"


# --- commands --------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> list[Path]:
    cfg.synth.validate()
    panels = generate_synthetic(cfg.synth, cfg.synth_seed)
    target = Path(cfg.out_dir) / "data"
    write_panels(panels, target)
    write_config(cfg, out_path(cfg, "config.json"))
    outputs = sorted(target.glob("*.csv"))
    record_manifest(cfg, "synth", outputs)
    return outputs


def cmd_ingest(cfg: RunConfig) -> list[Path]:
    panels = load_data(cfg)
    records = assemble_dataset(panels, cfg.window_len, cfg.include_genomic)
    weeks = panel_weeks(panels)
    summary = {"data_dir": str(data_dir(cfg)), "n_states": len(panels.states), "n_weeks": len(weeks),
               "first_week": weeks[0], "last_week": weeks[-1], "n_records": len(records),
               "test_start": test_start_week(cfg, panels)}
    path = out_path(cfg, "dataset.json")
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    record_manifest(cfg, "ingest", [path])
    return [path]


def cmd_labels(cfg: RunConfig) -> list[Path]:
    panels = load_data(cfg)
    labels = [ex for h in cfg.horizons for ex in build_labels(panels, h)]
    path = out_path(cfg, "labels.csv")
    write_labels_csv(labels, path)
    record_manifest(cfg, "labels", [path])
    return [path]


def cmd_prompts(cfg: RunConfig) -> list[Path]:
    panels = load_data(cfg)
    docs = []
    for h in cfg.horizons:
        for e in labeled_examples(panels, h, cfg.window_len, cfg.include_genomic):
            docs.append(assemble_prompt(e.record, h, e.target))
    path = out_path(cfg, "prompts.jsonl")
    write_prompts_jsonl(docs, path)
    record_manifest(cfg, "prompts", [path])
    return [path]


def cmd_train(cfg: RunConfig) -> list[Path]:
    panels = load_data(cfg)
    outputs = []
    for h in cfg.horizons:
        _, split = prepare(cfg, h, panels)
        mdir = _model_dir(cfg, h)
        mdir.mkdir(parents=True, exist_ok=True)
        bundle, trace = train_lm(cfg, split, cfg.seed)
        save_bundle(bundle, mdir / f"{LM_ID}.bundle")
        with open(mdir / f"{LM_ID}.train_log.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for row in trace:
                fh.write(json.dumps(row) + "\n")
        outputs += [mdir / f"{LM_ID}.bundle"]
        kinds = [k for k in cfg.baselines if k in SEQ_KINDS]
        X = np.stack([numeric_features(e.record) for e in split.train])
        y = np.array([int(e.target) - 1 for e in split.train])
        clfs = parallel_map(lambda k: train_seq_classifier(k, X, y, cfg.seed, cfg.baseline_train), kinds)
        for clf in clfs:
            save_seq_classifier(clf, mdir / f"{clf.kind}.bundle")
            outputs.append(mdir / f"{clf.kind}.bundle")
        split_info = {"horizon": h, "test_start": split.test_start, "train_end": split.train_end,
                      "n_train": len(split.train), "n_val": len(split.val), "n_test": len(split.test)}
        p = mdir / "split.json"
        p.write_text(json.dumps(split_info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        outputs.append(p)
    record_manifest(cfg, "train", outputs)
    return outputs


def forecasts_for(cfg: RunConfig, panels: Panels, h: int, examples: Sequence[LabeledExample]) -> list[Forecast]:
    mdir = _model_dir(cfg, h)
    out = lm_forecasts(load_bundle(mdir / f"{LM_ID}.bundle"), examples)
    for model_id in cfg.baselines:
        if model_id == "PrevTrend":
            out += prevtrend_forecasts(panels, examples, h)
        elif model_id == "AR":
            out += ar_forecasts(panels, examples, h)
        else:
            out += seq_forecasts(load_seq_classifier(mdir / f"{model_id}.bundle"), examples, h)
    return out


def cmd_predict(cfg: RunConfig, weeks: tuple[int, int] | None = None) -> list[Path]:
    panels = load_data(cfg)
    forecasts = []
    for h in cfg.horizons:
        _, split = prepare(cfg, h, panels)
        examples = split.test
        if weeks is not None:
            every = labeled_examples(panels, h, cfg.window_len, cfg.include_genomic)
            examples = [e for e in every if weeks[0] <= e.week_index <= weeks[1]]
        forecasts += forecasts_for(cfg, panels, h, examples)
    forecasts.sort(key=lambda f: (f.horizon, f.model_id, f.state, f.week_index))
    path = out_path(cfg, "forecasts.jsonl")
    write_forecasts(forecasts, path)
    record_manifest(cfg, "predict", [path])
    return [path]


def truth_table(panels: Panels, h: int) -> dict[tuple[str, int], int]:
    return {(e.state, e.week_index): int(e.target) for e in build_labels(panels, h)}


def cmd_eval(cfg: RunConfig) -> list[Path]:
    panels = load_data(cfg)
    forecasts = read_forecasts(out_path(cfg, "forecasts.jsonl"))
    report, rank_rows, outputs = {}, [], []
    rdir = Path(cfg.out_dir) / "report"
    rdir.mkdir(parents=True, exist_ok=True)
    for h in sorted({f.horizon for f in forecasts}):
        scored = pair_forecasts([f for f in forecasts if f.horizon == h], truth_table(panels, h))
        rep = build_report(scored)
        report[f"h{h}"] = rep
        ranks = rank_models({m: r["overall"] for m, r in rep.items()})
        for m in sorted(ranks, key=lambda m: (ranks[m]["average_rank"], m)):
            rank_rows.append([h, m] + [ranks[m].get(k) for k in METRICS] + [ranks[m]["average_rank"]])
        outputs += _report_assets(rdir, h, rep)
    mpath = out_path(cfg, "metrics.json")
    write_metrics_json(report, mpath)
    rpath = out_path(cfg, "ranks.csv")
    write_csv(rpath, ("horizon", "model_id") + METRICS + ("average_rank",), rank_rows)
    outputs = [mpath, rpath] + outputs
    record_manifest(cfg, "eval", outputs)
    return outputs


def _report_assets(rdir: Path, h: int, rep: dict) -> list[Path]:
    out = []
    models = sorted(rep)
    rows = [[m] + [rep[m]["overall"].get(k) for k in METRICS] for m in models]
    p = rdir / f"overall_h{h}.csv"
    write_csv(p, ("model_id",) + METRICS, rows)
    out.append(p)
    for key, label in (("by_week", "week_index"), ("by_state", "state")):
        rows = [[m, g] + [s.get(k) for k in METRICS] for m in models for g, s in rep[m][key].items()]
        p = rdir / f"{key}_h{h}.csv"
        write_csv(p, ("model_id", label) + METRICS, rows)
        out.append(p)
    weekly = {m: [(int(w), s.get("wmse")) for w, s in rep[m]["by_week"].items()]
              for m in models if "wmse" in rep[m]["overall"]}
    p = rdir / f"wmse_by_week_h{h}.svg"
    write_text(p, line_chart(weekly, f"Weekly WMSE, {h}-week horizon", "week index", "WMSE"))
    out.append(p)
    for m in models:
        p = rdir / f"confusion_{m}_h{h}.csv"
        write_csv(p, ("true_class",) + tuple(f"pred_{k}" for k in range(1, 6)),
                  [[i + 1] + row for i, row in enumerate(rep[m]["confusion"])])
        q = rdir / f"confusion_{m}_h{h}.svg"
        write_text(q, confusion_svg(np.array(rep[m]["confusion"]), f"{m} confusion, {h}-week horizon"))
        out += [p, q]
        if "confidence_curve" in rep[m]:
            curve = rep[m]["confidence_curve"]
            p = rdir / f"confidence_{m}_h{h}.csv"
            write_csv(p, ("threshold", "accuracy", "coverage"),
                      [[c["threshold"], c["accuracy"], c["coverage"]] for c in curve])
            q = rdir / f"confidence_{m}_h{h}.svg"
            write_text(q, line_chart({"accuracy": [(c["threshold"], c["accuracy"]) for c in curve],
                                      "coverage": [(c["threshold"], c["coverage"]) for c in curve]},
                                     f"{m} confidence threshold, {h}-week horizon", "threshold"))
            out += [p, q]
    return out


def ablation_scores(cfg: RunConfig, h: int, seed: int, kind: str, panels: Panels | None = None,
                    split: Split | None = None) -> dict[str, float]:
    """Train one encoder variant and score it on the test window."""
    if split is None:
        panels, split = prepare(cfg, h, panels)
    bundle, _ = train_lm(cfg, split, seed, None if kind == "none" else kind)
    fc = lm_forecasts(bundle, split.test)
    return score_all([int(e.target) for e in split.test], probs=[f.probs for f in fc])


def ablation_table(scores: dict[str, dict[str, float]], reference: str = "GRU") -> list[list]:
    """Rows of metric values with deltas against the reference encoder."""
    ref = scores.get(reference)
    rows = []
    for kind, s in scores.items():
        row = [kind] + [s[k] for k in METRICS]
        row += [(s[k] - ref[k]) if ref is not None else None for k in METRICS]
        rows.append(row)
    return rows


def cmd_ablate(cfg: RunConfig) -> list[Path]:
    panels = load_data(cfg)
    adir = Path(cfg.out_dir) / "ablation"
    adir.mkdir(parents=True, exist_ok=True)
    header = ("encoder",) + METRICS + tuple(f"delta_{k}" for k in METRICS)
    outputs, summary = [], {}
    for h in cfg.horizons:
        _, split = prepare(cfg, h, panels)
        per_seed = {}
        for seed in cfg.seeds:
            scores = {k: ablation_scores(cfg, h, seed, k, panels, split) for k in cfg.ablation_encoders}
            per_seed[seed] = scores
            p = adir / f"ablation_h{h}_seed{seed}.csv"
            write_csv(p, header, ablation_table(scores))
            outputs.append(p)
        median = {k: {m: float(np.median([per_seed[s][k][m] for s in cfg.seeds])) for m in METRICS}
                  for k in cfg.ablation_encoders}
        p = adir / f"ablation_h{h}_median.csv"
        write_csv(p, header, ablation_table(median))
        outputs.append(p)
        summary[f"h{h}"] = {"per_seed": {str(s): v for s, v in per_seed.items()}, "median": median}
    p = adir / "ablation.json"
    write_metrics_json(summary, p)
    outputs.append(p)
    record_manifest(cfg, "ablate", outputs)
    return outputs


def gsi_series(panels: Panels, bundle: ModelBundle, cfg: RunConfig, h: int) -> dict[str, dict[int, dict]]:
    """Per-week WMSE and mean confidence with and without the genomic paragraph."""
    out = {}
    for cond, inc in (("with_gsi", True), ("without_gsi", False)):
        _, split = prepare(cfg, h, panels, include_genomic=inc)
        fc = lm_forecasts(bundle, split.test)
        truth = {(e.state, e.week_index): int(e.target) for e in split.test}
        weeks = {}
        for w in sorted({f.week_index for f in fc}):
            sel = [f for f in fc if f.week_index == w]
            P = np.array([f.probs for f in sel])
            t = [truth[(f.state, f.week_index)] for f in sel]
            weeks[w] = {"wmse": score_all(t, probs=P)["wmse"], "confidence": float(P.max(axis=1).mean()),
                        "accuracy": float(np.mean(argmax_class(P) == np.array(t)))}
        out[cond] = weeks
    return out


def cmd_gsi(cfg: RunConfig) -> list[Path]:
    panels = load_data(cfg)
    gdir = Path(cfg.out_dir) / "gsi"
    gdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for h in cfg.horizons:
        bundle = load_bundle(_model_dir(cfg, h) / f"{LM_ID}.bundle")
        series = gsi_series(panels, bundle, cfg, h)
        weeks = sorted(series["with_gsi"])
        rows = [[w] + [series[c][w][k] for c in ("with_gsi", "without_gsi") for k in ("wmse", "confidence")]
                for w in weeks]
        p = gdir / f"gsi_h{h}.csv"
        write_csv(p, ("week_index", "wmse_with_gsi", "confidence_with_gsi",
                      "wmse_without_gsi", "confidence_without_gsi"), rows)
        outputs.append(p)
        for metric in ("wmse", "confidence"):
            q = gdir / f"gsi_{metric}_h{h}.svg"
            write_text(q, line_chart({c: [(w, series[c][w][metric]) for w in weeks]
                                      for c in ("with_gsi", "without_gsi")},
                                     f"{metric} with and without genomic text, {h}-week horizon",
                                     "week index", metric))
            outputs.append(q)
    record_manifest(cfg, "gsi", outputs)
    return outputs


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "labels": cmd_labels,
    "prompts": cmd_prompts,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "gsi": cmd_gsi,
}
