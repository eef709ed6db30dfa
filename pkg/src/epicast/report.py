"""Static report assets: CSV tables and small hand-written SVG charts."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .targets import HtcClass

W, H, PAD = 560, 320, 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _svg(body: list[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13">'
                      f'{escape(title)}</text>', *body, "</svg>", ""])


def line_chart(series: Mapping[str, Sequence[tuple[float, float | None]]], title: str,
               xlabel: str = "", ylabel: str = "") -> str:
    """One polyline per named series of (x, y) points; None values break the line."""
    pts = [(x, y) for s in series.values() for x, y in s if y is not None]
    if not pts:
        return _svg([f'<text x="{W / 2}" y="{H / 2}" text-anchor="middle">no data</text>'], title)
    xs, ys = np.array([p[0] for p in pts], float), np.array([p[1] for p in pts], float)
    x0, x1 = xs.min(), xs.max() if xs.max() > xs.min() else xs.min() + 1
    y0, y1 = min(0.0, ys.min()), ys.max() if ys.max() > min(0.0, ys.min()) else 1.0
    sx = lambda x: PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD)  # noqa: E731
    sy = lambda y: H - PAD - (y - y0) / (y1 - y0) * (H - 2 * PAD)  # noqa: E731
    body = [
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{H / 2:.1f}" transform="rotate(-90 14 {H / 2:.1f})" '
        f'text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for v in (y0, (y0 + y1) / 2, y1):
        body.append(f'<text x="{PAD - 4}" y="{sy(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    for v in (x0, x1):
        body.append(f'<text x="{sx(v):.1f}" y="{H - PAD + 14}" text-anchor="middle">{v:.4g}</text>')
    for i, (name, s) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        seg: list[str] = []
        segments = []
        for x, y in s:
            if y is None:
                if seg:
                    segments.append(seg)
                seg = []
            else:
                seg.append(f"{sx(x):.1f},{sy(y):.1f}")
        if seg:
            segments.append(seg)
        for sg in segments:
            body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(sg)}"/>')
        body.append(f'<text x="{W - PAD + 4}" y="{PAD + 14 * i}" fill="{color}">{escape(name)}</text>')
    return _svg(body, title)


def confusion_svg(cm: np.ndarray, title: str) -> str:
    cm = np.asarray(cm)
    k = cm.shape[0]
    cell = (H - 2 * PAD) / k
    top = cm.max() if cm.max() > 0 else 1
    body = []
    for i in range(k):
        for j in range(k):
            shade = int(255 - 200 * cm[i, j] / top)
            x, y = PAD * 3 + j * cell, PAD + i * cell
            body.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cell:.1f}" height="{cell:.1f}" '
                        f'fill="rgb({shade},{shade},255)" stroke="white"/>')
            body.append(f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 4:.1f}" '
                        f'text-anchor="middle">{int(cm[i, j])}</text>')
    for i, c in enumerate(HtcClass):
        body.append(f'<text x="{PAD * 3 - 4}" y="{PAD + (i + 0.5) * cell + 4:.1f}" '
                    f'text-anchor="end">{escape(c.label)}</text>')
    body.append(f'<text x="{PAD * 3 + k * cell / 2:.1f}" y="{H - 12}" text-anchor="middle">predicted</text>')
    return _svg(body, title)


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")
