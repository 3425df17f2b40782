"""Minimal deterministic SVG line charts.

No plotting dependency: output is plain SVG text built from the data alone
(fixed palette, fixed float formatting, no timestamps), so regenerating a
chart from the same inputs is byte-identical — handy for diffing artifacts.
"""
from __future__ import annotations

import math
from pathlib import Path

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
W, H = 640, 420
MARGIN = {"left": 62, "right": 18, "top": 34, "bottom": 46}


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi]."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s for s in (1 * mag, 2 * mag, 5 * mag, 10 * mag) if s >= raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * step:
        out.append(round(t, 12))
        t += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def line_chart(series, title: str = "", xlabel: str = "", ylabel: str = "",
               logx: bool = False, logy: bool = False) -> str:
    """Render [(label, xs, ys), ...] to an SVG string.

    Log axes plot log2 of the data and label ticks with the raw values.
    """
    def tx(v):
        return math.log2(v) if logx else float(v)

    def ty(v):
        return math.log2(v) if logy else float(v)

    pts = [([tx(x) for x in xs], [ty(y) for y in ys]) for _, xs, ys in series]
    all_x = [v for xs, _ in pts for v in xs]
    all_y = [v for _, ys in pts for v in ys]
    if not all_x:
        raise ValueError("no data")
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    px0, px1 = MARGIN["left"], W - MARGIN["right"]
    py0, py1 = H - MARGIN["bottom"], MARGIN["top"]

    def sx(v):
        return px0 + (v - x_lo) / (x_hi - x_lo) * (px1 - px0)

    def sy(v):
        return py0 + (v - y_lo) / (y_hi - y_lo) * (py1 - py0)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="monospace" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>']
    if title:
        out.append(f'<text x="{W // 2}" y="18" text-anchor="middle" '
                   f'font-size="13">{title}</text>')
    out.append(f'<rect x="{px0}" y="{py1}" width="{px1 - px0}" '
               f'height="{py0 - py1}" fill="none" stroke="#333"/>')
    for t in _ticks(x_lo, x_hi):
        x = sx(t)
        label = _fmt(2.0 ** t) if logx else _fmt(t)
        out.append(f'<line x1="{x:.2f}" y1="{py0}" x2="{x:.2f}" y2="{py0 + 4}" '
                   f'stroke="#333"/>')
        out.append(f'<text x="{x:.2f}" y="{py0 + 16}" '
                   f'text-anchor="middle">{label}</text>')
    for t in _ticks(y_lo, y_hi):
        y = sy(t)
        label = _fmt(2.0 ** t) if logy else _fmt(t)
        out.append(f'<line x1="{px0 - 4}" y1="{y:.2f}" x2="{px0}" y2="{y:.2f}" '
                   f'stroke="#333"/>')
        out.append(f'<text x="{px0 - 7}" y="{y + 3.5:.2f}" '
                   f'text-anchor="end">{label}</text>')
    if xlabel:
        out.append(f'<text x="{(px0 + px1) // 2}" y="{H - 10}" '
                   f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{(py0 + py1) // 2}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {(py0 + py1) // 2})">{ylabel}</text>')
    for i, (label, _, _) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        xs, ys = pts[i]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        ly = MARGIN["top"] + 14 + 14 * i
        out.append(f'<line x1="{px1 - 110}" y1="{ly - 4}" x2="{px1 - 90}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{px1 - 85}" y="{ly}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save_chart(path, series, **kw) -> None:
    Path(path).write_text(line_chart(series, **kw))
