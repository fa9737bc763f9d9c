"""Minimal deterministic SVG line charts with optional shaded bands."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 150, 40, 56
PALETTE = ("#1f4e79", "#b03a2e", "#1e8449", "#7d3c98", "#b9770e", "#117a65", "#5d6d7e",
           "#a04000", "#2e4053")


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    band_low: Optional[Sequence[float]] = None
    band_high: Optional[Sequence[float]] = None
    dashed: bool = False


@dataclass
class Chart:
    title: str
    x_label: str
    y_label: str
    series: list[Series] = field(default_factory=list)
    log_x: bool = False


def _f(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks, v = [], start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _tick_label(v: float) -> str:
    if v == int(v) and abs(v) >= 1:
        return str(int(v))
    return f"{v:.4g}"


def render(chart: Chart) -> str:
    xs = [float(x) for s in chart.series for x in s.x]
    ys = [float(y) for s in chart.series for y in s.y]
    for s in chart.series:
        if s.band_low is not None:
            ys += [float(v) for v in s.band_low] + [float(v) for v in s.band_high]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    tx = (lambda v: math.log10(v)) if chart.log_x else (lambda v: v)
    x_lo, x_hi = tx(min(xs)), tx(max(xs))
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    y_lo, y_hi = min(ys), max(ys)
    pad = 0.05 * (y_hi - y_lo) if y_hi > y_lo else 0.05 * max(abs(y_hi), 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(v: float) -> float:
        return MARGIN_L + (tx(v) - x_lo) / (x_hi - x_lo) * pw

    def py(v: float) -> float:
        return MARGIN_T + (1.0 - (v - y_lo) / (y_hi - y_lo)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">'
        f"{escape(chart.title)}</text>",
    ]
    # axes and ticks
    x0, y0 = MARGIN_L, MARGIN_T + ph
    out.append(f'<rect x="{x0}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" '
               f'stroke="#333" stroke-width="1"/>')
    if chart.log_x:
        x_ticks = sorted({float(x) for x in xs})
    else:
        x_ticks = _nice_ticks(min(xs), max(xs))
    for v in x_ticks:
        X = px(v)
        out.append(f'<line x1="{_f(X)}" y1="{y0}" x2="{_f(X)}" y2="{y0 + 5}" stroke="#333"/>')
        out.append(f'<text x="{_f(X)}" y="{y0 + 19}" text-anchor="middle">{_tick_label(v)}</text>')
    for v in _nice_ticks(y_lo, y_hi):
        if not y_lo <= v <= y_hi:
            continue
        Y = py(v)
        out.append(f'<line x1="{x0 - 5}" y1="{_f(Y)}" x2="{x0 + pw}" y2="{_f(Y)}" '
                   f'stroke="#ddd" stroke-width="0.6"/>')
        out.append(f'<text x="{x0 - 8}" y="{_f(Y + 4)}" text-anchor="end">{_tick_label(v)}</text>')
    out.append(f'<text x="{x0 + pw / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle">'
               f"{escape(chart.x_label)}</text>")
    out.append(f'<text x="18" y="{MARGIN_T + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {MARGIN_T + ph / 2:.1f})">{escape(chart.y_label)}</text>')

    for k, s in enumerate(chart.series):
        color = PALETTE[k % len(PALETTE)]
        if s.band_low is not None and s.band_high is not None:
            upper = [f"{_f(px(x))},{_f(py(h))}" for x, h in zip(s.x, s.band_high)]
            lower = [f"{_f(px(x))},{_f(py(lo))}" for x, lo in zip(s.x, s.band_low)]
            out.append(f'<polygon points="{" ".join(upper + lower[::-1])}" fill="#bbbbbb" '
                       f'fill-opacity="0.55" stroke="none"/>')
        pts = " ".join(f"{_f(px(x))},{_f(py(y))}" for x, y in zip(s.x, s.y))
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"{dash}/>')
        for x, y in zip(s.x, s.y):
            out.append(f'<circle cx="{_f(px(x))}" cy="{_f(py(y))}" r="3" fill="{color}"/>')
        ly = MARGIN_T + 14 + 18 * k
        lx = MARGIN_L + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 28}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
