"""Minimal self-contained SVG line plots for occupation dynamics.

Hand-rolled polylines on a fixed 800x500 canvas; no plotting dependency so
runs reproduce their figures anywhere.
"""

from __future__ import annotations

import math

WIDTH, HEIGHT = 800, 500
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 55

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if step >= raw:
            break
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * step:
        out.append(round(t, 12))
        t += step
    return out


def _fmt(v: float) -> str:
    if v == int(v):
        return str(int(v))
    return f"{v:g}"


def line_plot(path, xs, series, title: str = "", xlabel: str = "",
              ylabel: str = "") -> None:
    """Write an SVG polyline plot.

    ``series`` is a list of (label, ys) pairs sharing the x grid; axes are
    linear with automatic ticks.
    """
    xs = list(xs)
    if not xs or not series:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(xs), max(xs)
    y_lo = min(min(ys) for _, ys in series)
    y_hi = max(max(ys) for _, ys in series)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    px_w = WIDTH - MARGIN_L - MARGIN_R
    px_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x: float) -> float:
        return MARGIN_L + px_w * (x - x_lo) / (x_hi - x_lo)

    def sy(y: float) -> float:
        return MARGIN_T + px_h * (1.0 - (y - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{px_w}" height="{px_h}" '
        'fill="none" stroke="#333" stroke-width="1"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        if not x_lo <= t <= x_hi:
            continue
        x = sx(t)
        parts.append(f'<line x1="{x:.1f}" y1="{MARGIN_T + px_h}" x2="{x:.1f}" '
                     f'y2="{MARGIN_T + px_h + 5}" stroke="#333"/>')
        parts.append(f'<text x="{x:.1f}" y="{MARGIN_T + px_h + 20}" '
                     f'text-anchor="middle" font-size="12">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        if not y_lo <= t <= y_hi:
            continue
        y = sy(t)
        parts.append(f'<line x1="{MARGIN_L - 5}" y1="{y:.1f}" x2="{MARGIN_L}" '
                     f'y2="{y:.1f}" stroke="#333"/>')
        parts.append(f'<text x="{MARGIN_L - 9}" y="{y + 4:.1f}" '
                     f'text-anchor="end" font-size="12">{_fmt(t)}</text>')
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
                     f'font-size="16">{title}</text>')
    if xlabel:
        parts.append(f'<text x="{MARGIN_L + px_w / 2}" y="{HEIGHT - 12}" '
                     f'text-anchor="middle" font-size="13">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="18" y="{MARGIN_T + px_h / 2}" text-anchor="middle" '
                     f'font-size="13" transform="rotate(-90 18 {MARGIN_T + px_h / 2})">'
                     f'{ylabel}</text>')
    for i, (label, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
        ly = MARGIN_T + 14 + 18 * i
        lx = MARGIN_L + px_w - 150
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 30}" y="{ly}" font-size="12">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
