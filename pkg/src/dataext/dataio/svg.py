"""Deterministic SVG learning-curve plots with +/- 2 SE bands."""
from __future__ import annotations

import math
from html import escape

from ..externality import axis_lines
from ..sweep import RiskSurface

WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 80, 200, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def _series(surface: RiskSurface, axis: str):
    lines = axis_lines(surface, axis)
    others = [g for g in surface.source_groups if g != axis]
    out = []
    for g in surface.eval_groups:
        for line in lines:
            pts = []
            for i in line:
                c = surface.cell(i, g)
                if c.ok:
                    pts.append((surface.grid[i].get(axis, 0), c.mean, c.se))
            if not pts:
                continue
            fixed = surface.grid[line[0]]
            label = f"eval {g}"
            if others:
                label += " | " + ", ".join(f"n_{o}={fixed.get(o, 0)}" for o in others)
            out.append((label, pts))
    return out


def render_plot(surface: RiskSurface, axis, title: str | None = None) -> str:
    axis = str(axis)
    series = _series(surface, axis)
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM
    xs = sorted({n for _, pts in series for n, _, _ in pts}) or [0]
    lo_y, hi_y = math.inf, -math.inf
    for _, pts in series:
        for _, m, se in pts:
            band = 2 * se if math.isfinite(se) else 0.0
            lo_y, hi_y = min(lo_y, m - band), max(hi_y, m + band)
    if not math.isfinite(lo_y):
        lo_y, hi_y = 0.0, 1.0
    if hi_y - lo_y < 1e-12:
        lo_y, hi_y = lo_y - 0.5, hi_y + 0.5
    pad = 0.05 * (hi_y - lo_y)
    lo_y, hi_y = lo_y - pad, hi_y + pad

    lx = [math.log10(1 + n) for n in xs]
    x0, x1 = lx[0], lx[-1] if lx[-1] > lx[0] else lx[0] + 1

    def px(n):
        return LEFT + (math.log10(1 + n) - x0) / (x1 - x0) * plot_w

    def py(v):
        return TOP + (hi_y - v) / (hi_y - lo_y) * plot_h

    no_band = surface.trials < 2
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{LEFT}" y="24" font-family="sans-serif" font-size="14">'
        f"{escape(title or f'mean {surface.metric} vs n_{axis}')}</text>",
        f'<line x1="{LEFT}" y1="{TOP + plot_h}" x2="{LEFT + plot_w}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="black"/>',
    ]
    for n in xs:
        x = _f(px(n))
        parts.append(f'<line x1="{x}" y1="{TOP + plot_h}" x2="{x}" y2="{TOP + plot_h + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{x}" y="{TOP + plot_h + 18}" font-family="sans-serif" font-size="10" text-anchor="middle">{n}</text>'
        )
    for k in range(6):
        v = lo_y + (hi_y - lo_y) * k / 5
        y = _f(py(v))
        parts.append(f'<line x1="{LEFT - 5}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>')
        parts.append(
            f'<text x="{LEFT - 8}" y="{y}" font-family="sans-serif" font-size="10" text-anchor="end">{_tick_label(v)}</text>'
        )
    parts.append(
        f'<text x="{LEFT + plot_w / 2:.2f}" y="{HEIGHT - 15}" font-family="sans-serif" font-size="12" '
        f'text-anchor="middle">n_{escape(axis)} (log scale)</text>'
    )
    parts.append(
        f'<text x="18" y="{TOP + plot_h / 2:.2f}" font-family="sans-serif" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 18 {TOP + plot_h / 2:.2f})">{escape(surface.metric)}</text>'
    )

    for k, (label, pts) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        if not no_band and all(math.isfinite(se) for _, _, se in pts):
            upper = [(px(n), py(m + 2 * se)) for n, m, se in pts]
            lower = [(px(n), py(m - 2 * se)) for n, m, se in reversed(pts)]
            poly = " ".join(f"{_f(x)},{_f(y)}" for x, y in upper + lower)
            parts.append(f'<polygon class="band" points="{poly}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{_f(px(n))},{_f(py(m))}" for n, m, _ in pts)
        parts.append(f'<polyline class="mean" points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = TOP + 14 + 18 * k
        lx0 = LEFT + plot_w + 12
        parts.append(f'<line x1="{lx0}" y1="{ly}" x2="{lx0 + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(
            f'<text x="{lx0 + 26}" y="{ly + 4}" font-family="sans-serif" font-size="10">{escape(label)}</text>'
        )
    note = "band omitted: one trial, SE undefined" if no_band else "shaded: mean +/- 2 SE"
    parts.append(
        f'<text x="{LEFT + plot_w + 12}" y="{TOP + 14 + 18 * len(series)}" font-family="sans-serif" '
        f'font-size="10" font-style="italic">{note}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(surface: RiskSurface, axis, out, title: str | None = None):
    text = render_plot(surface, axis, title)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return out
