"""Minimal SVG line plots, so reports need no plotting library."""
import math
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 6)
        return [float(t) for t in range(a, b + 1, step)]
    return [float(t) for t in np.linspace(lo, hi, 5)]


def _label(t, log):
    return f"1e{int(t)}" if log else f"{t:.3g}"


def line_plot(series, title, xlabel, ylabel, xlog=False, ylog=False):
    """SVG text for series = [(label, x, y), ...]; non-finite or (on log axes) nonpositive points are skipped."""
    cleaned = []
    for label, x, y in series:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if xlog:
            ok &= x > 0
        if ylog:
            ok &= y > 0
        tx = np.where(ok, np.log10(np.where(ok & (x > 0), x, 1.0)) if xlog else x, np.nan)
        ty = np.where(ok, np.log10(np.where(ok & (y > 0), y, 1.0)) if ylog else y, np.nan)
        cleaned.append((label, tx, ty))
    allx = np.concatenate([c[1] for c in cleaned]) if cleaned else np.zeros(0)
    ally = np.concatenate([c[2] for c in cleaned]) if cleaned else np.zeros(0)
    allx, ally = allx[np.isfinite(allx)], ally[np.isfinite(ally)]
    x0, x1 = (allx.min(), allx.max()) if allx.size else (0.0, 1.0)
    y0, y1 = (ally.min(), ally.max()) if ally.size else (0.0, 1.0)
    if xlog:
        x0, x1 = math.floor(x0), math.ceil(x1)
    if ylog:
        y0, y1 = math.floor(y0), math.ceil(y1)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1, xlog):
        out.append(f'<line x1="{px(t):.2f}" y1="{TOP + ph}" x2="{px(t):.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{TOP + ph + 18}" text-anchor="middle">{_label(t, xlog)}</text>')
    for t in _ticks(y0, y1, ylog):
        out.append(f'<line x1="{LEFT - 5}" y1="{py(t):.2f}" x2="{LEFT}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{_label(t, ylog)}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2})">{escape(ylabel)}</text>')
    for n, (label, tx, ty) in enumerate(cleaned):
        color = COLORS[n % len(COLORS)]
        # break the polyline at gaps
        runs, cur = [], []
        for a, b in zip(tx, ty):
            if np.isfinite(a) and np.isfinite(b):
                cur.append(f"{px(a):.2f},{py(b):.2f}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for run in runs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(run)}"/>')
            if len(tx) <= 40:
                for p in run:
                    cx, cy = p.split(",")
                    out.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>')
        ly = TOP + 16 + 16 * n
        out.append(f'<line x1="{LEFT + pw - 150}" y1="{ly - 4}" x2="{LEFT + pw - 130}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw - 125}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
