"""Minimal SVG emitters for the study plots: log-log polylines with
reference slopes, shift sweeps, eigenvalue-vs-refinement charts (negatives in
red) and per-cell raster heatmaps.  No plotting library involved."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["line_plot_svg", "heatmap_svg"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 30, 50


def _ticks_log(lo, hi):
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    return [10.0**e for e in range(lo_e, hi_e + 1)]


def _ticks_lin(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= n:
            step *= mult
            break
    t0 = math.ceil(lo / step) * step
    out = []
    while t0 <= hi + 1e-12 * step:
        out.append(t0)
        t0 += step
    return out


class _Axes:
    def __init__(self, xlim, ylim, xlog, ylog):
        self.xlog, self.ylog = xlog, ylog
        self.xlim = tuple(math.log10(v) for v in xlim) if xlog else xlim
        self.ylim = tuple(math.log10(v) for v in ylim) if ylog else ylim

    def px(self, x):
        if self.xlog:
            x = math.log10(x)
        lo, hi = self.xlim
        return _ML + (x - lo) / (hi - lo or 1.0) * (_W - _ML - _MR)

    def py(self, y):
        if self.ylog:
            y = math.log10(y)
        lo, hi = self.ylim
        return _H - _MB - (y - lo) / (hi - lo or 1.0) * (_H - _MT - _MB)


def _fmt(v):
    return f"{v:.4g}"


def line_plot_svg(
    series,
    xlabel="",
    ylabel="",
    title="",
    xlog=False,
    ylog=False,
    ref_slopes=(),
    point_colors=None,
):
    """Polyline plot.

    ``series`` is a list of (label, xs, ys).  ``ref_slopes`` draws dashed
    x^q reference lines anchored at the last point of the first series.
    ``point_colors`` (parallel to series) optionally colors individual
    markers, e.g. red for negative eigenvalues plotted as magnitudes.
    """
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys if y > 0 or not ylog]
    if not xs_all or not ys_all:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}"></svg>'
    xlim = (min(xs_all), max(xs_all))
    ylim = (min(ys_all), max(ys_all))
    if xlim[0] == xlim[1]:
        xlim = (xlim[0] * 0.9 if xlog else xlim[0] - 1, xlim[1] * 1.1 if xlog else xlim[1] + 1)
    if ylim[0] == ylim[1]:
        ylim = (ylim[0] * 0.9 if ylog else ylim[0] - 1, ylim[1] * 1.1 if ylog else ylim[1] + 1)
    ax = _Axes(xlim, ylim, xlog, ylog)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        'font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>',
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
        'fill="none" stroke="black"/>',
    ]
    xticks = _ticks_log(*xlim) if xlog else _ticks_lin(*xlim)
    for t in xticks:
        if (xlim[0] if not xlog else 10 ** ax.xlim[0]) <= t <= (
            xlim[1] if not xlog else 10 ** ax.xlim[1]
        ):
            px = ax.px(t)
            parts.append(
                f'<line x1="{px:.1f}" y1="{_MT}" x2="{px:.1f}" y2="{_H - _MB}" '
                'stroke="#ddd"/>'
            )
            parts.append(
                f'<text x="{px:.1f}" y="{_H - _MB + 16}" text-anchor="middle">{_fmt(t)}</text>'
            )
    yticks = _ticks_log(*ylim) if ylog else _ticks_lin(*ylim)
    for t in yticks:
        if (ylim[0] if not ylog else 10 ** ax.ylim[0]) <= t <= (
            ylim[1] if not ylog else 10 ** ax.ylim[1]
        ):
            py = ax.py(t)
            parts.append(
                f'<line x1="{_ML}" y1="{py:.1f}" x2="{_W - _MR}" y2="{py:.1f}" stroke="#ddd"/>'
            )
            parts.append(
                f'<text x="{_ML - 6}" y="{py + 4:.1f}" text-anchor="end">{_fmt(t)}</text>'
            )

    for q in ref_slopes:
        _, xs, ys = series[0]
        x1, y1 = xs[-1], ys[-1]
        x0 = xs[0]
        y0 = y1 * (x0 / x1) ** q
        parts.append(
            f'<line x1="{ax.px(x0):.1f}" y1="{ax.py(y0):.1f}" x2="{ax.px(x1):.1f}" '
            f'y2="{ax.py(y1):.1f}" stroke="#999" stroke-dasharray="6 4"/>'
        )
        parts.append(
            f'<text x="{ax.px(x0) + 6:.1f}" y="{ax.py(y0) - 4:.1f}" fill="#666">slope {q:g}</text>'
        )

    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = [
            (ax.px(x), ax.py(y))
            for x, y in zip(xs, ys)
            if (y > 0 or not ylog) and math.isfinite(y)
        ]
        if len(pts) > 1:
            d = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
            parts.append(f'<polyline points="{d}" fill="none" stroke="{color}"/>')
        colors = point_colors[i] if point_colors else [color] * len(xs)
        for (x, y), cc in zip(zip(xs, ys), colors):
            if (y <= 0 and ylog) or not math.isfinite(y):
                continue
            parts.append(f'<circle cx="{ax.px(x):.1f}" cy="{ax.py(y):.1f}" r="3" fill="{cc}"/>')
        parts.append(
            f'<text x="{_W - _MR - 8}" y="{_MT + 16 + 14 * i}" text-anchor="end" '
            f'fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def _color_of(v):
    """Blue -> white -> red diverging map on [0, 1]."""
    v = min(max(v, 0.0), 1.0)
    if v < 0.5:
        s = v / 0.5
        r, g, b = 59 + s * (255 - 59), 76 + s * (255 - 76), 192 + s * (255 - 192)
    else:
        s = (v - 0.5) / 0.5
        r, g, b = 255 - s * (255 - 180), 255 - s * (255 - 4), 255 - s * (255 - 38)
    return f"rgb({int(r)},{int(g)},{int(b)})"


def heatmap_svg(values, extent, mask=None, title=""):
    """Per-cell rectangle heatmap of a 2D array.

    ``values`` indexed [ix, iy]; ``extent`` is (x0, x1, y0, y1); masked cells
    are left white.
    """
    values = np.asarray(values, dtype=float)
    nx, ny = values.shape
    if mask is None:
        mask = np.isfinite(values)
    vis = values[mask]
    lo, hi = (float(vis.min()), float(vis.max())) if vis.size else (0.0, 1.0)
    span = hi - lo or 1.0
    x0, x1, y0, y1 = extent
    W = 560
    Hpix = int(W * (y1 - y0) / (x1 - x0)) if x1 > x0 else W
    cw, ch = W / nx, Hpix / ny
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{Hpix + 30}" '
        'font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{Hpix + 30}" fill="white"/>',
        f'<text x="{W / 2}" y="{Hpix + 22}" text-anchor="middle">{title} '
        f"[{_fmt(lo)}, {_fmt(hi)}]</text>",
    ]
    for ix in range(nx):
        for iy in range(ny):
            if not mask[ix, iy]:
                continue
            c = _color_of((values[ix, iy] - lo) / span)
            px = ix * cw
            py = Hpix - (iy + 1) * ch
            parts.append(
                f'<rect x="{px:.1f}" y="{py:.1f}" width="{cw + 0.5:.1f}" '
                f'height="{ch + 0.5:.1f}" fill="{c}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts)
