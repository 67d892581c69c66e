"""Minimal self-contained SVG line and scatter plots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#17becf")


@dataclass
class Series:
    xs: list
    ys: list
    label: str = ""
    color: str | None = None
    markers: bool = False
    line: bool = True


@dataclass
class Plot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    width: int = 640
    height: int = 480
    series: list = field(default_factory=list)
    equal_aspect: bool = False
    xlim: tuple | None = None
    ylim: tuple | None = None

    def add(self, xs, ys, label="", **kw) -> "Plot":
        self.series.append(Series(list(xs), list(ys), label, **kw))
        return self

    def render(self) -> str:
        return render(self)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())


def _ticks(lo: float, hi: float, n: int = 6) -> list:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * step:
        out.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return out


def _finite(v) -> bool:
    return isinstance(v, (int, float)) and math.isfinite(v)


def _limits(plot: Plot):
    xs = [x for s in plot.series for x in s.xs if _finite(x)]
    ys = [y for s in plot.series for y in s.ys if _finite(y)]
    x0, x1 = plot.xlim or ((min(xs), max(xs)) if xs else (0.0, 1.0))
    y0, y1 = plot.ylim or ((min(ys), max(ys)) if ys else (0.0, 1.0))
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    if not plot.xlim:
        pad = 0.04 * (x1 - x0)
        x0, x1 = x0 - pad, x1 + pad
    if not plot.ylim:
        pad = 0.04 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad
    return x0, x1, y0, y1


def render(plot: Plot) -> str:
    W, H = plot.width, plot.height
    ml, mr, mt, mb = 70, 20, 40, 55
    pw, ph = W - ml - mr, H - mt - mb
    x0, x1, y0, y1 = _limits(plot)
    if plot.equal_aspect:
        sx, sy = pw / (x1 - x0), ph / (y1 - y0)
        s = min(sx, sy)
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        x0, x1 = cx - pw / (2 * s), cx + pw / (2 * s)
        y0, y1 = cy - ph / (2 * s), cy + ph / (2 * s)

    def X(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def Y(y):
        return mt + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<defs><clipPath id="plotarea"><rect x="{ml}" y="{mt}" width="{pw}" '
        f'height="{ph}"/></clipPath></defs>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{X(t):.2f}" y1="{mt}" x2="{X(t):.2f}" y2="{mt + ph}" '
                   'stroke="#eee"/>')
        out.append(f'<text x="{X(t):.2f}" y="{mt + ph + 16}" text-anchor="middle">'
                   f'{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{ml}" y1="{Y(t):.2f}" x2="{ml + pw}" y2="{Y(t):.2f}" '
                   'stroke="#eee"/>')
        out.append(f'<text x="{ml - 6}" y="{Y(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
               'stroke="black"/>')
    out.append('<g clip-path="url(#plotarea)">')
    for i, s in enumerate(plot.series):
        col = s.color or PALETTE[i % len(PALETTE)]
        pts = [(X(x), Y(y)) for x, y in zip(s.xs, s.ys) if _finite(x) and _finite(y)]
        if s.line and len(pts) > 1:
            d = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{d}" fill="none" stroke="{col}" '
                       'stroke-width="1.2"/>')
        if s.markers:
            out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{col}"/>'
                       for a, b in pts)
    out.append("</g>")
    labelled = [(i, s) for i, s in enumerate(plot.series) if s.label]
    for n, (i, s) in enumerate(labelled):
        col = s.color or PALETTE[i % len(PALETTE)]
        y = mt + 14 + 16 * n
        out.append(f'<line x1="{ml + pw - 150}" y1="{y - 4}" x2="{ml + pw - 130}" '
                   f'y2="{y - 4}" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw - 125}" y="{y}">{escape(s.label)}</text>')
    if plot.title:
        out.append(f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">'
                   f'{escape(plot.title)}</text>')
    if plot.xlabel:
        out.append(f'<text x="{ml + pw / 2}" y="{H - 12}" text-anchor="middle">'
                   f'{escape(plot.xlabel)}</text>')
    if plot.ylabel:
        out.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {mt + ph / 2})">{escape(plot.ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
