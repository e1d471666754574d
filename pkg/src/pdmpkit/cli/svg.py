"""Minimal SVG line plots: axes, ticks, polylines and shaded time bands."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    color: str = PALETTE[0]
    width: float = 1.0
    opacity: float = 1.0
    label: str | None = None


@dataclass
class Plot:
    title: str = ""
    xlabel: str = "t"
    ylabel: str = "X"
    logy: bool = False
    width: int = 720
    height: int = 420
    series: list[Series] = field(default_factory=list)
    bands: list[tuple[float, float]] = field(default_factory=list)
    band_label: str | None = None

    def line(self, x, y, **kw) -> None:
        self.series.append(Series(np.asarray(x, float), np.asarray(y, float), **kw))

    def to_svg(self) -> str:
        return _render(self)

    def save(self, path) -> None:
        Path(path).write_text(self.to_svg())


def nice_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if not hi > lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e5 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:.6g}"


def _render(p: Plot) -> str:
    ml, mr, mt, mb = 70, 20, 36, 50
    w, h = p.width - ml - mr, p.height - mt - mb
    xs = np.concatenate([s.x for s in p.series]) if p.series else np.array([0.0, 1.0])
    ys = np.concatenate([s.y for s in p.series]) if p.series else np.array([0.0, 1.0])
    if p.logy:
        ys = ys[ys > 0]
        ys = np.log10(ys) if ys.size else np.array([0.0, 1.0])
    ys = ys[np.isfinite(ys)]
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if p.logy:
        y0, y1 = math.floor(y0), math.ceil(y1)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0
    if not p.logy:
        pad = 0.05 * (y1 - y0)
        y0, y1 = (y0 - pad if y0 < 0 else max(0.0, y0 - pad)), y1 + pad

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * w

    def sy(v):
        return mt + h - (v - y0) / (y1 - y0) * h

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{p.width}" height="{p.height}" '
           f'viewBox="0 0 {p.width} {p.height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{p.width}" height="{p.height}" fill="white"/>']
    for a, b in p.bands:
        a, b = max(a, x0), min(b, x1)
        if b > a:
            out.append(f'<rect x="{sx(a):.2f}" y="{mt}" width="{sx(b) - sx(a):.2f}" height="{h}" '
                       f'fill="#bbbbbb" fill-opacity="0.25" stroke="none"/>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{w}" height="{h}" fill="none" stroke="black"/>')
    for t in nice_ticks(x0, x1):
        X = sx(t)
        out.append(f'<line x1="{X:.2f}" y1="{mt + h}" x2="{X:.2f}" y2="{mt + h + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{mt + h + 18}" text-anchor="middle">{_fmt(t)}</text>')
    yt = range(int(y0), int(y1) + 1) if p.logy else nice_ticks(y0, y1)
    for t in yt:
        Y = sy(t)
        label = f"1e{int(t)}" if p.logy else _fmt(t)
        out.append(f'<line x1="{ml - 5}" y1="{Y:.2f}" x2="{ml}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{Y + 4:.2f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{ml + w / 2}" y="{p.height - 12}" text-anchor="middle">{p.xlabel}</text>')
    out.append(f'<text x="16" y="{mt + h / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + h / 2})">{p.ylabel}</text>')
    if p.title:
        out.append(f'<text x="{ml + w / 2}" y="22" text-anchor="middle" font-size="14">{p.title}</text>')
    out.append(f'<clipPath id="frame"><rect x="{ml}" y="{mt}" width="{w}" height="{h}"/></clipPath>')
    for s in p.series:
        y = s.y
        if p.logy:
            with np.errstate(divide="ignore"):
                y = np.log10(np.where(y > 0, y, np.nan))
        keep = np.isfinite(s.x) & np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(s.x[keep], y[keep]))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{s.color}" stroke-width="{s.width}" '
                   f'stroke-opacity="{s.opacity}" clip-path="url(#frame)"/>')
    legend = [s for s in p.series if s.label]
    if p.band_label and p.bands:
        legend_items = [(lab.label, lab.color) for lab in legend] + [(p.band_label, "#bbbbbb")]
    else:
        legend_items = [(lab.label, lab.color) for lab in legend]
    for i, (label, color) in enumerate(legend_items):
        y = mt + 14 + 16 * i
        out.append(f'<rect x="{ml + w - 130}" y="{y - 9}" width="12" height="10" fill="{color}"/>')
        out.append(f'<text x="{ml + w - 112}" y="{y}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
