"""Minimal SVG charts: scatter and line-with-band. No plotting library needed."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")

WIDTH, HEIGHT = 480, 360
MARGIN = (56, 20, 24, 44)  # left, right, top, bottom


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + step * 1e-9, step)


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    band: np.ndarray | None = None  # half-width around y
    style: str = "line"  # line | points


@dataclass
class Chart:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list[Series] = field(default_factory=list)
    diagonal: bool = False  # draw y = x, for predicted-vs-true plots

    def add(self, x, y, label="", band=None, style="line") -> "Chart":
        self.series.append(Series(np.asarray(x, float), np.asarray(y, float), label,
                                  None if band is None else np.asarray(band, float), style))
        return self

    def _limits(self):
        xs = np.concatenate([s.x for s in self.series]) if self.series else np.zeros(1)
        ys = [s.y for s in self.series] + [s.y + s.band for s in self.series if s.band is not None] \
            + [s.y - s.band for s in self.series if s.band is not None]
        ys = np.concatenate(ys) if ys else np.zeros(1)
        x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
        if self.diagonal:
            x0 = y0 = min(x0, y0)
            x1 = y1 = max(x1, y1)
        pad = lambda a, b: (a - 0.5, b + 0.5) if b - a < 1e-12 else (a - 0.05 * (b - a), b + 0.05 * (b - a))
        return (*pad(x0, x1), *pad(y0, y1))

    def render(self) -> str:
        left, right, top, bottom = MARGIN
        pw, ph = WIDTH - left - right, HEIGHT - top - bottom
        x0, x1, y0, y1 = self._limits()
        sx = lambda v: left + (v - x0) / (x1 - x0) * pw
        sy = lambda v: top + ph - (v - y0) / (y1 - y0) * ph
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
               f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
               f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
               f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
        for t in _ticks(x0, x1):
            out.append(f'<line x1="{_fmt(sx(t))}" y1="{top + ph}" x2="{_fmt(sx(t))}" y2="{top + ph + 4}" stroke="#444"/>')
            out.append(f'<text x="{_fmt(sx(t))}" y="{top + ph + 16}" text-anchor="middle">{t:g}</text>')
        for t in _ticks(y0, y1):
            out.append(f'<line x1="{left - 4}" y1="{_fmt(sy(t))}" x2="{left}" y2="{_fmt(sy(t))}" stroke="#444"/>')
            out.append(f'<text x="{left - 6}" y="{_fmt(sy(t) + 4)}" text-anchor="end">{t:g}</text>')
        if self.diagonal:
            lo, hi = max(x0, y0), min(x1, y1)
            out.append(f'<line x1="{_fmt(sx(lo))}" y1="{_fmt(sy(lo))}" x2="{_fmt(sx(hi))}" y2="{_fmt(sy(hi))}" '
                       'stroke="#999" stroke-dasharray="4 3"/>')
        for i, s in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            if s.band is not None and len(s.x):
                upper = [f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(s.x, s.y + s.band)]
                lower = [f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(s.x[::-1], (s.y - s.band)[::-1])]
                out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
            if s.style == "points":
                for a, b in zip(s.x, s.y):
                    out.append(f'<circle cx="{_fmt(sx(a))}" cy="{_fmt(sy(b))}" r="2.5" fill="{color}" fill-opacity="0.7"/>')
            else:
                pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(s.x, s.y))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            if s.label:
                ly = top + 14 + 14 * i
                out.append(f'<rect x="{left + pw - 110}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
                out.append(f'<text x="{left + pw - 96}" y="{ly + 1}">{escape(s.label)}</text>')
        out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 8}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + ph / 2})">{escape(self.ylabel)}</text>')
        if self.title:
            out.append(f'<text x="{left + pw / 2}" y="{top - 8}" text-anchor="middle" font-size="12">'
                       f'{escape(self.title)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())
