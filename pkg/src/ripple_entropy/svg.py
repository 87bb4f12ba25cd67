"""Minimal SVG line plots and heatmaps (CSV files remain the canonical output)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#e6a700", "#2ca02c", "#9467bd")


@dataclass
class LinePanel:
    title: str
    xlabel: str = ""
    ylabel: str = ""
    series: list = field(default_factory=list)  # (x, y, color, label)
    circles: list = field(default_factory=list)

    def add(self, x, y, color: str | None = None, label: str = "") -> "LinePanel":
        self.series.append((np.asarray(x, float), np.asarray(y, float), color or PALETTE[len(self.series) % 5], label))
        return self


@dataclass
class HeatmapPanel:
    title: str
    values: np.ndarray  # (n_cols along x, n_rows along y)
    extent: tuple[float, float, float, float]
    xlabel: str = ""
    ylabel: str = ""
    circle: tuple[float, float, float] | None = None  # (cx, cy, r) in data units


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _color(v: float) -> str:
    """White to dark blue ramp for v in [0, 1]."""
    v = min(max(v, 0.0), 1.0)
    r = int(255 * (1 - v) + 8 * v)
    g = int(255 * (1 - v) + 48 * v)
    b = int(255 * (1 - v) + 107 * v)
    return f"#{r:02x}{g:02x}{b:02x}"


def _frame(out, x0, y0, w, h, title, xlabel, ylabel, xr, yr):
    out.append(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#000"/>')
    out.append(f'<text x="{x0 + w / 2}" y="{y0 - 8}" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<text x="{x0 + w / 2}" y="{y0 + h + 34}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>')
    out.append(f'<text x="{x0 - 42}" y="{y0 + h / 2}" text-anchor="middle" font-size="11" '
               f'transform="rotate(-90 {x0 - 42} {y0 + h / 2})">{escape(ylabel)}</text>')
    for t in _ticks(*xr):
        px = x0 + (t - xr[0]) / (xr[1] - xr[0]) * w
        out.append(f'<line x1="{px:.1f}" y1="{y0 + h}" x2="{px:.1f}" y2="{y0 + h + 4}" stroke="#000"/>')
        out.append(f'<text x="{px:.1f}" y="{y0 + h + 16}" text-anchor="middle" font-size="10">{t:g}</text>')
    for t in _ticks(*yr):
        py = y0 + h - (t - yr[0]) / (yr[1] - yr[0]) * h
        out.append(f'<line x1="{x0 - 4}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="#000"/>')
        out.append(f'<text x="{x0 - 6}" y="{py + 3:.1f}" text-anchor="end" font-size="10">{t:g}</text>')


def _line(out, p: LinePanel, x0, y0, w, h):
    xs = np.concatenate([s[0] for s in p.series]) if p.series else np.array([0.0, 1.0])
    ys = np.concatenate([s[1] for s in p.series]) if p.series else np.array([0.0, 1.0])
    ys = ys[np.isfinite(ys)]
    xr = (float(xs.min()), float(xs.max()) if xs.max() > xs.min() else float(xs.min()) + 1.0)
    pad = 0.05 * (ys.max() - ys.min() if ys.size and ys.max() > ys.min() else 1.0)
    yr = (float(ys.min()) - pad, float(ys.max()) + pad) if ys.size else (0.0, 1.0)
    _frame(out, x0, y0, w, h, p.title, p.xlabel, p.ylabel, xr, yr)
    for i, (x, y, color, label) in enumerate(p.series):
        ok = np.isfinite(y)
        px = x0 + (x[ok] - xr[0]) / (xr[1] - xr[0]) * w
        py = y0 + h - (y[ok] - yr[0]) / (yr[1] - yr[0]) * h
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>')
        if len(x) < 12:
            for a, b in zip(px, py):
                out.append(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="2.5" fill="{color}"/>')
        if label:
            out.append(f'<text x="{x0 + w - 4}" y="{y0 + 14 + 13 * i}" text-anchor="end" font-size="10" '
                       f'fill="{color}">{escape(label)}</text>')


def _heat(out, p: HeatmapPanel, x0, y0, w, h):
    v = np.asarray(p.values, float)
    top = v.max() if v.size and v.max() > 0 else 1.0
    nx, ny = v.shape
    ex = p.extent
    _frame(out, x0, y0, w, h, p.title, p.xlabel, p.ylabel, (ex[0], ex[1]), (ex[2], ex[3]))
    cw, ch = w / nx, h / ny
    for i in range(nx):
        for j in range(ny):
            out.append(f'<rect x="{x0 + i * cw:.2f}" y="{y0 + h - (j + 1) * ch:.2f}" width="{cw + 0.05:.2f}" '
                       f'height="{ch + 0.05:.2f}" fill="{_color(v[i, j] / top)}"/>')
    if p.circle is not None:
        cx, cy, r = p.circle
        sx, sy = w / (ex[1] - ex[0]), h / (ex[3] - ex[2])
        out.append(f'<ellipse cx="{x0 + (cx - ex[0]) * sx:.1f}" cy="{y0 + h - (cy - ex[2]) * sy:.1f}" '
                   f'rx="{r * sx:.1f}" ry="{r * sy:.1f}" fill="none" stroke="#d62728" stroke-width="1.5"/>')


def render(panels, path, cols: int = 2, panel_size: tuple[int, int] = (360, 240)) -> None:
    """Write a grid of panels to ``path``."""
    w, h = panel_size
    ml, mt, gx, gy = 60, 30, 80, 70
    rows = math.ceil(len(panels) / cols)
    width = ml + cols * (w + gx)
    height = mt + rows * (h + gy)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif"><rect width="100%" height="100%" fill="#fff"/>']
    for k, p in enumerate(panels):
        x0 = ml + (k % cols) * (w + gx)
        y0 = mt + (k // cols) * (h + gy)
        if isinstance(p, HeatmapPanel):
            _heat(out, p, x0, y0, w, h)
        else:
            _line(out, p, x0, y0, w, h)
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def downsample(values: np.ndarray, max_cells: int = 90) -> np.ndarray:
    """Block-average a 2D array so neither side exceeds ``max_cells``."""
    v = np.asarray(values, float)
    fx = max(1, math.ceil(v.shape[0] / max_cells))
    fy = max(1, math.ceil(v.shape[1] / max_cells))
    nx, ny = v.shape[0] // fx, v.shape[1] // fy
    return v[: nx * fx, : ny * fy].reshape(nx, fx, ny, fy).mean(axis=(1, 3))
