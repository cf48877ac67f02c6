"""Dependency-free, byte-deterministic SVG line charts."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .spectral import Spectrum
from .trace import PowerTrace

WIDTH, HEIGHT = 860, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 90, 40, 60
MAX_POINTS = 2000
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str
    axis: str = "left"


def trace_series(trace: PowerTrace, label: str, axis: str = "left") -> Series:
    return Series(trace.times, trace.samples, label, axis)


def spectrum_series(spectrum: Spectrum, label: str) -> Series:
    return Series(spectrum.freqs_hz, spectrum.magnitudes, label)


def _decimate(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Keep min and max of each bucket so spikes survive downsampling."""
    n = x.size
    if n <= MAX_POINTS:
        return x, y
    buckets = MAX_POINTS // 2
    edges = np.linspace(0, n, buckets + 1).astype(int)
    keep = []
    for a, b in zip(edges[:-1], edges[1:]):
        seg = y[a:b]
        i, j = a + int(np.argmin(seg)), a + int(np.argmax(seg))
        keep.extend(sorted({i, j}))
    idx = np.asarray(keep)
    return x[idx], y[idx]


def _limits(arrays: Sequence[np.ndarray]) -> tuple[float, float]:
    lo = min(float(np.min(a)) for a in arrays)
    hi = max(float(np.max(a)) for a in arrays)
    if hi == lo:
        pad = abs(hi) * 0.05 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(series: Sequence[Series], title: str = "", x_label: str = "time (s)",
               y_label: str = "power (W)", y2_label: str | None = None) -> str:
    if not series:
        raise ValueError("need at least one series to plot")
    for s in series:
        if len(s.x) == 0 or len(s.x) != len(s.y):
            raise ValueError(f"series {s.label!r} is empty or has mismatched x/y")
        if s.axis not in ("left", "right"):
            raise ValueError(f"axis must be 'left' or 'right', got {s.axis!r}")
    left = [s for s in series if s.axis == "left"]
    right = [s for s in series if s.axis == "right"]
    if not left:
        raise ValueError("at least one series must use the left axis")

    x0, x1 = _limits([s.x for s in series])
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - x0) / (x1 - x0) * pw

    def make_sy(lo, hi):
        return lambda v: MARGIN_T + ph - (v - lo) / (hi - lo) * ph

    yl = _limits([s.y for s in left])
    sy_left = make_sy(*yl)
    yr = _limits([s.y for s in right]) if right else None
    sy_right = make_sy(*yr) if yr else None

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')

    out.append(f'<g class="axis" id="x-axis"><line x1="{MARGIN_L}" y1="{MARGIN_T + ph}" '
               f'x2="{MARGIN_L + pw}" y2="{MARGIN_T + ph}" stroke="black"/>')
    for v in np.linspace(x0, x1, 6):
        px = sx(v)
        out.append(f'<line x1="{_fmt(px)}" y1="{MARGIN_T + ph}" x2="{_fmt(px)}" y2="{MARGIN_T + ph + 5}" stroke="black"/>'
                   f'<text x="{_fmt(px)}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{v:.4g}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(x_label)}</text></g>')

    def y_axis(axis_id, xpos, lims, sy, label, side):
        tick = -5 if side == "left" else 5
        anchor = "end" if side == "left" else "start"
        parts = [f'<g class="axis" id="{axis_id}"><line x1="{xpos}" y1="{MARGIN_T}" x2="{xpos}" '
                 f'y2="{MARGIN_T + ph}" stroke="black"/>']
        for v in np.linspace(lims[0], lims[1], 6):
            py = sy(v)
            parts.append(f'<line x1="{xpos}" y1="{_fmt(py)}" x2="{xpos + tick}" y2="{_fmt(py)}" stroke="black"/>'
                         f'<text x="{xpos + 2 * tick}" y="{_fmt(py + 4)}" text-anchor="{anchor}">{v:.4g}</text>')
        lx = 18 if side == "left" else WIDTH - 12
        parts.append(f'<text x="{lx}" y="{MARGIN_T + ph / 2:.2f}" text-anchor="middle" '
                     f'transform="rotate(-90 {lx} {MARGIN_T + ph / 2:.2f})">{escape(label)}</text></g>')
        return parts

    out += y_axis("y-axis-left", MARGIN_L, yl, sy_left, y_label, "left")
    if right:
        out += y_axis("y-axis-right", MARGIN_L + pw, yr, sy_right, y2_label or "", "right")

    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        sy = sy_left if s.axis == "left" else sy_right
        x, y = _decimate(np.asarray(s.x, float), np.asarray(s.y, float))
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x.tolist(), y.tolist()))
        out.append(f'<polyline class="series" data-label="{escape(s.label, {chr(34): "&quot;"})}" '
                   f'fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')

    out.append('<g class="legend">')
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        ly = MARGIN_T + 10 + 16 * k
        suffix = " (right axis)" if s.axis == "right" else ""
        out.append(f'<line x1="{MARGIN_L + 10}" y1="{ly}" x2="{MARGIN_L + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
                   f'<text x="{MARGIN_L + 35}" y="{ly + 4}">{escape(s.label + suffix)}</text>')
    out.append("</g></svg>")
    return "\n".join(out) + "\n"


def plot_svg(series: Sequence[Series], path: str | Path, **kwargs) -> None:
    """Write a line chart of ``series`` to ``path``; see :func:`render_svg`."""
    Path(path).write_text(render_svg(series, **kwargs), encoding="utf-8", newline="\n")
