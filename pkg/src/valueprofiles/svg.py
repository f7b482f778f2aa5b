"""Minimal static SVG charts: line plots with error bands and grouped bars."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 64, 140, 40, 52


@dataclass
class Line:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    se: Sequence[float] | None = None


def _f(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n)


def _frame(title: str, xlabel: str, ylabel: str, xlim, ylim) -> tuple[list[str], callable, callable]:
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM
    (x0, x1), (y0, y1) = xlim, ylim
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{LEFT + pw / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {TOP + ph / 2})">{escape(ylabel)}</text>',
    ]
    for v in _ticks(y0, y1):
        out.append(f'<text x="{LEFT - 6}" y="{_f(sy(v) + 4)}" text-anchor="end">{v:.3g}</text>')
    return out, sx, sy


def _legend(labels: Sequence[str]) -> list[str]:
    out = []
    for i, label in enumerate(labels):
        y = TOP + 16 * i + 8
        c = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{W - RIGHT + 12}" y="{y - 8}" width="12" height="8" fill="{c}"/>')
        out.append(f'<text x="{W - RIGHT + 30}" y="{y}">{escape(label)}</text>')
    return out


def line_plot(
    lines: Sequence[Line],
    title: str,
    xlabel: str,
    ylabel: str,
    vlines: Sequence[float] = (),
    ylim: tuple[float, float] | None = None,
) -> str:
    xs = np.concatenate([np.asarray(l.x, dtype=float) for l in lines])
    if ylim is None:
        parts = []
        for l in lines:
            y = np.asarray(l.y, dtype=float)
            se = np.nan_to_num(np.asarray(l.se, dtype=float)) if l.se is not None else 0.0
            parts += [y - se, y + se]
        ys = np.concatenate(parts)
        ys = ys[np.isfinite(ys)]
        ylim = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    out, sx, sy = _frame(title, xlabel, ylabel, (xs.min(), xs.max()), ylim)
    for v in _ticks(xs.min(), xs.max()):
        out.append(f'<text x="{_f(sx(v))}" y="{H - BOTTOM + 16}" text-anchor="middle">{v:.3g}</text>')
    for v in vlines:
        out.append(
            f'<line x1="{_f(sx(v))}" x2="{_f(sx(v))}" y1="{TOP}" y2="{H - BOTTOM}" stroke="gray" stroke-dasharray="4 3"/>'
        )
    for i, l in enumerate(lines):
        c = PALETTE[i % len(PALETTE)]
        x, y = np.asarray(l.x, dtype=float), np.asarray(l.y, dtype=float)
        if l.se is not None:
            se = np.nan_to_num(np.asarray(l.se, dtype=float))
            band = [f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(x, y + se)]
            band += [f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(x[::-1], (y - se)[::-1])]
            out.append(f'<polygon points="{" ".join(band)}" fill="{c}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
    out += _legend([l.label for l in lines])
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_plot(groups: Sequence[str], series: dict[str, Sequence[float]], title: str, ylabel: str) -> str:
    values = np.array([v for v in series.values()], dtype=float)
    top = float(np.nanmax(values)) if np.isfinite(values).any() else 1.0
    out, sx, sy = _frame(title, "", ylabel, (0.0, float(len(groups))), (0.0, top * 1.1 or 1.0))
    k = len(series)
    width = 0.8 / max(k, 1)
    for g, name in enumerate(groups):
        out.append(f'<text x="{_f(sx(g + 0.5))}" y="{H - BOTTOM + 16}" text-anchor="middle">{escape(name)}</text>')
    for i, (label, vals) in enumerate(series.items()):
        c = PALETTE[i % len(PALETTE)]
        for g, v in enumerate(vals):
            if not np.isfinite(v):
                continue
            x = sx(g + 0.1 + i * width)
            out.append(
                f'<rect x="{_f(x)}" y="{_f(sy(v))}" width="{_f(sx(width) - sx(0))}" '
                f'height="{_f(sy(0) - sy(v))}" fill="{c}"/>'
            )
    out += _legend(list(series))
    out.append("</svg>")
    return "\n".join(out) + "\n"
