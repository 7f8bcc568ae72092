"""Dependency-free SVG output: training curves with 95% bands and CKA heatmaps."""
from __future__ import annotations

import html
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..agents import records_from_csv
from ..similarity import SimilarityHeatmap

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass
class Curve:
    steps: np.ndarray
    mean: np.ndarray
    half_width: np.ndarray


def mean_band(series: Sequence[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    """Mean across seeds and the 1.96 * stderr half-width (0 for a single seed)."""
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected one equal-length series per seed")
    mean = arr.mean(axis=0)
    if arr.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, 1.96 * arr.std(axis=0, ddof=1) / np.sqrt(arr.shape[0])


def load_curve(paths: Sequence[str | Path]) -> Curve:
    runs = []
    for path in paths:
        try:
            runs.append(records_from_csv(Path(path).read_text()))
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None
    steps = np.array([r.step for r in runs[0]])
    for path, recs in zip(paths, runs):
        if [r.step for r in recs] != list(steps):
            raise ValueError(f"{path}: evaluation steps differ from {paths[0]}")
    mean, half = mean_band([[r.return_mean for r in recs] for recs in runs])
    return Curve(steps, mean, half)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def curves_svg(curves: Mapping[str, Curve], title: str = "", width: int = 640, height: int = 400,
               ylabel: str = "return") -> str:
    pad_l, pad_r, pad_t, pad_b = 60, 150, 30, 40
    xs = np.concatenate([c.steps for c in curves.values()])
    lo = min(float(np.min(c.mean - c.half_width)) for c in curves.values())
    hi = max(float(np.max(c.mean + c.half_width)) for c in curves.values())
    if hi == lo:
        hi, lo = hi + 1.0, lo - 1.0
    x0, x1 = float(xs.min()), float(xs.max())
    if x1 == x0:
        x1 = x0 + 1.0
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def sx(v):
        return pad_l + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return pad_t + (hi - v) / (hi - lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" font-size="14">{html.escape(title)}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>',
        f'<text x="{pad_l + pw / 2:.0f}" y="{height - 8}" text-anchor="middle" font-size="12">step</text>',
        f'<text x="14" y="{pad_t + ph / 2:.0f}" font-size="12" transform="rotate(-90 14 {pad_t + ph / 2:.0f})" '
        f'text-anchor="middle">{html.escape(ylabel)}</text>',
    ]
    for v in np.linspace(lo, hi, 5):
        parts.append(f'<text x="{pad_l - 6}" y="{_fmt(sy(v) + 4)}" text-anchor="end" font-size="10">{v:.3g}</text>')
    for v in np.linspace(x0, x1, 5):
        parts.append(f'<text x="{_fmt(sx(v))}" y="{pad_t + ph + 14}" text-anchor="middle" font-size="10">{v:.3g}</text>')
    for k, (label, c) in enumerate(curves.items()):
        color = PALETTE[k % len(PALETTE)]
        upper = [f"{_fmt(sx(x))},{_fmt(sy(m + h))}" for x, m, h in zip(c.steps, c.mean, c.half_width)]
        lower = [f"{_fmt(sx(x))},{_fmt(sy(m - h))}" for x, m, h in zip(c.steps, c.mean, c.half_width)]
        parts.append(f'<polygon class="band" points="{" ".join(upper + lower[::-1])}" '
                     f'fill="{color}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{_fmt(sx(x))},{_fmt(sy(m))}" for x, m in zip(c.steps, c.mean))
        parts.append(f'<polyline class="mean" points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = pad_t + 14 * k + 10
        parts.append(f'<line x1="{pad_l + pw + 10}" y1="{ly}" x2="{pad_l + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{pad_l + pw + 34}" y="{ly + 4}" font-size="11">{html.escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _color(v: float) -> str:
    if np.isnan(v):
        return "#dddddd"
    v = min(max(v, 0.0), 1.0)
    # white -> dark blue
    r = int(round(255 - v * (255 - 8)))
    g = int(round(255 - v * (255 - 48)))
    b = int(round(255 - v * (255 - 107)))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(hm: SimilarityHeatmap, title: str = "", cell: int = 40) -> str:
    rows, cols = hm.values.shape
    pad_l, pad_t = 60, 30
    width = pad_l + cols * cell + 10
    height = pad_t + rows * cell + 40
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" font-size="13">{html.escape(title)}</text>',
    ]
    # rows drawn bottom-up so corresponding layers form the rising diagonal
    for r in range(rows):
        y = pad_t + (rows - 1 - r) * cell
        parts.append(f'<text x="{pad_l - 6}" y="{y + cell / 2 + 4:.0f}" text-anchor="end" font-size="10">'
                     f'{html.escape(hm.row_labels[r])}</text>')
        for c in range(cols):
            v = float(hm.values[r, c])
            x = pad_l + c * cell
            txt = "" if np.isnan(v) else f"{v:.2f}"
            parts.append(f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_color(v)}">'
                         f'<title>{html.escape(hm.row_labels[r])} vs {html.escape(hm.col_labels[c])}: {txt or "undefined"}</title></rect>')
            fg = "white" if not np.isnan(v) and v > 0.6 else "black"
            parts.append(f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" text-anchor="middle" '
                         f'font-size="9" fill="{fg}">{txt}</text>')
    for c in range(cols):
        parts.append(f'<text x="{pad_l + c * cell + cell / 2:.0f}" y="{pad_t + rows * cell + 14}" '
                     f'text-anchor="middle" font-size="10">{html.escape(hm.col_labels[c])}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
