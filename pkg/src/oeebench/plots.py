"""Deterministic SVG 1.1 figures written without a plotting library."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import DomainError
from .neural import LossCurve
from .prep import iqr_fences
from .stats import ErrorSample, TukeyResult

_W, _H = 720, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 40, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick values whose span covers [lo, hi]."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError("axis limits must be finite")
    if hi < lo:
        lo, hi = hi, lo
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    stop = math.ceil(hi / step) * step
    count = int(round((stop - start) / step))
    return [round(start + i * step, 12) for i in range(count + 1)]


def _label(v: float) -> str:
    return f"{v:.6g}"


@dataclass
class _Canvas:
    title: str
    x_ticks: list[float]
    y_ticks: list[float]
    x_label: str
    y_label: str

    def __post_init__(self) -> None:
        self.parts: list[str] = []

    def x(self, v: float) -> float:
        lo, hi = self.x_ticks[0], self.x_ticks[-1]
        return _LEFT + (v - lo) / (hi - lo) * (_W - _LEFT - _RIGHT)

    def y(self, v: float) -> float:
        lo, hi = self.y_ticks[0], self.y_ticks[-1]
        return _H - _BOTTOM - (v - lo) / (hi - lo) * (_H - _TOP - _BOTTOM)

    def add(self, element: str) -> None:
        self.parts.append(element)

    def polyline(self, xs, ys, color: str, cls: str) -> None:
        pts = " ".join(f"{_f(self.x(a))},{_f(self.y(b))}" for a, b in zip(xs, ys))
        self.add(f'<polyline class="{cls}" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')

    def line(self, x1, y1, x2, y2, color="#000000", width=1.0, dash: str | None = None) -> None:
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                 f'stroke="{color}" stroke-width="{width}"{extra}/>')

    def text(self, x, y, s: str, anchor="middle", size=12, rotate: bool = False) -> None:
        rot = f' transform="rotate(-90 {_f(x)} {_f(y)})"' if rotate else ""
        self.add(f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" text-anchor="{anchor}"{rot}>'
                 f'{escape(s)}</text>')

    def legend(self, entries: Sequence[tuple[str, str]]) -> None:
        for i, (name, color) in enumerate(entries):
            y = _TOP + 8 + 16 * i
            x = _W - _RIGHT - 150
            self.line(x, y, x + 24, y, color, 2.0)
            self.text(x + 30, y + 4, name, anchor="start", size=11)

    def render(self, x_tick_labels: Sequence[str] | None = None,
               y_tick_labels: Sequence[str] | None = None) -> str:
        axes = []
        x0, x1 = _LEFT, _W - _RIGHT
        y0, y1 = _H - _BOTTOM, _TOP
        axes.append(f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="#ffffff"/>')
        axes.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="#000000"/>')
        axes.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#000000"/>')
        y_labels = y_tick_labels if y_tick_labels is not None else [_label(t) for t in self.y_ticks]
        for t, lab in zip(self.y_ticks, y_labels):
            yy = _f(self.y(t))
            axes.append(f'<line x1="{x0 - 4}" y1="{yy}" x2="{x0}" y2="{yy}" stroke="#000000"/>')
            axes.append(f'<line x1="{x0}" y1="{yy}" x2="{x1}" y2="{yy}" stroke="#e0e0e0"/>')
            axes.append(f'<text x="{x0 - 8}" y="{yy}" font-size="11" text-anchor="end" '
                        f'dominant-baseline="middle">{escape(lab)}</text>')
        labels = x_tick_labels if x_tick_labels is not None else [_label(t) for t in self.x_ticks]
        for t, lab in zip(self.x_ticks, labels):
            xx = _f(self.x(t))
            axes.append(f'<line x1="{xx}" y1="{y0}" x2="{xx}" y2="{y0 + 4}" stroke="#000000"/>')
            axes.append(f'<text x="{xx}" y="{y0 + 18}" font-size="11" text-anchor="middle">'
                        f'{escape(lab)}</text>')
        axes.append(f'<text x="{_W / 2:.2f}" y="{_H - 15}" font-size="13" text-anchor="middle">'
                    f'{escape(self.x_label)}</text>')
        cy = (_TOP + _H - _BOTTOM) / 2
        axes.append(f'<text x="18" y="{cy:.2f}" font-size="13" text-anchor="middle" '
                    f'transform="rotate(-90 18 {cy:.2f})">{escape(self.y_label)}</text>')
        axes.append(f'<text x="{_W / 2:.2f}" y="22" font-size="15" text-anchor="middle">'
                    f'{escape(self.title)}</text>')
        body = "\n".join(axes + self.parts)
        return ('<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
                f'viewBox="0 0 {_W} {_H}" font-family="sans-serif">\n{body}\n</svg>\n')


def _emit(svg: str, path) -> str:
    if path is not None:
        Path(path).write_text(svg, encoding="utf-8")
    return svg


def plot_predictions(y_true, y_pred, path=None, expected: int = 40, strict: bool = False) -> str:
    """Real and predicted OEE over item index as two polylines."""
    y_true = np.asarray(y_true, dtype=float).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=float).reshape(-1)
    if y_true.shape[0] == 0:
        raise DomainError("nothing to plot")
    if y_true.shape != y_pred.shape:
        raise DomainError("real and predicted series differ in length")
    if y_true.shape[0] != expected:
        msg = f"expected {expected} items, got {y_true.shape[0]}"
        if strict:
            raise DomainError(msg)
        warnings.warn(msg, stacklevel=2)
    n = y_true.shape[0]
    both = np.concatenate([y_true, y_pred])
    c = _Canvas("Real vs predicted OEE", nice_ticks(1, max(n, 2)), nice_ticks(float(both.min()), float(both.max())),
                "Item", "OEE (%)")
    idx = np.arange(1, n + 1)
    c.polyline(idx, y_true, _COLORS[0], "real")
    c.polyline(idx, y_pred, _COLORS[1], "predicted")
    c.legend([("Real", _COLORS[0]), ("Predicted", _COLORS[1])])
    return _emit(c.render(), path)


def plot_loss_curve(curve: LossCurve, path=None) -> str:
    if len(curve) == 0:
        raise DomainError("loss curve is empty")
    series = [curve.train] + ([curve.test] if np.all(np.isfinite(curve.test)) else [])
    both = np.concatenate(series)
    epochs = np.arange(1, len(curve) + 1)
    c = _Canvas("Training loss", nice_ticks(1, max(len(curve), 2)), nice_ticks(0.0, float(both.max())),
                "Epoch", "MAE (OEE points)")
    c.polyline(epochs, curve.train, _COLORS[0], "train")
    entries = [("Train", _COLORS[0])]
    if len(series) == 2:
        c.polyline(epochs, curve.test, _COLORS[1], "test")
        entries.append(("Test", _COLORS[1]))
    c.legend(entries)
    return _emit(c.render(), path)


@dataclass(frozen=True, eq=False)
class BoxStats:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: np.ndarray


def box_stats(values, multiplier: float = 1.5) -> BoxStats:
    """Quartiles plus whiskers at the most extreme points inside the IQR fences."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.shape[0] == 0:
        raise DomainError("box statistics need at least one value")
    q1, med, q3 = np.percentile(v, [25.0, 50.0, 75.0])
    lo, hi = iqr_fences(v, multiplier)
    inside = v[(v >= lo) & (v <= hi)]
    return BoxStats(float(q1), float(med), float(q3), float(inside.min()), float(inside.max()),
                    np.sort(v[(v < lo) | (v > hi)]))


def plot_error_boxplots(samples: Sequence[ErrorSample], path=None) -> str:
    if len(samples) == 0:
        raise DomainError("no error samples to plot")
    stats = [box_stats(s.abs_errors) for s in samples]
    top = max(float(np.max(s.abs_errors)) for s in samples)
    k = len(samples)
    c = _Canvas("Absolute error by model", [0.5, k + 0.5], nice_ticks(0.0, top), "Model", "|error| (OEE points)")
    half = 0.25 * (c.x(1) - c.x(0))
    for i, (s, b) in enumerate(zip(samples, stats), start=1):
        xc = c.x(i)
        c.line(xc, c.y(b.whisker_low), xc, c.y(b.q1))
        c.line(xc, c.y(b.q3), xc, c.y(b.whisker_high))
        c.line(xc - half / 2, c.y(b.whisker_low), xc + half / 2, c.y(b.whisker_low))
        c.line(xc - half / 2, c.y(b.whisker_high), xc + half / 2, c.y(b.whisker_high))
        c.add(f'<rect class="box" x="{_f(xc - half)}" y="{_f(c.y(b.q3))}" width="{_f(2 * half)}" '
              f'height="{_f(c.y(b.q1) - c.y(b.q3))}" fill="#c6dbef" stroke="#000000"/>')
        c.line(xc - half, c.y(b.median), xc + half, c.y(b.median), "#000000", 2.0)
        for o in b.outliers:
            c.add(f'<circle cx="{_f(xc)}" cy="{_f(c.y(o))}" r="2.5" fill="none" stroke="#d62728"/>')
        c.text(xc, _H - _BOTTOM + 18, s.model_name, size=11)
    return _emit(c.render(x_tick_labels=["", ""]), path)


def plot_tukey_ci(tukey: TukeyResult, path=None) -> str:
    if len(tukey.pairwise) == 0:
        raise DomainError("no pairwise comparisons to plot")
    lo = min(min(p.ci_low for p in tukey.pairwise), 0.0)
    hi = max(max(p.ci_high for p in tukey.pairwise), 0.0)
    m = len(tukey.pairwise)
    c = _Canvas("Tukey simultaneous 95% confidence intervals", nice_ticks(lo, hi), [0.0, m + 1.0],
                "Difference of mean |error|", "")
    c.line(c.x(0.0), c.y(0.0), c.x(0.0), c.y(m + 1.0), "#7f7f7f", 1.0, "4,3")
    for i, p in enumerate(tukey.pairwise):
        yy = c.y(m - i)
        color = _COLORS[1] if p.significant else _COLORS[0]
        c.line(c.x(p.ci_low), yy, c.x(p.ci_high), yy, color, 2.0)
        c.add(f'<circle cx="{_f(c.x(p.mean_diff))}" cy="{_f(yy)}" r="3" fill="{color}"/>')
        c.text(_LEFT + 4, yy - 4, f"{p.model_a} - {p.model_b}", anchor="start", size=10)
    return _emit(c.render(y_tick_labels=["", ""]), path)


def plot_histogram(values, bins: int = 30, path=None) -> str:
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.shape[0] == 0:
        raise DomainError("no values to plot")
    if bins < 1:
        raise DomainError("bins must be >= 1")
    counts, edges = np.histogram(v, bins=bins)
    c = _Canvas("Distribution", nice_ticks(float(edges[0]), float(edges[-1])),
                nice_ticks(0.0, float(counts.max())), "Value", "Count")
    for n, a, b in zip(counts, edges[:-1], edges[1:]):
        c.add(f'<rect class="bar" x="{_f(c.x(a))}" y="{_f(c.y(n))}" width="{_f(c.x(b) - c.x(a))}" '
              f'height="{_f(c.y(0) - c.y(n))}" fill="#9ecae1" stroke="#3182bd"/>')
    return _emit(c.render(), path)
