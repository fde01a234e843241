"""Summary statistics and self-contained SVG plot emitters.

No plotting library: the two emitters write deterministic standalone SVG
text, so identical inputs give byte-identical files. Quartiles use linear
interpolation (numpy's default scheme), standard deviations are the
sample (n - 1) kind.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)

_W, _H = 860.0, 520.0
_ML, _MR, _MT, _MB = 70.0, 24.0, 42.0, 54.0


def quartiles(values) -> tuple[float, float, float]:
    """(q1, median, q3) with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("quartiles of an empty sequence")
    q = np.quantile(v, [0.25, 0.5, 0.75])
    return float(q[0]), float(q[1]), float(q[2])


@dataclass
class SummaryStats:
    n: int
    mean: float
    std: float
    median: float
    q1: float
    q3: float
    min: float
    max: float


def summary_stats(values) -> SummaryStats:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("summary of an empty sequence")
    q1, med, q3 = quartiles(v)
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return SummaryStats(
        n=int(v.size), mean=float(v.mean()), std=std, median=med,
        q1=q1, q3=q3, min=float(v.min()), max=float(v.max()),
    )


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _esc(s: str) -> str:
    return (s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
             .replace('"', "&quot;"))


class _Axes:
    """Linear or log-y mapping from data space onto the plot rectangle."""

    def __init__(self, x_lo, x_hi, y_lo, y_hi, log_y=False):
        if x_hi <= x_lo:
            x_hi = x_lo + 1.0
        if log_y:
            y_lo = max(y_lo, 1e-300)
            y_hi = max(y_hi, y_lo * 10.0)
            self._ylo, self._yhi = np.log10(y_lo), np.log10(y_hi)
        else:
            if y_hi <= y_lo:
                y_hi = y_lo + 1.0
            self._ylo, self._yhi = y_lo, y_hi
        self.x_lo, self.x_hi = x_lo, x_hi
        self.log_y = log_y

    def px(self, x):
        f = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return _ML + f * (_W - _ML - _MR)

    def py(self, y):
        v = np.log10(np.maximum(y, 1e-300)) if self.log_y else y
        f = (v - self._ylo) / (self._yhi - self._ylo)
        return _H - _MB - f * (_H - _MT - _MB)

    def y_ticks(self):
        if self.log_y:
            lo, hi = int(np.floor(self._ylo)), int(np.ceil(self._yhi))
            step = max(1, (hi - lo) // 6)
            return [10.0**e for e in range(lo, hi + 1, step)]
        return list(np.linspace(self._ylo, self._yhi, 5))

    def x_ticks(self):
        return list(np.linspace(self.x_lo, self.x_hi, 5))


def _frame(out: list, ax: _Axes, title: str, xlabel: str, ylabel: str):
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(_W)} '
        f'{_fmt(_H)}" font-family="sans-serif" font-size="12">'
    )
    out.append(f'<rect width="{_fmt(_W)}" height="{_fmt(_H)}" fill="white"/>')
    if title:
        out.append(
            f'<text x="{_fmt(_W / 2)}" y="24" text-anchor="middle" '
            f'font-size="15">{_esc(title)}</text>'
        )
    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT
    for yt in ax.y_ticks():
        py = ax.py(yt)
        out.append(
            f'<line x1="{_fmt(x0)}" y1="{_fmt(py)}" x2="{_fmt(x1)}" '
            f'y2="{_fmt(py)}" stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(x0 - 6)}" y="{_fmt(py + 4)}" '
            f'text-anchor="end">{_fmt(yt)}</text>'
        )
    for xt in ax.x_ticks():
        px = ax.px(xt)
        out.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(y0)}" x2="{_fmt(px)}" '
            f'y2="{_fmt(y0 + 4)}" stroke="#333333" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(px)}" y="{_fmt(y0 + 18)}" '
            f'text-anchor="middle">{_fmt(xt)}</text>'
        )
    out.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" '
        f'y2="{_fmt(y0)}" stroke="#333333" stroke-width="1.5"/>'
    )
    out.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" '
        f'y2="{_fmt(y1)}" stroke="#333333" stroke-width="1.5"/>'
    )
    out.append(
        f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(_H - 12)}" '
        f'text-anchor="middle">{_esc(xlabel)}</text>'
    )
    out.append(
        f'<text x="16" y="{_fmt((y0 + y1) / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_fmt((y0 + y1) / 2)})">{_esc(ylabel)}</text>'
    )


def emit_convergence_svg(curves: dict, path: str, title: str = "",
                         xlabel: str = "evaluations",
                         ylabel: str = "best fitness",
                         log_y: bool = False) -> str:
    """Mean curve with a +-1 std band per label.

    ``curves`` maps label -> (x, runs) where x is the shared (G,) abscissa
    and runs is an (R, G) matrix of per-run best-fitness trajectories.
    """
    if not curves:
        raise ValueError("emit_convergence_svg: no curves")
    stats = {}
    y_min, y_max = np.inf, -np.inf
    x_min, x_max = np.inf, -np.inf
    for label, (x, runs) in curves.items():
        x = np.asarray(x, dtype=float)
        runs = np.atleast_2d(np.asarray(runs, dtype=float))
        mean = runs.mean(axis=0)
        std = runs.std(axis=0, ddof=1) if runs.shape[0] > 1 else np.zeros_like(mean)
        stats[label] = (x, mean, std)
        if log_y:
            pos = mean[mean > 0]
            lo = float(pos.min()) * 0.5 if pos.size else 1e-300
        else:
            lo = float((mean - std).min())
        y_min = min(y_min, lo)
        y_max = max(y_max, float((mean + std).max()))
        x_min = min(x_min, x.min())
        x_max = max(x_max, x.max())
    if log_y:
        y_min = max(y_min, 1e-300)
    ax = _Axes(x_min, x_max, y_min, y_max, log_y=log_y)
    out: list[str] = []
    _frame(out, ax, title, xlabel, ylabel)
    for k, (label, (x, mean, std)) in enumerate(stats.items()):
        color = PALETTE[k % len(PALETTE)]
        if np.any(std > 0):
            upper = [(ax.px(xi), ax.py(mi + si)) for xi, mi, si in zip(x, mean, std)]
            lower = [(ax.px(xi), ax.py(max(mi - si, 1e-300) if log_y else mi - si))
                     for xi, mi, si in zip(x, mean, std)]
            pts = upper + lower[::-1]
            d = "M " + " L ".join(f"{_fmt(px)} {_fmt(py)}" for px, py in pts) + " Z"
            out.append(f'<path d="{d}" fill="{color}" opacity="0.15"/>')
        pts = " ".join(
            f"{_fmt(ax.px(xi))},{_fmt(ax.py(mi))}" for xi, mi in zip(x, mean)
        )
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.8"/>'
        )
        ly = _MT + 16 + 16 * k
        out.append(
            f'<line x1="{_fmt(_W - _MR - 150)}" y1="{_fmt(ly - 4)}" '
            f'x2="{_fmt(_W - _MR - 126)}" y2="{_fmt(ly - 4)}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{_fmt(_W - _MR - 120)}" y="{_fmt(ly)}">{_esc(label)}</text>'
        )
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def emit_boxplot_svg(groups: dict, path: str, title: str = "",
                     ylabel: str = "final best fitness",
                     log_y: bool = False) -> str:
    """Median / IQR boxes with 1.5 IQR whiskers and outlier markers.

    ``groups`` maps label -> sequence of final values; one box per label.
    """
    if not groups:
        raise ValueError("emit_boxplot_svg: no groups")
    prepared = {}
    y_min, y_max = np.inf, -np.inf
    for label, vals in groups.items():
        v = np.asarray(vals, dtype=float)
        q1, med, q3 = quartiles(v)
        iqr = q3 - q1
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = v[(v >= lo_fence) & (v <= hi_fence)]
        wlo = float(inside.min()) if inside.size else q1
        whi = float(inside.max()) if inside.size else q3
        outliers = v[(v < lo_fence) | (v > hi_fence)]
        prepared[label] = (q1, med, q3, wlo, whi, outliers)
        y_min = min(y_min, float(v.min()))
        y_max = max(y_max, float(v.max()))
    pad = 0.05 * (y_max - y_min) if y_max > y_min else 1.0
    ax = _Axes(0.0, float(len(prepared)), y_min - pad, y_max + pad, log_y=log_y)
    out: list[str] = []
    _frame(out, ax, title, "", ylabel)
    width = (_W - _ML - _MR) / max(len(prepared), 1)
    for k, (label, (q1, med, q3, wlo, whi, outl)) in enumerate(prepared.items()):
        color = PALETTE[k % len(PALETTE)]
        cx = ax.px(k + 0.5)
        bw = 0.3 * width
        for y_from, y_to in ((wlo, q1), (q3, whi)):
            out.append(
                f'<line x1="{_fmt(cx)}" y1="{_fmt(ax.py(y_from))}" '
                f'x2="{_fmt(cx)}" y2="{_fmt(ax.py(y_to))}" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
        for wv in (wlo, whi):
            out.append(
                f'<line x1="{_fmt(cx - bw / 2)}" y1="{_fmt(ax.py(wv))}" '
                f'x2="{_fmt(cx + bw / 2)}" y2="{_fmt(ax.py(wv))}" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
        out.append(
            f'<rect x="{_fmt(cx - bw)}" y="{_fmt(ax.py(q3))}" '
            f'width="{_fmt(2 * bw)}" '
            f'height="{_fmt(abs(ax.py(q1) - ax.py(q3)))}" '
            f'fill="{color}" opacity="0.25" stroke="{color}"/>'
        )
        out.append(
            f'<line x1="{_fmt(cx - bw)}" y1="{_fmt(ax.py(med))}" '
            f'x2="{_fmt(cx + bw)}" y2="{_fmt(ax.py(med))}" '
            f'stroke="{color}" stroke-width="2.5"/>'
        )
        for ov in sorted(outl):
            out.append(
                f'<circle cx="{_fmt(cx)}" cy="{_fmt(ax.py(ov))}" r="3" '
                f'fill="none" stroke="{color}"/>'
            )
        out.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(_H - _MB + 18)}" '
            f'text-anchor="middle">{_esc(label)}</text>'
        )
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
    return path
