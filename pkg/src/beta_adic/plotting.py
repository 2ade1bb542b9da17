"""Deterministic SVG figures for distributional experiment reports."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from scipy.stats import norm

from .errors import UnsupportedKind
from .experiments import CLT, DS, LLT, ExperimentReport, cdf_exp_chi2, cdf_exp_half_chi2

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60
#: points kept from an empirical CDF
MAX_POINTS = 400


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    def __init__(self, xlim, ylim):
        self.xlim, self.ylim = xlim, ylim
        self.parts: list[str] = []

    def px(self, x, y):
        x0, x1 = self.xlim
        y0, y1 = self.ylim
        u = LEFT + (x - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT)
        v = HEIGHT - BOTTOM - (y - y0) / (y1 - y0) * (HEIGHT - TOP - BOTTOM)
        return u, v

    def polyline(self, xs, ys, color, dash=None, width=1.5):
        pts = " ".join(f"{_fmt(u)},{_fmt(v)}" for u, v in (self.px(x, y) for x, y in zip(xs, ys)))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{extra} points="{pts}"/>')

    def dots(self, xs, ys, color):
        for x, y in zip(xs, ys):
            u, v = self.px(x, y)
            self.parts.append(f'<circle cx="{_fmt(u)}" cy="{_fmt(v)}" r="3" fill="{color}"/>')

    def text(self, x, y, s, anchor="middle", size=12):
        self.parts.append(f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" text-anchor="{anchor}">{escape(s)}</text>')

    def axes(self, xlabel, ylabel, title):
        x0, x1 = self.xlim
        y0, y1 = self.ylim
        (ua, va), (ub, vb) = self.px(x0, y0), self.px(x1, y1)
        self.parts.append(f'<rect x="{_fmt(ua)}" y="{_fmt(vb)}" width="{_fmt(ub - ua)}" height="{_fmt(va - vb)}" fill="none" stroke="black"/>')
        for k in range(6):
            x = x0 + (x1 - x0) * k / 5
            u, _ = self.px(x, y0)
            self.parts.append(f'<line x1="{_fmt(u)}" y1="{_fmt(va)}" x2="{_fmt(u)}" y2="{_fmt(va + 5)}" stroke="black"/>')
            self.text(u, va + 18, f"{x:.2f}")
            y = y0 + (y1 - y0) * k / 5
            _, v = self.px(x0, y)
            self.parts.append(f'<line x1="{_fmt(ua - 5)}" y1="{_fmt(v)}" x2="{_fmt(ua)}" y2="{_fmt(v)}" stroke="black"/>')
            self.text(ua - 8, v + 4, f"{y:.2f}", anchor="end")
        self.text((ua + ub) / 2, HEIGHT - 15, xlabel)
        self.parts.append(
            f'<text x="18" y="{_fmt((va + vb) / 2)}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 18 {_fmt((va + vb) / 2)})">{escape(ylabel)}</text>'
        )
        self.text(WIDTH / 2, 22, title, size=14)

    def legend(self, entries):
        for k, (label, color, dash) in enumerate(entries):
            y = TOP + 18 + 18 * k
            extra = f' stroke-dasharray="{dash}"' if dash else ""
            self.parts.append(f'<line x1="{LEFT + 12}" y1="{y}" x2="{LEFT + 40}" y2="{y}" stroke="{color}" stroke-width="2"{extra}/>')
            self.text(LEFT + 46, y + 4, label, anchor="start", size=11)

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">\n'
            '<rect width="100%" height="100%" fill="white"/>\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def _ecdf(values: np.ndarray):
    x = np.sort(values)
    y = np.arange(1, x.size + 1) / x.size
    if x.size > MAX_POINTS:
        idx = np.unique(np.linspace(0, x.size - 1, MAX_POINTS).round().astype(int))
        x, y = x[idx], y[idx]
    # staircase
    xs = np.repeat(x, 2)[1:]
    ys = np.repeat(y, 2)[:-1]
    return xs, ys


def _column(report: ExperimentReport, name: str) -> np.ndarray:
    i = report.columns.index(name)
    return np.array([row[i] for row in report.rows], dtype=float)


def render_svg(report: ExperimentReport) -> str:
    if report.kind == DS and report.summary.get("ks_exp_half_chi2") is not None:
        vals = _column(report, "normalized")
        c = _Canvas((0.0, 1.0), (0.0, 1.0))
        c.axes("normalized S_n", "cumulative probability", "Occupation sums: empirical CDF vs limit laws")
        grid = np.linspace(0, 1, 201)
        c.polyline(*_ecdf(np.clip(vals, 0, 1)), "black")
        c.polyline(grid, cdf_exp_half_chi2(grid), "#1f77b4", dash="6,3")
        c.polyline(grid, cdf_exp_chi2(grid), "#d62728", dash="2,3")
        s = report.summary
        c.legend([
            ("empirical", "black", None),
            (f"exp(-Z^2/2), KS = {s['ks_exp_half_chi2']!r}", "#1f77b4", "6,3"),
            (f"exp(-Z^2), KS = {s['ks_exp_chi2']!r}", "#d62728", "2,3"),
        ])
        return c.render()
    if report.kind == CLT and report.summary.get("ks_normal") is not None:
        vals = _column(report, "normalized")
        lim = max(4.0, math.ceil(float(np.abs(vals).max())))
        c = _Canvas((-lim, lim), (0.0, 1.0))
        c.axes("standardized Birkhoff sum", "cumulative probability", "Birkhoff sums: empirical CDF vs Gaussian")
        grid = np.linspace(-lim, lim, 201)
        c.polyline(*_ecdf(vals), "black")
        c.polyline(grid, norm.cdf(grid), "#1f77b4", dash="6,3")
        c.legend([("empirical", "black", None), (f"N(0,1), KS = {report.summary['ks_normal']!r}", "#1f77b4", "6,3")])
        return c.render()
    if report.kind == LLT and report.rows:
        t, v = _column(report, "t"), _column(report, "value")
        lim = max(2.5, float(np.abs(t).max()) + 0.5)
        c = _Canvas((-lim, lim), (0.0, 0.5))
        c.axes("t", "scaled transfer value", "Local limit profile vs Gaussian density")
        grid = np.linspace(-lim, lim, 201)
        c.polyline(grid, np.exp(-grid**2 / 2) / math.sqrt(2 * math.pi), "#1f77b4", dash="6,3")
        c.dots(t, v, "black")
        c.legend([("enumerated", "black", None), ("Gaussian density", "#1f77b4", "6,3")])
        return c.render()
    raise UnsupportedKind(f"{report.kind} report has no distributional content to plot")


def emit_plot(report: ExperimentReport, path) -> Path:
    """Write the SVG for ``report`` to ``path``; bytes depend only on the report."""
    svg = render_svg(report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(svg.encode("utf-8"))
    return path
