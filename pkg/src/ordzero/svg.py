"""Minimal SVG output: scatter plots, line plots and contour maps."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


class Canvas:
    def __init__(self, width=640, height=480, margin=56):
        self.w, self.h, self.m = width, height, margin
        self.items = []

    def frame(self, xlim, ylim):
        self.xlim, self.ylim = xlim, ylim
        self.items.append(f'<rect x="{self.m}" y="{self.m}" width="{self.w - 2 * self.m}" '
                          f'height="{self.h - 2 * self.m}" fill="none" stroke="#444"/>')

    def px(self, x, y):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        X = self.m + (x - x0) / (x1 - x0) * (self.w - 2 * self.m)
        Y = self.h - self.m - (y - y0) / (y1 - y0) * (self.h - 2 * self.m)
        return X, Y

    def circle(self, x, y, r=3, color="#000"):
        X, Y = self.px(x, y)
        self.items.append(f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="{r}" fill="{color}"/>')

    def polyline(self, xs, ys, color="#000", width=1.5, dash=None):
        pts = " ".join("%.2f,%.2f" % self.px(x, y) for x, y in zip(xs, ys))
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}"{d}/>')

    def segment(self, a, b, color="#000", width=1.0):
        (X0, Y0), (X1, Y1) = self.px(*a), self.px(*b)
        self.items.append(f'<line x1="{X0:.2f}" y1="{Y0:.2f}" x2="{X1:.2f}" y2="{Y1:.2f}" '
                          f'stroke="{color}" stroke-width="{width}"/>')

    def text(self, X, Y, s, size=12, anchor="start"):
        self.items.append(f'<text x="{X:.1f}" y="{Y:.1f}" font-size="{size}" '
                          f'font-family="sans-serif" text-anchor="{anchor}">{escape(s)}</text>')

    def axes_labels(self, title, xlabel, ylabel):
        self.text(self.w / 2, self.m / 2, title, 14, "middle")
        self.text(self.w / 2, self.h - 12, xlabel, 12, "middle")
        self.text(14, self.h / 2, ylabel, 12, "start")
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        self.text(self.m, self.h - self.m + 16, f"{x0:.3g}", 10, "middle")
        self.text(self.w - self.m, self.h - self.m + 16, f"{x1:.3g}", 10, "middle")
        self.text(self.m - 4, self.h - self.m, f"{y0:.3g}", 10, "end")
        self.text(self.m - 4, self.m + 4, f"{y1:.3g}", 10, "end")

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        body = "\n".join(self.items)
        path.write_text(f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" '
                        f'height="{self.h}" viewBox="0 0 {self.w} {self.h}">\n'
                        f'<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n')
        return path


def _lims(vals, pad=0.05):
    lo, hi = float(min(vals)), float(max(vals))
    if hi == lo:
        lo, hi = lo - 1, hi + 1
    d = (hi - lo) * pad
    return lo - d, hi + d


def scatter(path, groups, title="", xlabel="", ylabel="", square=True):
    """groups: list of (label, xs, ys)."""
    xs = [x for _, gx, _ in groups for x in gx] or [0.0]
    ys = [y for _, _, gy in groups for y in gy] or [0.0]
    xl, yl = _lims(xs), _lims(ys)
    if square:
        lo, hi = min(xl[0], yl[0]), max(xl[1], yl[1])
        xl = yl = (lo, hi)
    c = Canvas()
    c.frame(xl, yl)
    for i, (label, gx, gy) in enumerate(groups):
        col = PALETTE[i % len(PALETTE)]
        for x, y in zip(gx, gy):
            c.circle(x, y, 3, col)
        c.text(c.w - c.m + 4, c.m + 14 * (i + 1), label, 10)
        c.items.append(f'<circle cx="{c.w - c.m - 4}" cy="{c.m + 14 * (i + 1) - 4}" r="3" fill="{col}"/>')
    c.axes_labels(title, xlabel, ylabel)
    return c.save(path)


def lines(path, series, title="", xlabel="", ylabel=""):
    """series: list of (label, xs, ys, dashed)."""
    xs = [x for _, sx, _, _ in series for x in sx]
    ys = [y for _, _, sy, _ in series for y in sy if math.isfinite(y)]
    c = Canvas()
    c.frame(_lims(xs), _lims(ys))
    for i, (label, sx, sy, dashed) in enumerate(series):
        col = PALETTE[i % len(PALETTE)]
        c.polyline(sx, sy, col, dash="5,4" if dashed else None)
        for x, y in zip(sx, sy):
            c.circle(x, y, 2, col)
        c.text(c.m + 8, c.m + 14 * (i + 1), label, 10)
    c.axes_labels(title, xlabel, ylabel)
    return c.save(path)


# marching squares: edge pairs per cell case (corners 0=(i,j), 1=(i+1,j), 2=(i+1,j+1), 3=(i,j+1))
_CASES = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 5: [(3, 0), (1, 2)], 6: [(0, 2)],
    7: [(3, 2)], 8: [(2, 3)], 9: [(0, 2)], 10: [(0, 1), (2, 3)], 11: [(1, 2)], 12: [(3, 1)],
    13: [(0, 1)], 14: [(3, 0)],
}


def contour_segments(x, y, F, level):
    """Line segments of {F = level} on a rectilinear grid (F indexed [i, j])."""
    segs = []
    nx, ny = F.shape
    for i in range(nx - 1):
        for j in range(ny - 1):
            v = (F[i, j], F[i + 1, j], F[i + 1, j + 1], F[i, j + 1])
            if not all(map(math.isfinite, v)):
                continue
            case = sum(1 << b for b in range(4) if v[b] > level)
            if case in (0, 15):
                continue
            corners = ((x[i], y[j]), (x[i + 1], y[j]), (x[i + 1], y[j + 1]), (x[i], y[j + 1]))

            def edge(e):
                a, b = e, (e + 1) % 4
                t = (level - v[a]) / (v[b] - v[a])
                return (corners[a][0] + t * (corners[b][0] - corners[a][0]),
                        corners[a][1] + t * (corners[b][1] - corners[a][1]))

            for e0, e1 in _CASES[case]:
                segs.append((edge(e0), edge(e1)))
    return segs


def contour_map(path, x, y, F, levels, title="", marks=()):
    c = Canvas(640, 640)
    c.frame((float(x[0]), float(x[-1])), (float(y[0]), float(y[-1])))
    for n, lev in enumerate(levels):
        col = PALETTE[n % len(PALETTE)]
        for a, b in contour_segments(x, y, F, lev):
            c.segment(a, b, col, 0.8)
    for mx, my in marks:
        c.circle(mx, my, 2.5, "#000")
    c.axes_labels(title, "Re z", "Im z")
    return c.save(path)


def log_levels(F, count=12):
    v = F[np.isfinite(F)]
    return list(np.linspace(np.percentile(v, 2), np.percentile(v, 98), count))
