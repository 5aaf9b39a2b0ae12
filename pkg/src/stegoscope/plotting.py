"""Dependency-free SVG charts and the cover/stego difference panel."""

import csv
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .image_io import as_image8

WIDTH, HEIGHT = 480, 320
MARGIN = 56


@dataclass
class PlotSeries:
    name: str
    x: List[float]
    y: List[float]
    x_label: str = "x"
    y_label: str = "y"

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ValueError(f"series {self.name!r}: {len(self.x)} x values vs {len(self.y)} y values")
        if not all(math.isfinite(v) for v in [*self.x, *self.y]):
            raise ValueError(f"series {self.name!r} has non-finite values")


class CSVError(ValueError):
    pass


def read_series(path, x_col, y_col, scale=1.0):
    """Load two numeric columns of a header-row CSV into a :class:`PlotSeries`."""
    xs, ys = [], []
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None:
            raise CSVError(f"{path}: empty file")
        try:
            xi, yi = header.index(x_col), header.index(y_col)
        except ValueError:
            raise CSVError(f"{path}: line 1: columns {x_col!r}/{y_col!r} not in header {header}") from None
        for lineno, row in enumerate(rd, start=2):
            if not row:
                continue
            try:
                x, y = float(row[xi]), float(row[yi]) * scale
            except (IndexError, ValueError):
                raise CSVError(f"{path}: line {lineno}: malformed row {row}") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise CSVError(f"{path}: line {lineno}: non-finite value")
            xs.append(x)
            ys.append(y)
    if not xs:
        raise CSVError(f"{path}: no data rows")
    return PlotSeries(y_col, xs, ys, x_col, y_col)


def _nice_range(lo, hi):
    if lo == hi:
        lo, hi = lo - 1, hi + 1
    pad = 0.08 * (hi - lo)
    return lo - pad, hi + pad


def _esc(text):
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def series_svg(series, title="", kind="line"):
    """Render one series as a standalone SVG string.

    Each data point carries ``data-x``/``data-y`` attributes with its
    original values so the output can be checked without parsing geometry.
    """
    x0, x1 = _nice_range(min(series.x), max(series.x))
    y0, y1 = _nice_range(min(series.y), max(series.y))
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15">{_esc(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle" font-size="12">'
        f'{_esc(series.x_label)}</text>',
        f'<text x="16" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {HEIGHT / 2:.1f})">{_esc(series.y_label)}</text>',
    ]
    for x in series.x:
        out.append(f'<text x="{px(x):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
                   f'font-size="10">{x:g}</text>')
    for i in range(5):
        y = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{MARGIN - 6}" y="{py(y) + 3:.1f}" text-anchor="end" font-size="10">{y:.3g}</text>')
    if kind == "bar":
        bw = 0.6 * pw / max(len(series.x), 1)
        for x, y in zip(series.x, series.y):
            base = py(max(y0, 0.0)) if y0 < 0 < y1 else HEIGHT - MARGIN
            top = py(y)
            out.append(f'<rect class="point" data-x="{x:g}" data-y="{y:g}" x="{px(x) - bw / 2:.1f}" '
                       f'y="{min(top, base):.1f}" width="{bw:.1f}" height="{abs(base - top):.1f}" fill="steelblue"/>')
    else:
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(series.x, series.y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>')
        for x, y in zip(series.x, series.y):
            out.append(f'<circle class="point" data-x="{x:g}" data-y="{y:g}" cx="{px(x):.1f}" '
                       f'cy="{py(y):.1f}" r="4" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_points(svg):
    """``(x, y)`` pairs from the ``data-x``/``data-y`` attributes of an SVG."""
    import re
    return [(float(a), float(b)) for a, b in re.findall(r'data-x="([^"]+)" data-y="([^"]+)"', svg)]


def diff_panel(cover, stego, scale=4):
    """Amplified absolute difference ``min(|cover - stego| * scale, 255)``."""
    a = as_image8(cover).astype(np.int64)
    b = as_image8(stego).astype(np.int64)
    if a.shape != b.shape:
        raise ValueError(f"cover {a.shape} and stego {b.shape} differ in size")
    return np.minimum(np.abs(a - b) * scale, 255).astype(np.uint8)
