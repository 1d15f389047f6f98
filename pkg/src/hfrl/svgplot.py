"""Minimal deterministic SVG charts.

Runs must be byte-reproducible, so charts are assembled as plain strings:
no timestamps, no random ids, fixed palettes, and floats formatted with a
fixed precision.  Only what the artifact files need is implemented: a
multi-series line chart and an annotated heatmap.
"""

from __future__ import annotations

import math
from typing import Sequence

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)
_FONT = "font-family='Helvetica,Arial,sans-serif'"


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return [0.0]
    if hi == lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def line_chart(
    series: dict[str, list[tuple[float, float]]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 720,
    height: int = 440,
) -> str:
    """Render named (x, y) polylines with axes and a legend."""
    if not series:
        raise ValueError("no series to plot")
    points = [
        (x, y)
        for pts in series.values()
        for x, y in pts
        if math.isfinite(x) and math.isfinite(y)
    ]
    if not points:
        raise ValueError("series contain no finite points")
    xs, ys = zip(*points)
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad_y = 0.05 * (y_hi - y_lo)
    y_lo -= pad_y
    y_hi += pad_y

    left, right, top, bottom = 72, 16, 40, 52
    pw, ph = width - left - right, height - top - bottom

    def sx(x: float) -> float:
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y: float) -> float:
        return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph

    out = [
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}' "
        f"viewBox='0 0 {width} {height}'>",
        f"<rect width='{width}' height='{height}' fill='white'/>",
    ]
    if title:
        out.append(
            f"<text x='{width / 2}' y='22' text-anchor='middle' {_FONT} "
            f"font-size='15' font-weight='bold'>{title}</text>"
        )
    # frame and grid
    out.append(
        f"<rect x='{left}' y='{top}' width='{pw}' height='{ph}' fill='none' stroke='#333'/>"
    )
    for tx in _ticks(x_lo, x_hi):
        px = sx(tx)
        out.append(f"<line x1='{_fmt(px)}' y1='{top}' x2='{_fmt(px)}' y2='{top + ph}' stroke='#ddd'/>")
        out.append(
            f"<text x='{_fmt(px)}' y='{top + ph + 16}' text-anchor='middle' {_FONT} "
            f"font-size='11'>{_fmt(tx)}</text>"
        )
    for ty in _ticks(y_lo, y_hi):
        py = sy(ty)
        out.append(f"<line x1='{left}' y1='{_fmt(py)}' x2='{left + pw}' y2='{_fmt(py)}' stroke='#ddd'/>")
        out.append(
            f"<text x='{left - 6}' y='{_fmt(py + 4)}' text-anchor='end' {_FONT} "
            f"font-size='11'>{_fmt(ty)}</text>"
        )
    if x_label:
        out.append(
            f"<text x='{left + pw / 2}' y='{height - 12}' text-anchor='middle' {_FONT} "
            f"font-size='12'>{x_label}</text>"
        )
    if y_label:
        out.append(
            f"<text x='16' y='{top + ph / 2}' text-anchor='middle' {_FONT} font-size='12' "
            f"transform='rotate(-90 16 {top + ph / 2})'>{y_label}</text>"
        )
    # series
    for i, (name, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        finite = [(x, y) for x, y in pts if math.isfinite(x) and math.isfinite(y)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in finite)
        if coords:
            out.append(
                f"<polyline points='{coords}' fill='none' stroke='{color}' stroke-width='1.8'/>"
            )
        ly = top + 14 + 16 * i
        out.append(f"<line x1='{left + pw - 130}' y1='{ly - 4}' x2='{left + pw - 110}' y2='{ly - 4}' stroke='{color}' stroke-width='2'/>")
        out.append(
            f"<text x='{left + pw - 104}' y='{ly}' {_FONT} font-size='11'>{name}</text>"
        )
    out.append("</svg>")
    return "\n".join(out)


def _lerp_color(a: tuple[int, int, int], b: tuple[int, int, int], t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    rgb = tuple(round(ca + (cb - ca) * t) for ca, cb in zip(a, b))
    return "#%02x%02x%02x" % rgb


def heatmap(
    matrix: Sequence[Sequence[float]],
    row_labels: Sequence[str],
    col_labels: Sequence[str],
    title: str = "",
    cell: int = 46,
) -> str:
    """Annotated cell grid; low values render blue, high values red."""
    rows = [list(map(float, r)) for r in matrix]
    n_rows, n_cols = len(rows), len(rows[0]) if rows else 0
    if n_rows == 0 or n_cols == 0:
        raise ValueError("empty matrix")
    if len(row_labels) != n_rows or len(col_labels) != n_cols:
        raise ValueError("label counts must match the matrix shape")
    flat = [v for r in rows for v in r if math.isfinite(v)]
    lo, hi = (min(flat), max(flat)) if flat else (0.0, 1.0)
    if hi == lo:
        hi = lo + 1.0

    left, top = 70, 54 if title else 34
    width = left + n_cols * cell + 16
    height = top + n_rows * cell + 16
    blue, white, red = (33, 102, 172), (247, 247, 247), (178, 24, 43)

    out = [
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}' "
        f"viewBox='0 0 {width} {height}'>",
        f"<rect width='{width}' height='{height}' fill='white'/>",
    ]
    if title:
        out.append(
            f"<text x='{width / 2}' y='20' text-anchor='middle' {_FONT} "
            f"font-size='14' font-weight='bold'>{title}</text>"
        )
    for j, lab in enumerate(col_labels):
        out.append(
            f"<text x='{left + j * cell + cell / 2}' y='{top - 8}' text-anchor='middle' "
            f"{_FONT} font-size='11'>{lab}</text>"
        )
    for i, lab in enumerate(row_labels):
        out.append(
            f"<text x='{left - 8}' y='{top + i * cell + cell / 2 + 4}' text-anchor='end' "
            f"{_FONT} font-size='11'>{lab}</text>"
        )
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            if math.isfinite(v):
                t = (v - lo) / (hi - lo)
                color = _lerp_color(blue, white, t * 2) if t < 0.5 else _lerp_color(white, red, t * 2 - 1)
                label = format(v, ".2f")
            else:
                color, label = "#cccccc", ""
            x, y = left + j * cell, top + i * cell
            out.append(
                f"<rect x='{x}' y='{y}' width='{cell}' height='{cell}' fill='{color}' stroke='#999'/>"
            )
            if label:
                out.append(
                    f"<text x='{x + cell / 2}' y='{y + cell / 2 + 4}' text-anchor='middle' "
                    f"{_FONT} font-size='10'>{label}</text>"
                )
    out.append("</svg>")
    return "\n".join(out)
