"""Minimal static SVG emission: canvas primitives, data-space axes,
masked heatmaps with a diverging palette, and the three figure layouts
the command-line reports emit.  Every element is a rect, path/polyline,
circle, or text node; no plotting dependency."""

from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from .geometry import GridField

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
FONT = "Helvetica, Arial, sans-serif"


def _fmt(v: float) -> str:
    s = f"{float(v):.2f}"
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _tick_label(v: float) -> str:
    return f"{v:.3g}"


class SvgCanvas:
    def __init__(self, width: int, height: int, background: str = "#ffffff"):
        self.width = int(width)
        self.height = int(height)
        self.parts: List[str] = []
        if background:
            self.rect(0, 0, self.width, self.height, fill=background)

    def raw(self, fragment: str) -> None:
        self.parts.append(fragment)

    def rect(self, x, y, w, h, fill: str = "none", stroke: Optional[str] = None,
             stroke_width: float = 1.0, opacity: Optional[float] = None) -> None:
        attrs = [f'x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}"',
                 f'fill="{fill}"']
        if stroke:
            attrs.append(f'stroke="{stroke}" stroke-width="{_fmt(stroke_width)}"')
        if opacity is not None:
            attrs.append(f'fill-opacity="{_fmt(opacity)}"')
        self.parts.append(f"<rect {' '.join(attrs)}/>")

    def line(self, x1, y1, x2, y2, stroke: str = "#444444", width: float = 1.0,
             dash: Optional[str] = None) -> None:
        attrs = [f'x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}"',
                 f'stroke="{stroke}" stroke-width="{_fmt(width)}"']
        if dash:
            attrs.append(f'stroke-dasharray="{dash}"')
        self.parts.append(f"<line {' '.join(attrs)}/>")

    def polyline(self, points: Sequence[Tuple[float, float]], stroke: str,
                 width: float = 1.5, dash: Optional[str] = None) -> None:
        if len(points) < 2:
            return
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        attrs = [f'points="{coords}"', 'fill="none"',
                 f'stroke="{stroke}" stroke-width="{_fmt(width)}"',
                 'stroke-linejoin="round"']
        if dash:
            attrs.append(f'stroke-dasharray="{dash}"')
        self.parts.append(f"<polyline {' '.join(attrs)}/>")

    def circle(self, cx, cy, r, fill: str) -> None:
        self.parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
                          f'r="{_fmt(r)}" fill="{fill}"/>')

    def text(self, x, y, s: str, size: float = 12, anchor: str = "start",
             fill: str = "#222222", bold: bool = False,
             rotate: Optional[float] = None) -> None:
        attrs = [f'x="{_fmt(x)}" y="{_fmt(y)}"',
                 f'font-family="{FONT}" font-size="{_fmt(size)}"',
                 f'text-anchor="{anchor}" fill="{fill}"']
        if bold:
            attrs.append('font-weight="bold"')
        if rotate is not None:
            attrs.append(f'transform="rotate({_fmt(rotate)} {_fmt(x)} {_fmt(y)})"')
        self.parts.append(f"<text {' '.join(attrs)}>{escape(str(s))}</text>")

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" '
                f'width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        return head + "\n" + "\n".join(self.parts) + "\n</svg>\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def nice_range(values, pad: float = 0.05) -> Tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return (-1.0, 1.0)
    lo, hi = float(finite.min()), float(finite.max())
    if lo == hi:
        return (lo - 1.0, hi + 1.0)
    margin = pad * (hi - lo)
    return (lo - margin, hi + margin)


class Axes:
    """Maps data coordinates onto a pixel viewport (y grows upward)."""

    def __init__(self, x_range: Tuple[float, float], y_range: Tuple[float, float],
                 box: Tuple[float, float, float, float]):
        if x_range[1] <= x_range[0] or y_range[1] <= y_range[0]:
            raise ValueError("axis ranges must be increasing")
        self.x_range = (float(x_range[0]), float(x_range[1]))
        self.y_range = (float(y_range[0]), float(y_range[1]))
        self.box = tuple(float(v) for v in box)

    def px(self, x: float) -> float:
        left, _, w, _ = self.box
        lo, hi = self.x_range
        return left + w * (x - lo) / (hi - lo)

    def py(self, y: float) -> float:
        _, top, _, h = self.box
        lo, hi = self.y_range
        return top + h * (hi - y) / (hi - lo)

    def points(self, xs, ys) -> List[Tuple[float, float]]:
        return [(self.px(x), self.py(y)) for x, y in zip(xs, ys)]

    def draw_frame(self, canvas: SvgCanvas, title: str = "", xlabel: str = "",
                   ylabel: str = "", n_ticks: int = 5) -> None:
        left, top, w, h = self.box
        canvas.rect(left, top, w, h, fill="none", stroke="#444444")
        for x in np.linspace(*self.x_range, n_ticks):
            px = self.px(x)
            canvas.line(px, top + h, px, top + h + 4)
            canvas.text(px, top + h + 16, _tick_label(x), size=10, anchor="middle")
        for y in np.linspace(*self.y_range, n_ticks):
            py = self.py(y)
            canvas.line(left - 4, py, left, py)
            canvas.text(left - 7, py + 3.5, _tick_label(y), size=10, anchor="end")
        if title:
            canvas.text(left + w / 2, top - 10, title, size=13, anchor="middle",
                        bold=True)
        if xlabel:
            canvas.text(left + w / 2, top + h + 32, xlabel, size=11, anchor="middle")
        if ylabel:
            canvas.text(left - 44, top + h / 2, ylabel, size=11, anchor="middle",
                        rotate=-90)


def diverging_color(v: float, vmax: float) -> str:
    """Blue-white-red map: negative values blue, positive red, zero white."""
    if vmax <= 0:
        raise ValueError("vmax must be > 0")
    t = max(-1.0, min(1.0, float(v) / vmax))
    if t >= 0:
        r, g, b = 1.0 - 0.30 * t, 1.0 - 0.90 * t, 1.0 - 0.83 * t
    else:
        r, g, b = 1.0 + 0.87 * t, 1.0 + 0.60 * t, 1.0 + 0.33 * t
    channels = (min(1.0, max(0.0, c)) for c in (r, g, b))
    return "#%02x%02x%02x" % tuple(int(round(255 * c)) for c in channels)


def heatmap(canvas: SvgCanvas, axes: Axes, grid: GridField,
            vmax: Optional[float] = None, max_cells: int = 120) -> float:
    """Filled cells for the masked grid points; blocks of cells are merged
    for display when the grid is finer than max_cells per side.  Returns
    the color scale limit used."""
    vals, mask = grid.values, grid.mask
    ny, nx = vals.shape
    if vmax is None:
        masked = np.abs(vals[mask])
        vmax = float(masked.max()) if masked.size else 1.0
        if vmax == 0.0:
            vmax = 1.0
    fx = max(1, math.ceil(nx / max_cells))
    fy = max(1, math.ceil(ny / max_cells))
    sx = float(grid.x_axis[1] - grid.x_axis[0]) if nx > 1 else 1.0
    sy = float(grid.y_axis[1] - grid.y_axis[0]) if ny > 1 else 1.0
    cells = ['<g shape-rendering="crispEdges">']
    for by in range(0, ny, fy):
        for bx in range(0, nx, fx):
            mblock = mask[by:by + fy, bx:bx + fx]
            if not mblock.any():
                continue
            vblock = vals[by:by + fy, bx:bx + fx]
            v = float(np.mean(vblock[mblock]))
            hi_x = min(bx + fx, nx) - 1
            hi_y = min(by + fy, ny) - 1
            x0 = axes.px(grid.x_axis[bx] - sx / 2)
            x1 = axes.px(grid.x_axis[hi_x] + sx / 2)
            y0 = axes.py(grid.y_axis[hi_y] + sy / 2)
            y1 = axes.py(grid.y_axis[by] - sy / 2)
            cells.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" '
                         f'width="{_fmt(x1 - x0)}" height="{_fmt(y1 - y0)}" '
                         f'fill="{diverging_color(v, vmax)}"/>')
    cells.append("</g>")
    canvas.raw("\n".join(cells))
    return vmax


def colorbar(canvas: SvgCanvas, x: float, y: float, w: float, h: float,
             vmax: float, n: int = 40) -> None:
    step = h / n
    for i in range(n):
        v = vmax * (1.0 - 2.0 * (i + 0.5) / n)
        canvas.rect(x, y + i * step, w, step + 0.5, fill=diverging_color(v, vmax))
    canvas.rect(x, y, w, h, fill="none", stroke="#444444")
    for frac, v in ((0.0, vmax), (0.5, 0.0), (1.0, -vmax)):
        canvas.text(x + w + 5, y + frac * h + 3.5, _tick_label(v), size=10)


def legend(canvas: SvgCanvas, x: float, y: float,
           entries: Sequence[Tuple[str, str, str]]) -> None:
    """Rows of (label, color, kind) with kind in {'line', 'dot'}."""
    for i, (label, color, kind) in enumerate(entries):
        row = y + 16 * i
        if kind == "dot":
            canvas.circle(x + 9, row - 3.5, 3.0, fill=color)
        else:
            canvas.line(x, row - 3.5, x + 18, row - 3.5, stroke=color, width=2.5)
        canvas.text(x + 24, row, label, size=11)


def regression_panel(path, x, y_data, y_true, y_cdnn, y_qdnn, title: str,
                     note: str = "") -> None:
    """Two panels: predicted curves over the data, and the deviation of
    each family's curve from the truth."""
    x = np.asarray(x, dtype=np.float64)
    series = {name: np.asarray(v, dtype=np.float64) for name, v in
              (("data", y_data), ("true", y_true),
               ("cdnn", y_cdnn), ("qdnn", y_qdnn))}
    canvas = SvgCanvas(900, 430)
    x_range = nice_range(x)
    left = Axes(x_range, nice_range(np.concatenate(list(series.values()))),
                (60, 50, 360, 300))
    res_c = series["cdnn"] - series["true"]
    res_q = series["qdnn"] - series["true"]
    right = Axes(x_range, nice_range(np.concatenate([res_c, res_q, [0.0]])),
                 (540, 50, 300, 300))
    for px_, py_ in left.points(x, series["data"]):
        canvas.circle(px_, py_, 2.3, fill="#aaaaaa")
    canvas.polyline(left.points(x, series["true"]), stroke="#222222", width=2.0)
    canvas.polyline(left.points(x, series["cdnn"]), stroke=PALETTE[0], width=2.0)
    canvas.polyline(left.points(x, series["qdnn"]), stroke=PALETTE[1], width=2.0)
    left.draw_frame(canvas, title=title, xlabel="x", ylabel="y")
    legend(canvas, 70, 66, [("data", "#aaaaaa", "dot"), ("true", "#222222", "line"),
                            ("cdnn", PALETTE[0], "line"), ("qdnn", PALETTE[1], "line")])
    zero = right.py(0.0)
    canvas.line(right.px(x_range[0]), zero, right.px(x_range[1]), zero,
                stroke="#888888", dash="4,3")
    canvas.polyline(right.points(x, res_c), stroke=PALETTE[0], width=2.0)
    canvas.polyline(right.points(x, res_q), stroke=PALETTE[1], width=2.0)
    right.draw_frame(canvas, title="deviation from true curve", xlabel="x",
                     ylabel="prediction - true")
    if note:
        canvas.text(60, 415, note, size=11, fill="#555555")
    canvas.save(path)


def regime_map(path, grid: GridField, primary_contours, secondary_contours,
               title: str, stats_lines: Sequence[str], xlabel: str, ylabel: str,
               legend_labels: Tuple[str, str] = ("observed boundary",
                                                 "predicted boundary"),
               vmax: Optional[float] = None) -> None:
    """Masked heatmap with two families of zero-level contours (black for
    the observed field, red for the predicted one) and a statistics inset."""
    canvas = SvgCanvas(660, 540)
    axes = Axes((float(grid.x_axis[0]), float(grid.x_axis[-1])),
                (float(grid.y_axis[0]), float(grid.y_axis[-1])),
                (70, 60, 430, 390))
    used_vmax = heatmap(canvas, axes, grid, vmax=vmax)
    for poly in primary_contours:
        canvas.polyline(axes.points(poly[:, 0], poly[:, 1]),
                        stroke="#000000", width=2.2)
    for poly in secondary_contours:
        canvas.polyline(axes.points(poly[:, 0], poly[:, 1]),
                        stroke="#d62728", width=2.2, dash="6,3")
    axes.draw_frame(canvas, title=title, xlabel=xlabel, ylabel=ylabel)
    colorbar(canvas, 525, 60, 16, 390, used_vmax)
    if stats_lines:
        box_h = 14 * len(stats_lines) + 12
        canvas.rect(76, 66, 215, box_h, fill="#ffffff", stroke="#777777",
                    opacity=0.88)
        for i, line in enumerate(stats_lines):
            canvas.text(84, 84 + 14 * i, line, size=10.5)
    legend(canvas, 70, 492, [(legend_labels[0], "#000000", "line"),
                             (legend_labels[1], "#d62728", "line")])
    canvas.save(path)


def trend_panel(path, groups, title: str, xlabel: str, ylabel: str,
                note: str = "") -> None:
    """Scatter plus smoothed trend per group: entries are
    (label, ts, xis, grid_or_None, trend_or_None)."""
    canvas = SvgCanvas(660, 470)
    all_t = np.concatenate([np.asarray(g[1], dtype=np.float64) for g in groups])
    all_y = [np.asarray(g[2], dtype=np.float64) for g in groups]
    all_y += [np.asarray(g[4], dtype=np.float64) for g in groups if g[4] is not None]
    axes = Axes(nice_range(all_t), nice_range(np.concatenate(all_y + [[0.0]])),
                (70, 50, 520, 330))
    zero = axes.py(0.0)
    canvas.line(axes.px(axes.x_range[0]), zero, axes.px(axes.x_range[1]), zero,
                stroke="#888888", dash="4,3")
    entries = []
    for i, (label, ts, xis, grid, trend) in enumerate(groups):
        color = PALETTE[i % len(PALETTE)]
        for px_, py_ in axes.points(ts, xis):
            canvas.circle(px_, py_, 3.0, fill=color)
        if grid is not None and trend is not None:
            canvas.polyline(axes.points(grid, trend), stroke=color, width=2.2)
        entries.append((label, color, "dot"))
    axes.draw_frame(canvas, title=title, xlabel=xlabel, ylabel=ylabel)
    legend(canvas, 78, 66, entries)
    if note:
        canvas.text(70, 440, note, size=11, fill="#555555")
    canvas.save(path)
