"""Standalone SVG charts built from the emitted result tables.

No plotting library and no embedded fonts: text uses the generic
``sans-serif`` family so the files render anywhere. Coordinates are written
with fixed precision so identical tables give identical bytes.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

from rdlocal.errors import RenderError

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=55)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _num(value) -> float | None:
    if value is None or value == "NA" or value == "":
        return None
    v = float(value)
    return v if math.isfinite(v) else None


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    k = 0
    while start + k * step <= hi + 1e-9 * step:
        ticks.append(round(start + k * step, 10))
        k += 1
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class Chart:
    def __init__(self, title: str, xlabel: str, ylabel: str, xrange, yrange):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.x0, self.x1 = xrange
        self.y0, self.y1 = yrange
        if self.x1 <= self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x0 + 0.5
        if self.y1 <= self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y0 + 0.5
        self.body: list[str] = []
        self.legend: list[tuple[str, str, str]] = []

    def px(self, x: float) -> float:
        w = WIDTH - MARGIN["left"] - MARGIN["right"]
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * w

    def py(self, y: float) -> float:
        h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        return MARGIN["top"] + h - (y - self.y0) / (self.y1 - self.y0) * h

    def line(self, xs: Sequence[float], ys: Sequence[float], color: str, label: str | None = None,
             markers: bool = True, dash: str | None = None, cls: str = "series"):
        pts = [(x, y) for x, y in zip(xs, ys) if x is not None and y is not None]
        if not pts:
            return
        path = " ".join(f"{_fmt(self.px(x))},{_fmt(self.py(y))}" for x, y in pts)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.body.append(f'<polyline class="{cls}" points="{path}" fill="none" stroke="{color}" '
                         f'stroke-width="1.8"{extra}/>')
        if markers:
            for x, y in pts:
                self.body.append(f'<circle cx="{_fmt(self.px(x))}" cy="{_fmt(self.py(y))}" r="2.5" fill="{color}"/>')
        if label:
            self.legend.append((label, color, "line"))

    def points(self, xs, ys, color: str, label: str | None = None, r: float = 2.5):
        for x, y in zip(xs, ys):
            self.body.append(f'<circle class="point" cx="{_fmt(self.px(x))}" cy="{_fmt(self.py(y))}" '
                             f'r="{r}" fill="{color}" fill-opacity="0.55"/>')
        if label:
            self.legend.append((label, color, "point"))

    def hrule(self, y: float, color: str = "#444444", label: str | None = None, cls: str = "hrule"):
        self.body.append(f'<line class="{cls}" data-y="{y!r}" x1="{_fmt(self.px(self.x0))}" '
                         f'y1="{_fmt(self.py(y))}" x2="{_fmt(self.px(self.x1))}" y2="{_fmt(self.py(y))}" '
                         f'stroke="{color}" stroke-width="1.2" stroke-dasharray="6 4"/>')
        if label:
            self.legend.append((label, color, "dash"))

    def vrule(self, x: float, color: str = "#444444", label: str | None = None, cls: str = "vrule"):
        self.body.append(f'<line class="{cls}" data-x="{x!r}" x1="{_fmt(self.px(x))}" '
                         f'y1="{_fmt(self.py(self.y0))}" x2="{_fmt(self.px(x))}" y2="{_fmt(self.py(self.y1))}" '
                         f'stroke="{color}" stroke-width="1.2" stroke-dasharray="3 3"/>')
        if label:
            self.legend.append((label, color, "dash"))

    def segment(self, x0, y0, x1, y1, color: str, cls: str = "segment", width: float = 2.5, data: str = ""):
        self.body.append(f'<line class="{cls}"{data} x1="{_fmt(self.px(x0))}" y1="{_fmt(self.py(y0))}" '
                         f'x2="{_fmt(self.px(x1))}" y2="{_fmt(self.py(y1))}" stroke="{color}" '
                         f'stroke-width="{width}"/>')

    def text(self, x, y, s, color="#222222"):
        self.body.append(f'<text x="{_fmt(self.px(x))}" y="{_fmt(self.py(y))}" font-size="10" '
                         f'fill="{color}">{escape(s)}</text>')

    def render(self) -> str:
        left, top = MARGIN["left"], MARGIN["top"]
        right, bottom = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
        out = [
            '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">',
            f'<title>{escape(self.title)}</title>',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            f'<text x="{WIDTH / 2:.2f}" y="22" font-size="14" text-anchor="middle">{escape(self.title)}</text>',
            f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" fill="none" stroke="#000000"/>',
        ]
        for t in _nice_ticks(self.x0, self.x1):
            out.append(f'<line x1="{_fmt(self.px(t))}" y1="{bottom}" x2="{_fmt(self.px(t))}" y2="{bottom + 5}" stroke="#000000"/>')
            out.append(f'<text x="{_fmt(self.px(t))}" y="{bottom + 17}" font-size="10" text-anchor="middle">{t:g}</text>')
        for t in _nice_ticks(self.y0, self.y1):
            out.append(f'<line x1="{left - 5}" y1="{_fmt(self.py(t))}" x2="{left}" y2="{_fmt(self.py(t))}" stroke="#000000"/>')
            out.append(f'<text x="{left - 8}" y="{_fmt(self.py(t) + 3)}" font-size="10" text-anchor="end">{t:g}</text>')
        out.append(f'<text x="{(left + right) / 2:.2f}" y="{HEIGHT - 15}" font-size="12" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{(top + bottom) / 2:.2f}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 16 {(top + bottom) / 2:.2f})">{escape(self.ylabel)}</text>')
        out.append(f'<clipPath id="plot"><rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}"/></clipPath>')
        out.append('<g clip-path="url(#plot)">')
        out.extend(self.body)
        out.append("</g>")
        for i, (label, color, kind) in enumerate(self.legend):
            y = top + 10 + 16 * i
            x = right + 12
            if kind == "point":
                out.append(f'<circle cx="{x + 8}" cy="{y}" r="3" fill="{color}"/>')
            else:
                dash = ' stroke-dasharray="6 4"' if kind == "dash" else ""
                out.append(f'<line x1="{x}" y1="{y}" x2="{x + 16}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>')
            out.append(f'<text x="{x + 22}" y="{y + 4}" font-size="10">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _span(values: Iterable[float | None], pad: float = 0.05, include: Sequence[float] = ()) -> tuple[float, float]:
    vals = [v for v in values if v is not None] + list(include)
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    d = (hi - lo) or max(abs(hi), 1.0)
    return lo - pad * d, hi + pad * d


def _require(tables: dict, name: str) -> list[dict]:
    rows = tables.get(name)
    if not rows:
        raise RenderError(f"cannot render figures: table {name!r} is missing or empty")
    return rows


def scan_figure(rows: list[dict], threshold: float) -> str:
    xs = [_num(r["half_width"]) for r in rows]
    chart = Chart("Covariate balance by window", "window half-width", "balance p-value",
                  _span(xs, 0.02), (0.0, 1.0))
    chart.line(xs, [_num(r["min_pvalue"]) for r in rows], PALETTE[0], "min p-value")
    covs = [k for k in rows[0] if k.startswith("p_")]
    if len(covs) > 1:
        for i, k in enumerate(covs):
            chart.line(xs, [_num(r[k]) for r in rows], PALETTE[(i + 2) % len(PALETTE)], k[2:], markers=False)
    chart.hrule(threshold, PALETTE[1], f"threshold {threshold:g}", cls="threshold")
    return chart.render()


def scatter_figure(rows: list[dict], outcome: str, window: tuple[float, float] | None) -> str:
    xs = [_num(r["running"]) for r in rows]
    ys = [_num(r["value"]) for r in rows]
    chart = Chart(f"{outcome} around the cutoff", "margin (years from cutoff)", outcome,
                  _span(xs), _span(ys))
    ctrl = [(x, y) for x, y in zip(xs, ys) if x < 0]
    trt = [(x, y) for x, y in zip(xs, ys) if x >= 0]
    chart.points([p[0] for p in ctrl], [p[1] for p in ctrl], PALETTE[0], "control")
    chart.points([p[0] for p in trt], [p[1] for p in trt], PALETTE[1], "treated")
    if window is not None:
        lo, hi = window
        for side, color, (a, b) in (("control", PALETTE[0], (lo, 0.0)), ("treated", PALETTE[1], (0.0, hi))):
            vals = [y for x, y in zip(xs, ys) if (a <= x < b if side == "control" else a <= x <= b)]
            if vals:
                m = sum(vals) / len(vals)
                chart.segment(a, m, b, m, color, cls=f"mean-{side}", width=3.0, data=f' data-mean="{m!r}"')
        chart.legend.append(("side mean (window)", "#000000", "line"))
    chart.vrule(0.0, "#000000", "cutoff", cls="cutoff")
    return chart.render()


def sensitivity_figure(rows: list[dict], outcome: str) -> str:
    hw = [_num(r["half_width"]) for r in rows]
    lo = [_num(r["ci_low"]) for r in rows]
    hi = [_num(r["ci_high"]) for r in rows]
    chart = Chart(f"{outcome}: accepted effects by window", "window half-width", "tau (outcome units)",
                  _span(hw, 0.25), _span(lo + hi, include=(0.0,)))
    for x, a, b in zip(hw, lo, hi):
        if a is None or b is None:
            chart.text(x, chart.y0 + 0.05 * (chart.y1 - chart.y0), "NA")
            continue
        chart.segment(x, a, x, b, PALETTE[0], cls="ci", width=4.0)
    chart.legend.append(("accepted tau interval", PALETTE[0], "line"))
    chart.hrule(0.0, "#444444", "tau = 0")
    return chart.render()


def bounds_figure(rows: list[dict], alpha: float) -> str:
    by_outcome: dict[str, list[dict]] = {}
    for r in rows:
        by_outcome.setdefault(r.get("outcome", ""), []).append(r)
    gs = [_num(r["gamma"]) for r in rows]
    chart = Chart("p-value bounds under unequal assignment odds", "gamma", "p-value",
                  _span(gs, 0.05), (0.0, 1.0))
    for i, (name, rs) in enumerate(by_outcome.items()):
        color = PALETTE[i % len(PALETTE)]
        g = [_num(r["gamma"]) for r in rs]
        chart.line(g, [_num(r["p_upper"]) for r in rs], color, f"{name} upper".strip())
        chart.line(g, [_num(r["p_lower"]) for r in rs], color, f"{name} lower".strip(), dash="4 3")
    chart.hrule(alpha, "#444444", f"alpha {alpha:g}")
    return chart.render()


def render_figures(tables: dict[str, list[dict]], output_dir, *, threshold: float = 0.15,
                   alpha: float = 0.05, windows: dict[str, tuple[float, float]] | None = None) -> list[Path]:
    """Write the four figure families; returns the written paths in order.

    ``tables`` needs ``scan``, ``scatter``, ``sensitivity`` (accepted-tau hull
    per window) and ``bounds``. Rows may carry strings (as read back from CSV).
    """
    output_dir = Path(output_dir)
    scan = _require(tables, "scan")
    scatter = _require(tables, "scatter")
    sens = _require(tables, "sensitivity")
    bounds = _require(tables, "bounds")
    windows = windows or {}
    written = []

    def put(name: str, svg: str):
        path = output_dir / name
        path.write_text(svg, encoding="utf-8")
        written.append(path)

    put("fig1_window_scan.svg", scan_figure(scan, threshold))
    for outcome in dict.fromkeys(r["outcome"] for r in scatter):
        put(f"fig2_rd_{outcome}.svg",
            scatter_figure([r for r in scatter if r["outcome"] == outcome], outcome, windows.get(outcome)))
    for outcome in dict.fromkeys(r["outcome"] for r in sens):
        put(f"fig3_sensitivity_{outcome}.svg",
            sensitivity_figure([r for r in sens if r["outcome"] == outcome], outcome))
    put("fig4_bounds.svg", bounds_figure(bounds, alpha))
    return written
