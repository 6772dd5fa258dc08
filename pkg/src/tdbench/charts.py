"""Deterministic SVG renderings of a pipeline bundle.

Charts are views over the CSV tables, never sources: every number drawn
here is read back from ``sizes.csv``, ``ap.csv``, or ``delays.csv`` in the
bundle directory.  Rendering is purely a function of those files — fixed
canvas, fixed palette, floats formatted with a fixed precision — so two
renders of one bundle are byte-identical.

Four charts are produced: compressed-size box plots per codec config,
average-precision bars per config and class, mean end-to-end delay bars
per config (with and without codec time), and a required-rate versus AP
scatter on a log-rate axis.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

from .errors import ConfigError
from .pipeline import atomic_write_text

__all__ = ["render_charts", "CHART_FILES"]

CHART_FILES = {
    "sizes": "sizes_vs_config.svg",
    "ap": "ap_vs_config.svg",
    "delay": "delay_vs_config.svg",
    "rate_vs_ap": "rate_vs_ap.svg",
}

_W, _H = 720, 420
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 40, 90
_PLOT_W = _W - _MARGIN_L - _MARGIN_R
_PLOT_H = _H - _MARGIN_T - _MARGIN_B
_SERIES_COLORS = ("#4878a8", "#b5651d")
_AXIS_COLOR = "#333333"


def _num(v: float) -> str:
    """Fixed-precision float formatting so output bytes are stable."""
    return format(float(v), ".6g")


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def _text(x: float, y: float, s: str, *, anchor: str = "middle", size: int = 11,
          rotate: float | None = None, color: str = _AXIS_COLOR) -> str:
    transform = (
        f' transform="rotate({_num(rotate)} {_num(x)} {_num(y)})"' if rotate else ""
    )
    return (
        f'<text x="{_num(x)}" y="{_num(y)}" text-anchor="{anchor}" '
        f'font-family="sans-serif" font-size="{size}" fill="{color}"{transform}>'
        f"{_esc(s)}</text>"
    )


def _line(x1: float, y1: float, x2: float, y2: float, color: str = _AXIS_COLOR,
          width: float = 1.0) -> str:
    return (
        f'<line x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" y2="{_num(y2)}" '
        f'stroke="{color}" stroke-width="{_num(width)}"/>'
    )


def _rect(x: float, y: float, w: float, h: float, fill: str,
          stroke: str = "none") -> str:
    return (
        f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(w)}" height="{_num(h)}" '
        f'fill="{fill}" stroke="{stroke}"/>'
    )


def _circle(x: float, y: float, r: float, fill: str) -> str:
    return f'<circle cx="{_num(x)}" cy="{_num(y)}" r="{_num(r)}" fill="{fill}"/>'


def _svg(title: str, elements: Sequence[str]) -> str:
    body = "\n".join(elements)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">\n'
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>\n'
        f"{_text(_W / 2, 22, title, size=14)}\n{body}\n</svg>\n"
    )


def _nice_step(span: float) -> float:
    if span <= 0:
        return 1.0
    raw = span / 5.0
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            return mult * mag
    return 10.0 * mag


def _y_axis(vmax: float, label: str) -> tuple[list[str], float]:
    """Axis lines, ticks, and label; returns (elements, scale max)."""
    vmax = max(vmax, 1e-12)
    step = _nice_step(vmax)
    top = step * math.ceil(vmax / step)
    elements = [
        _line(_MARGIN_L, _MARGIN_T, _MARGIN_L, _MARGIN_T + _PLOT_H),
        _line(_MARGIN_L, _MARGIN_T + _PLOT_H, _MARGIN_L + _PLOT_W, _MARGIN_T + _PLOT_H),
        _text(18, _MARGIN_T + _PLOT_H / 2, label, rotate=-90.0),
    ]
    tick = 0.0
    while tick <= top * (1 + 1e-9):
        y = _MARGIN_T + _PLOT_H * (1 - tick / top)
        elements.append(_line(_MARGIN_L - 4, y, _MARGIN_L, y))
        elements.append(_text(_MARGIN_L - 8, y + 4, _num(tick), anchor="end", size=10))
        elements.append(
            _line(_MARGIN_L, y, _MARGIN_L + _PLOT_W, y, color="#dddddd", width=0.5)
        )
        tick += step
    return elements, top


def _x_slots(labels: Sequence[str]) -> list[float]:
    """Center x of each category slot, plus rotated tick labels."""
    n = max(len(labels), 1)
    return [_MARGIN_L + _PLOT_W * (i + 0.5) / n for i in range(n)]


def _x_labels(labels: Sequence[str], centers: Sequence[float]) -> list[str]:
    y = _MARGIN_T + _PLOT_H + 14
    return [
        _text(x, y, lab, anchor="end", size=10, rotate=-45.0)
        for lab, x in zip(labels, centers)
    ]


def _read_table(bundle_dir: Path, filename: str) -> list[dict[str, str]]:
    path = bundle_dir / filename
    if not path.exists():
        raise ConfigError(f"missing table {filename} in {bundle_dir}")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _quartiles(values: list[float]) -> tuple[float, float, float, float, float]:
    vs = sorted(values)
    n = len(vs)

    def q(p: float) -> float:
        if n == 1:
            return vs[0]
        pos = p * (n - 1)
        lo = math.floor(pos)
        hi = math.ceil(pos)
        return vs[lo] + (vs[hi] - vs[lo]) * (pos - lo)

    return vs[0], q(0.25), q(0.5), q(0.75), vs[-1]


def _config_order(rows: list[dict[str, str]]) -> list[str]:
    seen: list[str] = []
    for row in rows:
        if row["config"] not in seen:
            seen.append(row["config"])
    return seen


def _chart_sizes(rows: list[dict[str, str]]) -> str:
    configs = _config_order(rows)
    by_config = {
        c: [float(r["compressed_bytes"]) / 1000.0 for r in rows if r["config"] == c]
        for c in configs
    }
    vmax = max(max(v) for v in by_config.values())
    axis, top = _y_axis(vmax, "compressed size (KB)")
    centers = _x_slots(configs)
    elements = axis + _x_labels(configs, centers)
    half = min(14.0, _PLOT_W / (2.5 * len(configs)))

    def y(v: float) -> float:
        return _MARGIN_T + _PLOT_H * (1 - v / top)

    for c, x in zip(configs, centers):
        lo, q1, med, q3, hi = _quartiles(by_config[c])
        elements.append(_line(x, y(lo), x, y(q1)))
        elements.append(_line(x, y(q3), x, y(hi)))
        elements.append(_line(x - half / 2, y(lo), x + half / 2, y(lo)))
        elements.append(_line(x - half / 2, y(hi), x + half / 2, y(hi)))
        elements.append(
            _rect(x - half, y(q3), 2 * half, max(y(q1) - y(q3), 0.5),
                  fill="#cfe0f0", stroke=_SERIES_COLORS[0])
        )
        elements.append(_line(x - half, y(med), x + half, y(med),
                              color=_SERIES_COLORS[0], width=2.0))
    return _svg("Compressed frame size by codec configuration", elements)


def _grouped_bars(configs: list[str], series: dict[str, list[float]],
                  title: str, ylabel: str) -> str:
    vmax = max((max(vs) if vs else 0.0) for vs in series.values())
    axis, top = _y_axis(vmax, ylabel)
    centers = _x_slots(configs)
    elements = axis + _x_labels(configs, centers)
    names = list(series)
    slot = _PLOT_W / max(len(configs), 1)
    bar = min(16.0, slot / (len(names) + 1))

    def y(v: float) -> float:
        return _MARGIN_T + _PLOT_H * (1 - v / top)

    for si, name in enumerate(names):
        color = _SERIES_COLORS[si % len(_SERIES_COLORS)]
        offset = (si - (len(names) - 1) / 2) * bar
        for x, v in zip(centers, series[name]):
            elements.append(
                _rect(x + offset - bar / 2, y(v), bar,
                      _MARGIN_T + _PLOT_H - y(v), fill=color)
            )
        lx = _MARGIN_L + _PLOT_W - 150
        ly = _MARGIN_T + 8 + 16 * si
        elements.append(_rect(lx, ly - 9, 10, 10, fill=color))
        elements.append(_text(lx + 16, ly, name, anchor="start", size=11))
    return _svg(title, elements)


def _chart_ap(rows: list[dict[str, str]]) -> str:
    configs = _config_order(rows)
    classes: list[str] = []
    for row in rows:
        if row["class"] not in classes:
            classes.append(row["class"])
    series = {
        cls: [
            next(
                float(r["frame_mean_ap"])
                for r in rows
                if r["config"] == c and r["class"] == cls
            )
            for c in configs
        ]
        for cls in classes
    }
    return _grouped_bars(
        configs, series, "Average precision by codec configuration", "frame-mean AP"
    )


def _chart_delay(rows: list[dict[str, str]]) -> str:
    configs = _config_order(rows)
    series = {
        "total": [
            float(next(r for r in rows if r["config"] == c)["mean_total_ms_measured"])
            for c in configs
        ],
        "excl. codec": [
            float(
                next(r for r in rows if r["config"] == c)[
                    "mean_total_excl_codec_ms_measured"
                ]
            )
            for c in configs
        ],
    }
    return _grouped_bars(
        configs, series, "Mean end-to-end delay by codec configuration", "delay (ms)"
    )


def _chart_rate_vs_ap(delay_rows: list[dict[str, str]],
                      ap_rows: list[dict[str, str]]) -> str:
    configs = _config_order(delay_rows)
    rates = {c: float(next(r for r in delay_rows if r["config"] == c)["required_rate_mbps"])
             for c in configs}
    aps = {
        c: float(
            next(
                r for r in ap_rows if r["config"] == c and r["class"] == "Car"
            )["frame_mean_ap"]
        )
        for c in configs
    }
    lo = math.floor(math.log10(min(rates.values())))
    hi = math.ceil(math.log10(max(rates.values())))
    if hi == lo:
        hi = lo + 1
    axis, top = _y_axis(max(max(aps.values()), 0.05), "Car frame-mean AP")
    elements = list(axis)

    def x(rate: float) -> float:
        return _MARGIN_L + _PLOT_W * (math.log10(rate) - lo) / (hi - lo)

    def y(v: float) -> float:
        return _MARGIN_T + _PLOT_H * (1 - v / top)

    for d in range(lo, hi + 1):
        px = _MARGIN_L + _PLOT_W * (d - lo) / (hi - lo)
        elements.append(_line(px, _MARGIN_T + _PLOT_H, px, _MARGIN_T + _PLOT_H + 4))
        elements.append(
            _text(px, _MARGIN_T + _PLOT_H + 18, f"1e{d}", size=10)
        )
    elements.append(
        _text(_MARGIN_L + _PLOT_W / 2, _H - 12, "required data rate (Mbps, log scale)")
    )
    for c in configs:
        elements.append(_circle(x(rates[c]), y(aps[c]), 4.0, _SERIES_COLORS[0]))
        elements.append(
            _text(x(rates[c]), y(aps[c]) - 8, c, size=9)
        )
    return _svg("Required data rate versus detection quality", elements)


def render_charts(bundle_dir: str | Path, out_dir: str | Path | None = None) -> dict[str, Path]:
    """Render the four bundle charts; returns chart name → file path.

    ``bundle_dir`` must hold the pipeline CSV tables; a missing table is
    an error naming it.  Charts land next to the tables unless ``out_dir``
    says otherwise.  Re-rendering an unchanged bundle reproduces the SVG
    files byte-for-byte.
    """
    bundle = Path(bundle_dir)
    target = Path(out_dir) if out_dir is not None else bundle
    target.mkdir(parents=True, exist_ok=True)

    sizes = _read_table(bundle, "sizes.csv")
    ap_rows = _read_table(bundle, "ap.csv")
    delays = _read_table(bundle, "delays.csv")
    for name, rows in (("sizes.csv", sizes), ("ap.csv", ap_rows), ("delays.csv", delays)):
        if not rows:
            raise ConfigError(f"table {name} in {bundle} has no rows")

    rendered = {
        "sizes": _chart_sizes(sizes),
        "ap": _chart_ap(ap_rows),
        "delay": _chart_delay(delays),
        "rate_vs_ap": _chart_rate_vs_ap(delays, ap_rows),
    }
    paths: dict[str, Path] = {}
    for name, svg in rendered.items():
        path = target / CHART_FILES[name]
        atomic_write_text(path, svg)
        paths[name] = path
    return paths
