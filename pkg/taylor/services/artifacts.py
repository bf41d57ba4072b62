# taylor/services/artifacts.py
# Flat-file outputs: CSV with 17 significant digits, sorted JSON, SVG polylines via templates.
# Every file is written to a temp file in the target directory and renamed into place.

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from pathlib import Path

import numpy as np
from django.core.serializers.json import DjangoJSONEncoder
from django.template.loader import render_to_string

logger = logging.getLogger(__name__)

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
MAX_POLYLINE_POINTS = 1500


def write_atomic(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug("wrote %s", path)
    return path


def format_number(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def csv_text(columns: dict[str, np.ndarray]) -> str:
    """Header row plus one row per index; all columns must have the same length."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise ValueError(f"columns differ in length: {sorted(lengths)}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*arrays):
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, columns: dict[str, np.ndarray]) -> Path:
    return write_atomic(path, csv_text(columns))


def read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}


def json_text(data) -> str:
    return json.dumps(data, cls=DjangoJSONEncoder, sort_keys=True, indent=2) + "\n"


def write_json(path: Path, data) -> Path:
    return write_atomic(path, json_text(data))


# ------------------------------- SVG -------------------------------

def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if 1e-3 <= abs(v) < 1e4:
        return f"{v:.4g}"
    return f"{v:.2e}"


def render_svg(title: str, x: np.ndarray, series: dict[str, np.ndarray],
               x_label: str = "x", y_label: str = "", width: int = 720, height: int = 440) -> str:
    """Polyline plot of every series against x with axes, ticks and a legend."""
    x = np.asarray(x, dtype=float)
    stride = max(1, math.ceil(len(x) / MAX_POLYLINE_POINTS))
    idx = np.unique(np.concatenate((np.arange(0, len(x), stride), [len(x) - 1])))
    ys = {name: np.asarray(v, dtype=float) for name, v in series.items()}
    x_lo, x_hi = float(x.min()), float(x.max())
    y_lo = float(min(v.min() for v in ys.values()))
    y_hi = float(max(v.max() for v in ys.values()))
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1, y_hi + 1
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1

    left, right, top, bottom = 90, 20, 40, 60
    plot_w, plot_h = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v):
        return top + (y_hi - v) / (y_hi - y_lo) * plot_h

    lines = []
    for k, (name, v) in enumerate(ys.items()):
        points = " ".join(f"{sx(px):.2f},{sy(py):.2f}" for px, py in zip(x[idx], v[idx]))
        lines.append({"name": name, "points": points, "color": PALETTE[k % len(PALETTE)],
                      "legend_y": top + 16 * k + 12})
    context = {
        "title": title, "width": width, "height": height,
        "left": left, "top": top, "right_edge": left + plot_w, "bottom_edge": top + plot_h,
        "x_label": x_label, "y_label": y_label,
        "x_ticks": [{"pos": sx(v), "label": _tick_label(v)} for v in _ticks(x_lo, x_hi)],
        "y_ticks": [{"pos": sy(v), "label": _tick_label(v)} for v in _ticks(y_lo, y_hi)],
        "lines": lines,
        "legend_x": left + plot_w - 170,
    }
    return render_to_string("taylor/plot.svg", context)


def write_svg(path: Path, title: str, x, series: dict, **kwargs) -> Path:
    return write_atomic(path, render_svg(title, x, series, **kwargs))
