"""CSV tables and standalone SVG figures.

Floats are written with ``repr`` (shortest string that round-trips), so every
CSV parses back to the exact values and re-emits byte for byte. SVGs are
built with ``xml.etree`` and carry no timestamps.
"""
from __future__ import annotations

import csv
import io
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, IoError, ShapeMismatch

KINDS = ("relevance_bars", "scatter_2d", "eigen_spectrum", "bac_curve")

# (glyph name, fill colour) per class, at most 12 classes
PALETTE = (
    ("circle", "#1f77b4"), ("square", "#d62728"), ("triangle", "#2ca02c"),
    ("diamond", "#ff7f0e"), ("invtriangle", "#9467bd"), ("cross", "#8c564b"),
    ("plus", "#e377c2"), ("star", "#7f7f7f"), ("pentagon", "#bcbd22"),
    ("hexagon", "#17becf"), ("ltriangle", "#393b79"), ("rtriangle", "#637939"),
)
MAX_CLASSES = len(PALETTE)

_GLYPHS = {
    "circle": None,
    "square": "-4,-4 4,-4 4,4 -4,4",
    "triangle": "0,-5 4.5,3.5 -4.5,3.5",
    "diamond": "0,-5 5,0 0,5 -5,0",
    "invtriangle": "0,5 4.5,-3.5 -4.5,-3.5",
    "cross": "-4,-2 -2,-4 0,-2 2,-4 4,-2 2,0 4,2 2,4 0,2 -2,4 -4,2 -2,0",
    "plus": "-1.5,-5 1.5,-5 1.5,-1.5 5,-1.5 5,1.5 1.5,1.5 1.5,5 -1.5,5 -1.5,1.5 -5,1.5 -5,-1.5 -1.5,-1.5",
    "star": "0,-5 1.2,-1.6 4.8,-1.5 1.9,0.6 2.9,4 0,2 -2.9,4 -1.9,0.6 -4.8,-1.5 -1.2,-1.6",
    "pentagon": "0,-5 4.8,-1.5 2.9,4 -2.9,4 -4.8,-1.5",
    "hexagon": "0,-5 4.3,-2.5 4.3,2.5 0,5 -4.3,2.5 -4.3,-2.5",
    "ltriangle": "-5,0 3.5,-4.5 3.5,4.5",
    "rtriangle": "5,0 -3.5,-4.5 -3.5,4.5",
}

WIDTH, HEIGHT = 480, 360
MARGIN = dict(left=64, right=16, top=32, bottom=48)


def fmt(x) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    class_names: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if len(self.class_names) > MAX_CLASSES:
            raise DataError(f"at most {MAX_CLASSES} classes can be drawn, got {len(self.class_names)}")


def _write_text(path, text: str):
    try:
        Path(path).write_text(text, encoding="utf-8", newline="")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return Path(path)


def _read_rows(path) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- relevances

RELEVANCE_HEADER = ("iteration", "feature_index", "feature_name", "relevance")


def relevance_csv(profiles, feature_names=None, iterations=None) -> str:
    """CSV text for one relevance profile (diag of Lambda) per iteration.

    ``feature_index`` is 1-based.
    """
    profiles = [np.asarray(p, dtype=float).ravel() for p in profiles]
    if not profiles:
        return _csv_text(RELEVANCE_HEADER, [])
    n = profiles[0].size
    if any(p.size != n for p in profiles):
        raise ShapeMismatch("relevance profiles differ in length")
    names = list(feature_names) if feature_names is not None else [f"x{j + 1}" for j in range(n)]
    if len(names) != n:
        raise ShapeMismatch(f"{len(names)} feature names for {n} features")
    iterations = list(iterations) if iterations is not None else list(range(len(profiles)))
    rows = [
        (it, j + 1, names[j], fmt(p[j]))
        for it, p in zip(iterations, profiles)
        for j in range(n)
    ]
    return _csv_text(RELEVANCE_HEADER, rows)


def emit_relevance_csv(profiles, path, feature_names=None, iterations=None) -> Path:
    return _write_text(path, relevance_csv(profiles, feature_names, iterations))


def parse_relevance_csv(path):
    """Inverse of ``emit_relevance_csv``: (iterations, profiles, feature_names)."""
    rows = _read_rows(path)
    if not rows or tuple(rows[0]) != RELEVANCE_HEADER:
        raise DataError(f"{path}: not a relevance table")
    by_iter: dict[int, list] = {}
    names: dict[int, str] = {}
    for it, j, name, value in rows[1:]:
        by_iter.setdefault(int(it), []).append((int(j), float(value)))
        names[int(j)] = name
    iterations = list(by_iter)
    profiles = [np.array([v for _, v in sorted(by_iter[it])]) for it in iterations]
    return iterations, profiles, [names[j] for j in sorted(names)]


# ---------------------------------------------------------------- BAC tables

ITERATION_HEADER = ("iteration", "bac")
SUMMARY_HEADER = ("dataset", "n_p", "pipeline", "mean", "std", "dim")
REPEAT_HEADER = ("dataset", "n_p", "pipeline", "repeat", "bac", "dim")


def bac_table(items) -> str:
    """Per-iteration table for IRMA records, Table-1 layout for EvalReports."""
    items = list(items)
    if not items:
        raise DataError("nothing to tabulate")
    if hasattr(items[0], "pipeline"):
        rows = [
            (r.dataset, r.prototypes_per_class, r.pipeline, fmt(r.mean), fmt(r.std),
             "" if r.dim_mode is None else r.dim_mode)
            for r in items
        ]
        return _csv_text(SUMMARY_HEADER, rows)
    return _csv_text(ITERATION_HEADER, [(r.index, fmt(r.bac)) for r in items])


def emit_bac_table(items, path) -> Path:
    return _write_text(path, bac_table(items))


def parse_bac_table(path) -> list[dict]:
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty table")
    header = tuple(rows[0])
    out = []
    if header == ITERATION_HEADER:
        for it, bac in rows[1:]:
            out.append({"iteration": int(it), "bac": float(bac)})
    elif header == SUMMARY_HEADER:
        for ds, n_p, p, mean, std, dim in rows[1:]:
            out.append({"dataset": ds, "n_p": int(n_p), "pipeline": p, "mean": float(mean),
                        "std": float(std), "dim": int(dim) if dim else None})
    else:
        raise DataError(f"{path}: unrecognised header {header}")
    return out


def repeats_csv(reports) -> str:
    rows = []
    for r in reports:
        dims = list(r.dims) or [""] * r.repeats
        for i, (b, d) in enumerate(zip(r.bacs, dims)):
            rows.append((r.dataset, r.prototypes_per_class, r.pipeline, i, fmt(b), d))
    return _csv_text(REPEAT_HEADER, rows)


def emit_repeats_csv(reports, path) -> Path:
    return _write_text(path, repeats_csv(reports))


def summary_dict(reports) -> dict:
    """dataset -> n_p -> pipeline -> {mean, std, dim, repeats}."""
    doc: dict = {}
    for r in reports:
        cell = doc.setdefault(r.dataset, {}).setdefault(str(r.prototypes_per_class), {})
        cell[r.pipeline] = {"mean": r.mean, "std": r.std, "dim": r.dim_mode, "repeats": r.repeats}
    return doc


def emit_summary_json(reports, path) -> Path:
    return _write_text(path, json.dumps(summary_dict(reports), indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------- SVG

def nice_ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    """Round tick values covering [lo, hi]."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DataError("axis range is not finite")
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    stop = math.ceil(hi / step) * step
    return np.round(np.arange(start, stop + 0.5 * step, step), 12)


def _tick_label(v: float) -> str:
    s = f"{v:.6g}"
    return "0" if s == "-0" else s


class _Canvas:
    def __init__(self, spec: FigureSpec, xticks, yticks, xcats=None):
        self.root = ET.Element("svg", {
            "xmlns": "http://www.w3.org/2000/svg",
            "width": str(WIDTH), "height": str(HEIGHT),
            "viewBox": f"0 0 {WIDTH} {HEIGHT}",
            "data-kind": spec.kind,
        })
        self.x0, self.x1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.y0, self.y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
        self.xr = (float(xticks[0]), float(xticks[-1]))
        self.yr = (float(yticks[0]), float(yticks[-1]))
        if spec.title:
            ET.SubElement(self.root, "text", {"x": str(WIDTH / 2), "y": "20", "text-anchor": "middle",
                                              "font-size": "14"}).text = spec.title
        self._axes(spec, xticks, yticks, xcats)

    def sx(self, x):
        lo, hi = self.xr
        return self.x0 + (x - lo) / (hi - lo) * (self.x1 - self.x0)

    def sy(self, y):
        lo, hi = self.yr
        return self.y0 - (y - lo) / (hi - lo) * (self.y0 - self.y1)

    def _axes(self, spec, xticks, yticks, xcats):
        g = ET.SubElement(self.root, "g", {"class": "axes", "stroke": "black", "font-size": "10"})
        ET.SubElement(g, "line", _num(x1=self.x0, y1=self.y0, x2=self.x1, y2=self.y0))
        ET.SubElement(g, "line", _num(x1=self.x0, y1=self.y0, x2=self.x0, y2=self.y1))
        for i, t in enumerate(xticks):
            x = self.sx(t)
            ET.SubElement(g, "line", _num(x1=x, y1=self.y0, x2=x, y2=self.y0 + 4))
            label = xcats[i] if xcats is not None else _tick_label(t)
            ET.SubElement(g, "text", {**_num(x=x, y=self.y0 + 16), "text-anchor": "middle",
                                      "stroke": "none", "class": "xtick"}).text = label
        for t in yticks:
            y = self.sy(t)
            ET.SubElement(g, "line", _num(x1=self.x0 - 4, y1=y, x2=self.x0, y2=y))
            ET.SubElement(g, "text", {**_num(x=self.x0 - 6, y=y + 3), "text-anchor": "end",
                                      "stroke": "none", "class": "ytick"}).text = _tick_label(t)
        if spec.xlabel:
            ET.SubElement(g, "text", {**_num(x=(self.x0 + self.x1) / 2, y=HEIGHT - 10),
                                      "text-anchor": "middle", "stroke": "none"}).text = spec.xlabel
        if spec.ylabel:
            y = (self.y0 + self.y1) / 2
            ET.SubElement(g, "text", {**_num(x=14, y=y), "text-anchor": "middle", "stroke": "none",
                                      "transform": f"rotate(-90 14 {y:.2f})"}).text = spec.ylabel

    def tostring(self) -> str:
        ET.indent(self.root)
        return ET.tostring(self.root, encoding="unicode", xml_declaration=True) + "\n"


def _num(**kw) -> dict:
    return {k: f"{v:.2f}" for k, v in kw.items()}


def _range(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0, 1.0
    return float(values.min()), float(values.max())


def scatter_svg(points, labels, spec: FigureSpec) -> str:
    """One ``<use class="marker">`` per point referencing a per-class glyph."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2) if np.size(points) else np.zeros((0, 2))
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size != pts.shape[0]:
        raise ShapeMismatch(f"{labels.size} labels for {pts.shape[0]} points")
    if not np.all(np.isfinite(pts)):
        raise DataError("scatter points must be finite")
    n_classes = max(len(spec.class_names), int(labels.max()) if labels.size else 0)
    if n_classes > MAX_CLASSES:
        raise DataError(f"at most {MAX_CLASSES} classes can be drawn, got {n_classes}")
    c = _Canvas(spec, nice_ticks(*_range(pts[:, 0])), nice_ticks(*_range(pts[:, 1])))
    defs = ET.Element("defs")
    c.root.insert(0, defs)
    for k in range(n_classes):
        glyph, colour = PALETTE[k]
        sym = ET.SubElement(defs, "symbol", {"id": f"glyph-{glyph}", "overflow": "visible"})
        attrs = {"fill": colour, "fill-opacity": "0.7", "stroke": "black", "stroke-width": "0.4"}
        if _GLYPHS[glyph] is None:
            ET.SubElement(sym, "circle", {"r": "4", **attrs})
        else:
            ET.SubElement(sym, "polygon", {"points": _GLYPHS[glyph], **attrs})
    g = ET.SubElement(c.root, "g", {"class": "points"})
    for (x, y), lab in zip(pts, labels):
        glyph = PALETTE[lab - 1][0]
        ET.SubElement(g, "use", {"class": "marker", "href": f"#glyph-{glyph}",
                                 "data-class": str(int(lab)), **_num(x=c.sx(x), y=c.sy(y))})
    if n_classes:
        legend = ET.SubElement(c.root, "g", {"class": "legend", "font-size": "10"})
        for k in range(n_classes):
            name = spec.class_names[k] if k < len(spec.class_names) else str(k + 1)
            y = MARGIN["top"] + 12 * k
            ET.SubElement(legend, "use", {"href": f"#glyph-{PALETTE[k][0]}", **_num(x=c.x1 - 60, y=y)})
            ET.SubElement(legend, "text", _num(x=c.x1 - 52, y=y + 3)).text = name
    return c.tostring()


def emit_scatter_svg(points, labels, spec: FigureSpec, path) -> Path:
    return _write_text(path, scatter_svg(points, labels, spec))


def bars_svg(values, spec: FigureSpec, categories=None) -> str:
    """Vertical bars, e.g. a relevance profile; bar ``j`` is labelled ``categories[j]``."""
    values = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(values)):
        raise DataError("bar heights must be finite")
    n = values.size
    cats = list(categories) if categories is not None else [str(j + 1) for j in range(n)]
    xticks = np.arange(n + 1, dtype=float) - 0.5 if n else np.array([0.0, 1.0])
    lo, hi = _range(np.append(values, 0.0))
    # ticks sit between bars; category names go under the bar centres
    c = _Canvas(spec, xticks, nice_ticks(lo, hi), xcats=[""] * xticks.size)
    g = ET.SubElement(c.root, "g", {"class": "bars", "fill": "#4c72b0"})
    base = c.sy(max(min(0.0, c.yr[1]), c.yr[0]))
    half = 0.4 * (c.sx(1.0) - c.sx(0.0))
    for j, v in enumerate(values):
        top = c.sy(v)
        ET.SubElement(g, "rect", {"class": "bar", **_num(x=c.sx(j) - half, y=min(top, base),
                                                        width=2 * half, height=abs(base - top))})
        if n <= 40:
            ET.SubElement(c.root, "text", {**_num(x=c.sx(j), y=c.y0 + 16), "text-anchor": "middle",
                                           "font-size": "8"}).text = cats[j]
    return c.tostring()


def emit_bars_svg(values, spec: FigureSpec, path, categories=None) -> Path:
    return _write_text(path, bars_svg(values, spec, categories))


def curve_svg(xs, ys, spec: FigureSpec) -> str:
    """Polyline with a dot per point, for eigenvalue spectra and BAC curves."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size != ys.size:
        raise ShapeMismatch("x and y differ in length")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise DataError("curve values must be finite")
    ylo, yhi = _range(ys)
    if spec.kind == "bac_curve":
        ylo, yhi = min(ylo, 0.0), max(yhi, 1.0)
    c = _Canvas(spec, nice_ticks(*_range(xs)), nice_ticks(ylo, yhi))
    if xs.size:
        pts = " ".join(f"{c.sx(x):.2f},{c.sy(y):.2f}" for x, y in zip(xs, ys))
        ET.SubElement(c.root, "polyline", {"points": pts, "fill": "none", "stroke": "#4c72b0"})
        g = ET.SubElement(c.root, "g", {"class": "points", "fill": "#4c72b0"})
        for x, y in zip(xs, ys):
            ET.SubElement(g, "circle", {"class": "marker", "r": "2.5", **_num(cx=c.sx(x), cy=c.sy(y))})
    return c.tostring()


def emit_curve_svg(xs, ys, spec: FigureSpec, path) -> Path:
    return _write_text(path, curve_svg(xs, ys, spec))
