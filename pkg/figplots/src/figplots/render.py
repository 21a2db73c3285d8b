"""Turn sweep output files into figure images.

The input is a CSV or JSON file produced by the purinterp CLI, identified
by its embedded schema version. Every plotted value appears verbatim in
the input; nothing is recomputed here beyond axis scaling, and rendering
the same input twice yields byte-identical images.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

FIG1_SCHEMA = "purinterp.asymptotic-sweep.v1"
FIG2_SCHEMA = "purinterp.finite-sweep.v1"

# role -> colour assignments mirror the reference figures so images can be
# compared side by side
FIG1_CURVES = (
    ("rate_interpolated", "blue", "interpolated rate"),
    ("rate_uninterpolated", "orange", "uninterpolated rate"),
    ("rate_ree_bound", "green", "REE bound"),
)
FIG2_BOUNDS = (
    ("lower_uninterpolated", "red", "uninterpolated lower bound"),
    ("upper_uninterpolated", "green", "uninterpolated upper bound"),
    ("lower_interpolated", "yellow", "interpolated lower bound"),
    ("upper_interpolated", "magenta", "interpolated upper bound"),
)
FIG2_ASYMPTOTES = (
    ("rate_uninterpolated", "blue", "uninterpolated asymptotic rate"),
    ("rate_interpolated", "cyan", "interpolated asymptotic rate"),
)

_STYLE_SCHEMAS = {"fig1": FIG1_SCHEMA, "fig2-grid": FIG2_SCHEMA}
_SVG_SALT = "figplots"


class SchemaError(ValueError):
    """Input file does not match the schema the figure style expects."""


@dataclass(frozen=True)
class PlotSpec:
    style: str
    input: str
    out: str
    format: str | None = None
    log_n: bool = False
    layout: tuple[int, int] | None = None
    title: str | None = None
    xlabel: str | None = None
    ylabel: str | None = None

    def __post_init__(self):
        if self.style not in _STYLE_SCHEMAS:
            raise ValueError(f"unknown style {self.style!r}, expected fig1 or fig2-grid")
        fmt = self.resolved_format()
        if fmt not in ("png", "svg"):
            raise ValueError(f"unsupported output format {fmt!r}, expected png or svg")
        if self.layout is not None and (len(self.layout) != 2 or min(self.layout) < 1):
            raise ValueError("layout must be a (rows, cols) pair of positive integers")

    def resolved_format(self) -> str:
        if self.format is not None:
            return self.format
        return Path(self.out).suffix.lstrip(".").lower() or "png"


def load_spec(path: str) -> PlotSpec:
    """Read a JSON plot description from disk."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("plot spec must be a JSON object")
    known = {"style", "input", "out", "format", "log_n", "layout",
             "title", "xlabel", "ylabel"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown plot spec keys: {', '.join(unknown)}")
    missing = sorted(k for k in ("style", "input", "out") if k not in raw)
    if missing:
        raise ValueError(f"plot spec missing required keys: {', '.join(missing)}")
    if "layout" in raw and raw["layout"] is not None:
        raw["layout"] = tuple(raw["layout"])
    return PlotSpec(**raw)


def load_rows(path: str) -> tuple[str, list[dict]]:
    """Read a sweep file, returning its schema tag and row dictionaries.

    Accepts both output formats of the sweep CLI: CSV with a leading
    "# schema:" comment line, or a JSON object with schema and rows keys.
    """
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        payload = json.loads(text)
        schema = payload.get("schema")
        rows = payload.get("rows")
        if not isinstance(schema, str) or not isinstance(rows, list):
            raise SchemaError(f"{path} is JSON but lacks schema/rows keys")
        return schema, rows
    first, _, rest = text.partition("\n")
    if not first.startswith("# schema:"):
        raise SchemaError(f"{path} has no schema line; regenerate it with the sweep CLI")
    schema = first.removeprefix("# schema:").strip()
    return schema, list(csv.DictReader(io.StringIO(rest)))


def _numeric(row: dict, col: str) -> float | None:
    value = row.get(col)
    if value is None or value == "":
        return None
    return float(value)


def _plottable(rows: list[dict], cols: tuple[str, ...]) -> list[dict]:
    kept = []
    for row in rows:
        values = {c: _numeric(row, c) for c in cols}
        if all(v is not None for v in values.values()):
            kept.append({**row, **values})
    return kept


def _check_columns(schema: str, rows: list[dict], needed: tuple[str, ...]):
    if not rows:
        raise SchemaError("no plottable rows in the input")
    missing = sorted(c for c in needed if c not in set(rows[0]))
    if missing:
        raise SchemaError(f"{schema} input is missing columns: {', '.join(missing)}")


def _fig1(spec: PlotSpec, rows: list[dict]) -> Figure:
    needed = ("F_initial",) + tuple(c for c, _, _ in FIG1_CURVES)
    _check_columns(FIG1_SCHEMA, rows, needed)
    usable = _plottable(rows, needed)
    if not usable:
        raise SchemaError("no plottable rows in the input")
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.subplots()
    xs = [r["F_initial"] for r in usable]
    for col, colour, label in FIG1_CURVES:
        ax.plot(xs, [r[col] for r in usable], color=colour, label=label)
    ax.set_xlabel(spec.xlabel or "initial fidelity")
    ax.set_ylabel(spec.ylabel or "rate")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    return fig


def _fig2_grid(spec: PlotSpec, rows: list[dict]) -> Figure:
    needed = ("param", "F_initial", "N") + tuple(
        c for c, _, _ in FIG2_BOUNDS + FIG2_ASYMPTOTES
    )
    _check_columns(FIG2_SCHEMA, rows, needed)
    usable = _plottable(rows, needed[1:])
    if not usable:
        raise SchemaError("no plottable rows in the input")

    panels: dict[str, list[dict]] = {}
    for row in usable:
        panels.setdefault(row["param"], []).append(row)
    count = len(panels)
    nrows, ncols = spec.layout or (max(1, math.ceil(count / 4)), min(count, 4))
    if nrows * ncols < count:
        raise ValueError(f"layout {nrows}x{ncols} cannot hold {count} panels")

    fig = Figure(figsize=(3.2 * ncols, 2.6 * nrows))
    axes = fig.subplots(nrows, ncols, squeeze=False)
    for idx, (param, panel) in enumerate(panels.items()):
        ax = axes[idx // ncols][idx % ncols]
        panel.sort(key=lambda r: r["N"])
        xs = [r["N"] for r in panel]
        for col, colour, label in FIG2_BOUNDS:
            ax.plot(xs, [r[col] for r in panel], color=colour, label=label)
        for col, colour, label in FIG2_ASYMPTOTES:
            ax.axhline(panel[0][col], color=colour, label=label)
        if spec.log_n:
            ax.set_xscale("log", base=2)
        ax.set_title(f"F = {panel[0]['F_initial']:g}", fontsize=9)
    for idx in range(count, nrows * ncols):
        axes[idx // ncols][idx % ncols].set_axis_off()
    handles, labels = axes[0][0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="lower center", ncols=3, fontsize=8)
    fig.supxlabel(spec.xlabel or "initial pairs")
    fig.supylabel(spec.ylabel or "output pairs per input pair")
    if spec.title:
        fig.suptitle(spec.title)
    fig.subplots_adjust(bottom=0.2)
    return fig


def build_figure(spec: PlotSpec) -> Figure:
    """Build the matplotlib figure a spec describes, without writing it."""
    schema, rows = load_rows(spec.input)
    expected = _STYLE_SCHEMAS[spec.style]
    if schema != expected:
        raise SchemaError(
            f"style {spec.style} expects schema {expected}, but {spec.input} "
            f"declares {schema}"
        )
    if spec.style == "fig1":
        return _fig1(spec, rows)
    return _fig2_grid(spec, rows)


def save_figure(fig: Figure, spec: PlotSpec):
    # pinned hash salt and a stripped date keep SVG output reproducible;
    # PNG is deterministic as-is under the Agg canvas
    fmt = spec.resolved_format()
    if fmt == "svg":
        with matplotlib.rc_context({"svg.hashsalt": _SVG_SALT}):
            fig.savefig(spec.out, format="svg", metadata={"Date": None})
    else:
        fig.savefig(spec.out, format="png")


def render(spec: PlotSpec):
    """Render a spec straight to its output file."""
    save_figure(build_figure(spec), spec)
