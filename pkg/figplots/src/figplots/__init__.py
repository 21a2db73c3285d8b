"""Figure rendering for purification sweep outputs."""

from .render import (
    FIG1_CURVES,
    FIG1_SCHEMA,
    FIG2_ASYMPTOTES,
    FIG2_BOUNDS,
    FIG2_SCHEMA,
    PlotSpec,
    SchemaError,
    build_figure,
    load_rows,
    load_spec,
    render,
    save_figure,
)

__version__ = "0.1.0"

__all__ = [
    "FIG1_CURVES",
    "FIG1_SCHEMA",
    "FIG2_ASYMPTOTES",
    "FIG2_BOUNDS",
    "FIG2_SCHEMA",
    "PlotSpec",
    "SchemaError",
    "build_figure",
    "load_rows",
    "load_spec",
    "render",
    "save_figure",
    "__version__",
]
