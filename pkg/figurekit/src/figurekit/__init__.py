"""Figure rendering for trajectory and sweep CSVs from the hdsgd harness."""

from .render import (FIGURE_IDS, FigureSpec, SchemaError, band_containment,
                     load_table, render)

__all__ = ["FIGURE_IDS", "FigureSpec", "SchemaError", "band_containment",
           "load_table", "render"]
__version__ = "0.1.0"
