"""Static chart rendering for vlfcc CSV outputs."""
from .figures import (
    FIGURE_IDS,
    FigureSpec,
    capacity,
    default_inputs,
    load_rows,
    render,
)

__all__ = ["FIGURE_IDS", "FigureSpec", "capacity", "default_inputs",
           "load_rows", "render"]
