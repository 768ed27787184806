"""Figure rendering for validlearn experiment CSVs."""

from .figspec import FigureSpec, FigureSpecError
from .render import RenderResult, SchemaError, render

__version__ = "0.1.0"
