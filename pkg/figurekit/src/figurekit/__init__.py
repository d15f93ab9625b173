"""Batch figure rendering for the stopping-reliability benchmark CSVs."""

__version__ = "0.1.0"

from .figures import FIGURE_IDS, FigureSpec, RenderResult, render

__all__ = ["FIGURE_IDS", "FigureSpec", "RenderResult", "render", "__version__"]
