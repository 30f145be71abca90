"""Region-map figures from verification CSV artifacts."""

from . import cli
from .render import FigureSpec, PlotkitError, render

__all__ = ["FigureSpec", "PlotkitError", "render", "cli"]
__version__ = "1.0.0"
