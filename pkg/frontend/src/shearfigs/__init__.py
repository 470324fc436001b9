"""Figures from shearlab CSV/JSON outputs."""

__version__ = "0.1.0"

from .spec import FigureSpec, load_spec, loads_spec, SpecError
from .render import render
