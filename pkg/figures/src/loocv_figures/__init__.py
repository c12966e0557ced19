"""Figure rendering for loocvlab simulation outputs."""

from .render import render
from .spec import KINDS, FigureSpec, MissingColumnsError

__all__ = ["render", "FigureSpec", "KINDS", "MissingColumnsError"]
