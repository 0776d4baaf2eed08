"""Headless figure rendering for the fwbound experiment exports."""

from .render import FigureSpec, SchemaError, render

__all__ = ["FigureSpec", "SchemaError", "render"]
