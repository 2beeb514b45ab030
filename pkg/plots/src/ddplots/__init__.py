"""Sweep-CSV plotting for deltadd experiment records."""

from .render import ERROR_FLOOR, METRICS, PlotSpec, RenderResult, render

__all__ = ["ERROR_FLOOR", "METRICS", "PlotSpec", "RenderResult", "render"]
