"""Render benchmark figures from recon sweep CSVs.

Consumes the bench CSV schema (detail rows plus rep=-1 aggregate rows) and
renders the figure suite: one chart per metric against the symmetric
difference d, with aggregate means as lines and +/-1 standard deviation
bands from the detail rows.
"""

from recon_plots.figures import FigureSpec, RenderSummary, render, render_all

__all__ = ["FigureSpec", "RenderSummary", "render", "render_all"]

__version__ = "0.1.0"
