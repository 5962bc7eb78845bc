"""Render figures from mean field game experiment CSV files.

This package only reads the delimited outputs of the solver CLI (trace,
simplex-sweep, lookahead-comparison and subgame-iteration files) and draws
them; it never recomputes any solver math.
"""

import matplotlib

matplotlib.use("Agg")

from .renderers import (  # noqa: E402
    PlotError,
    PlotJob,
    plot_convergence,
    plot_rh,
    plot_seqpar,
    plot_simplex,
    render,
)

__version__ = "0.1.0"

__all__ = [
    "PlotError",
    "PlotJob",
    "plot_convergence",
    "plot_rh",
    "plot_seqpar",
    "plot_simplex",
    "render",
]
