"""Deterministic matplotlib SVG rendering for the CLI report path.

Every figure is written as SVG with a fixed hash salt, no Date metadata, and
path simplification off, so reruns are byte-identical.  Data artists carry
``gid`` attributes ("series-<i>" for lines, "bar-<i>" for histogram bars) so
the rendered series can be re-parsed and checked against the companion CSV.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("svg", force=False)

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["save_line_svg", "save_hist_svg"]

_RC = {
    "svg.hashsalt": "langinc",
    "path.simplify": False,
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def save_line_svg(path, series, title="", xlabel="", ylabel="", logx=False, logy=False):
    """Write a line chart; ``series`` is a list of (label, x, y) triples."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for i, (label, x, y) in enumerate(series):
            (line,) = ax.plot(x, y, label=label)
            line.set_gid(f"series-{i}")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        if any(label for label, _, _ in series):
            ax.legend()
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)


def save_hist_svg(path, edges, density, title="", xlabel="x", ylabel="density"):
    """Write a bar chart of a binned density; one gid'd bar per bin."""
    widths = [b - a for a, b in zip(edges[:-1], edges[1:])]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        bars = ax.bar(edges[:-1], density, width=widths, align="edge", edgecolor="none")
        for i, bar in enumerate(bars):
            bar.set_gid(f"bar-{i}")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
