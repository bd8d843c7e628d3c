"""Distances and diagnostics between sample sets, densities, and the Gibbs oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fokker_planck import DensityField
from .gibbs import GibbsDensity

__all__ = [
    "Histogram",
    "w1_samples",
    "w1_to_gibbs",
    "histogram",
    "l1_density",
    "free_energy_trace",
]


@dataclass(frozen=True)
class Histogram:
    """Binned counts plus the normalized density over the in-range mass."""

    edges: np.ndarray
    counts: np.ndarray
    total: int
    density: np.ndarray
    overflow: int = 0

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)


def histogram(samples, edges) -> Histogram:
    """Left-closed bins (last bin right-closed); out-of-range samples go to overflow."""
    samples = np.asarray(samples, dtype=float).reshape(-1)
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or not np.all(np.diff(edges) > 0):
        raise ValueError("edges must be a strictly increasing 1D array")
    in_range = (samples >= edges[0]) & (samples <= edges[-1])
    counts, _ = np.histogram(samples[in_range], bins=edges)
    total = int(counts.sum())
    widths = np.diff(edges)
    density = counts / (total * widths) if total > 0 else np.zeros_like(widths)
    return Histogram(edges, counts, total, density, overflow=int(len(samples) - total))


def w1_samples(a, b) -> float:
    """Wasserstein-1 between two empirical laws.

    Equal sizes reduce to the mean absolute difference of sorted samples;
    otherwise the CDF-staircase integral over the merged support is used.
    """
    a = np.sort(np.asarray(a, dtype=float).reshape(-1))
    b = np.sort(np.asarray(b, dtype=float).reshape(-1))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("w1_samples needs nonempty sample sets")
    if len(a) == len(b):
        return float(np.mean(np.abs(a - b)))
    support = np.sort(np.concatenate([a, b]))
    xs = support[:-1]
    gaps = np.diff(support)
    fa = np.searchsorted(a, xs, side="right") / len(a)
    fb = np.searchsorted(b, xs, side="right") / len(b)
    return float(np.sum(np.abs(fa - fb) * gaps))


def w1_to_gibbs(samples, g: GibbsDensity) -> float:
    """Exact integral of |empirical CDF - Gibbs CDF| over the support union.

    Between consecutive sorted samples the empirical CDF is a constant level
    c; with P(x) = IG(x) - c*x (IG the antiderivative of the Gibbs CDF) the
    segment contribution is |P| telescoped around the level crossing, located
    by the Gibbs quantile.
    """
    xs = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    if len(xs) == 0:
        raise ValueError("w1_to_gibbs needs a nonempty sample set")
    n = len(xs)
    a, b = g.domain
    lo = min(xs[0], a)
    hi = max(xs[-1], b)
    bounds = np.concatenate([[lo], xs, [hi]])
    levels = np.arange(n + 1) / n
    # a level crosses inside its segment only when the Gibbs CDF straddles it
    # there; everywhere else the clip snaps the crossing to a segment endpoint
    cdf_bounds = g.cdf(bounds)
    crossings = bounds[:-1].copy()
    inside = (cdf_bounds[:-1] < levels) & (levels < cdf_bounds[1:])
    inside[0] = inside[-1] = False
    if np.any(inside):
        crossings[inside] = g.quantile(levels[inside])
    crossings = np.clip(crossings, bounds[:-1], bounds[1:])
    ig = g.cdf_integral(np.concatenate([bounds, crossings]))
    ig_bounds, ig_cross = ig[: n + 2], ig[n + 2 :]

    def p_val(ig_x, x, c):
        return ig_x - c * x

    left = np.abs(p_val(ig_cross, crossings, levels) - p_val(ig_bounds[:-1], bounds[:-1], levels))
    right = np.abs(p_val(ig_bounds[1:], bounds[1:], levels) - p_val(ig_cross, crossings, levels))
    return float(np.sum(left + right))


def l1_density(rho1: DensityField, rho2: DensityField) -> float:
    """L1 distance between two densities on the same grid."""
    if rho1.grid.n_cells != rho2.grid.n_cells or not np.array_equal(rho1.grid.faces, rho2.grid.faces):
        raise ValueError("density fields live on different grids")
    return float(np.sum(np.abs(rho1.values - rho2.values) * rho1.grid.dx))


def free_energy_trace(p, sigma: float, chain, window: int, edges=None) -> np.ndarray:
    """Free energy of windowed empirical densities along a chain.

    Non-overlapping windows of the given size are binned on shared edges
    (64 bins over the full sample range unless given); empty bins contribute
    zero to the entropy term.
    """
    samples = np.asarray(getattr(chain, "samples", chain), dtype=float).reshape(-1)
    if window < 100:
        raise ValueError("window must be at least 100")
    if len(samples) < window:
        raise ValueError("chain shorter than one window")
    if edges is None:
        lo, hi = samples.min(), samples.max()
        pad = 1e-9 * max(1.0, abs(lo), abs(hi))
        edges = np.linspace(lo - pad, hi + pad, 65)
    edges = np.asarray(edges, dtype=float)
    centers = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    fvals = p.value(centers)
    out = []
    for start in range(0, len(samples) - window + 1, window):
        h = histogram(samples[start : start + window], edges)
        d = h.density
        with np.errstate(divide="ignore"):
            slog = np.where(d > 0, d * np.log(np.maximum(d, 1e-300)), 0.0)
        out.append(float(np.sum(fvals * d * widths) + sigma * np.sum(slog * widths)))
    return np.array(out)
