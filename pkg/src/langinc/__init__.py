"""Langevin dynamics with set-valued drift over piecewise-smooth potentials.

Subpackages: potential (piecewise potentials, Clarke subdifferentials,
selections, ReLU nets), sampler (ULA/RWM/MALA chains), gibbs (exact
stationary-law oracle), fokker_planck (finite-volume solver with interface
diagnostics), jko (minimizing-movement Wasserstein flow), metrics (W1 and
histogram diagnostics), cli (the ``langinc`` command).
"""

__version__ = "0.1.0"

from .potential import (
    PiecewisePotential1D,
    ReLUNetPotential,
    SelectionRule,
    SubdiffValue,
    example_potential,
    select,
)
from .sampler import Chain, ChainConfig, SamplerKind, run_mala, run_rwm, run_ula
from .gibbs import GibbsDensity, normalizer
from .fokker_planck import DensityField, Grid1D, build_grid, current, evolve, steady_state, step
from .jko import JkoRun, QuantileField, free_energy, jko_step, run_jko, w2
from .metrics import Histogram, histogram, l1_density, w1_samples, w1_to_gibbs

__all__ = [
    "PiecewisePotential1D",
    "ReLUNetPotential",
    "SelectionRule",
    "SubdiffValue",
    "example_potential",
    "select",
    "Chain",
    "ChainConfig",
    "SamplerKind",
    "run_ula",
    "run_rwm",
    "run_mala",
    "GibbsDensity",
    "normalizer",
    "DensityField",
    "Grid1D",
    "build_grid",
    "current",
    "step",
    "evolve",
    "steady_state",
    "QuantileField",
    "JkoRun",
    "free_energy",
    "jko_step",
    "run_jko",
    "w2",
    "Histogram",
    "histogram",
    "w1_samples",
    "w1_to_gibbs",
    "l1_density",
]
