"""Langevin-type chains: subgradient ULA, random-walk Metropolis, and MALA.

All chains draw from a ``numpy.random.Generator`` over the counter-based
Philox bit generator keyed by the config seed, so runs are bit-reproducible
and multi-chain batches (seed XOR chain index) are schedule-independent.
The ULA update is

    x_{k+1} = x_k - eps * g_k + sqrt(2 * sigma * eps) * B_k,   g_k in F(x_k)

with F the set-valued drift of the potential and the selection rule applied
whenever the state lands exactly on a breakpoint.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_right
from dataclasses import dataclass, replace

import numpy as np

from .potential import PiecewisePotential1D, SelectionRule, select

__all__ = [
    "ChainConfig",
    "Chain",
    "SamplerKind",
    "DivergedError",
    "ula_step",
    "run_ula",
    "run_rwm",
    "run_mala",
    "run_chains",
    "derive_chain_seed",
]

_DIVERGENCE_BOUND = 1e8


class SamplerKind(enum.Enum):
    ULA = "ula"
    RWM = "rwm"
    MALA = "mala"


class DivergedError(RuntimeError):
    """Raised when a chain state stops being finite; carries the step index."""

    def __init__(self, step: int, value):
        super().__init__(f"chain diverged at step {step}: state={value!r}")
        self.step = step


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings; validated on construction."""

    epsilon: float = 1e-3
    sigma: float = 1.0
    n_steps: int = 1000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    selection: SelectionRule = SelectionRule.MIN_NORM
    init: float | np.ndarray = 0.0
    proposal_std: float | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError("need 0 <= burn_in < n_steps")
        if self.thin < 1:
            raise ValueError("thin must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.proposal_std is not None and self.proposal_std <= 0:
            raise ValueError("proposal_std must be positive")

    @property
    def n_kept(self) -> int:
        return (self.n_steps - self.burn_in) // self.thin

    def kept_step_indices(self) -> np.ndarray:
        """1-based step index of each retained sample."""
        return self.burn_in + self.thin * np.arange(1, self.n_kept + 1)

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=int(self.seed)))


@dataclass(frozen=True)
class Chain:
    """Retained samples plus bookkeeping; samples has shape (n_kept,) or (n_kept, d)."""

    samples: np.ndarray
    accepted: int
    config: ChainConfig
    sampler_kind: SamplerKind

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.config.n_steps


def derive_chain_seed(seed: int, index: int) -> int:
    """Per-chain stream: seed XOR chain index (keeps batches schedule-independent)."""
    return int(seed) ^ int(index)


def ula_step(p, x, cfg: ChainConfig, rng: np.random.Generator):
    """One unadjusted-Langevin update from state x."""
    g = p.drift(x, cfg.selection, rng)
    scale = math.sqrt(2.0 * cfg.sigma * cfg.epsilon)
    if np.ndim(x) == 0:
        return x - cfg.epsilon * g + scale * rng.standard_normal()
    return x - cfg.epsilon * g + scale * rng.standard_normal(np.shape(x))


def _check_finite(x, step: int):
    if np.ndim(x) == 0:
        if not math.isfinite(x) or abs(x) > _DIVERGENCE_BOUND:
            raise DivergedError(step, x)
    elif not np.all(np.isfinite(x)) or np.max(np.abs(x)) > _DIVERGENCE_BOUND:
        raise DivergedError(step, x)


def _run_ula_piecewise(p: PiecewisePotential1D, cfg: ChainConfig) -> Chain:
    # tight scalar loop: bisect over a plain list beats ndarray searchsorted here
    rng = cfg.rng()
    noise = rng.standard_normal(cfg.n_steps) * math.sqrt(2.0 * cfg.sigma * cfg.epsilon)
    bps = [float(t) for t in p.breakpoints]
    dco = [tuple(row) for row in p._dcoeffs]
    eps = cfg.epsilon
    x = float(np.asarray(cfg.init).reshape(()))
    path = np.empty(cfg.n_steps)
    rule = cfg.selection
    for k in range(cfg.n_steps):
        i = bisect_right(bps, x)
        if i > 0 and bps[i - 1] == x:
            g = select(p.clarke_subdiff(x), rule, rng)
        else:
            d = dco[i]
            g = d[0] + x * (d[1] + x * d[2])
        x = x - eps * g + noise[k]
        if not -_DIVERGENCE_BOUND < x < _DIVERGENCE_BOUND:
            raise DivergedError(k + 1, x)
        path[k] = x
    kept = path[cfg.burn_in + cfg.thin - 1 :: cfg.thin][: cfg.n_kept]
    return Chain(kept, cfg.n_steps, cfg, SamplerKind.ULA)


def run_ula(p, cfg: ChainConfig) -> Chain:
    """Run a full ULA chain; every step is accepted by definition."""
    if isinstance(p, PiecewisePotential1D) and np.ndim(cfg.init) == 0:
        return _run_ula_piecewise(p, cfg)
    rng = cfg.rng()
    x = np.array(cfg.init, dtype=float)
    kept = np.empty((cfg.n_kept,) + x.shape)
    j = 0
    for k in range(1, cfg.n_steps + 1):
        x = ula_step(p, x, cfg, rng)
        _check_finite(x, k)
        if k > cfg.burn_in and (k - cfg.burn_in) % cfg.thin == 0 and j < cfg.n_kept:
            kept[j] = x
            j += 1
    return Chain(kept, cfg.n_steps, cfg, SamplerKind.ULA)


def run_rwm(p, cfg: ChainConfig) -> Chain:
    """Random-walk Metropolis with Gaussian proposals of scale proposal_std."""
    if cfg.proposal_std is None:
        raise ValueError("run_rwm needs cfg.proposal_std")
    rng = cfg.rng()
    scalar = np.ndim(cfg.init) == 0
    x = float(cfg.init) if scalar else np.array(cfg.init, dtype=float)
    fx = p.value(x)
    shape = () if scalar else np.shape(x)
    kept = np.empty((cfg.n_kept,) + shape)
    accepted = 0
    j = 0
    for k in range(1, cfg.n_steps + 1):
        step = cfg.proposal_std * (rng.standard_normal() if scalar else rng.standard_normal(shape))
        prop = x + step
        fp = p.value(prop)
        if rng.random() < math.exp(min(0.0, -(fp - fx) / cfg.sigma)):
            x, fx = prop, fp
            accepted += 1
        _check_finite(x, k)
        if k > cfg.burn_in and (k - cfg.burn_in) % cfg.thin == 0 and j < cfg.n_kept:
            kept[j] = x
            j += 1
    return Chain(kept, accepted, cfg, SamplerKind.RWM)


def _mala_log_q(a, b, g_b, cfg: ChainConfig) -> float:
    """log q(a | b) for the Langevin proposal from b, up to the shared constant."""
    diff = a - b + cfg.epsilon * g_b
    return -float(np.sum(np.asarray(diff) ** 2)) / (4.0 * cfg.epsilon * cfg.sigma)


def run_mala(p, cfg: ChainConfig) -> Chain:
    """Metropolis-adjusted Langevin: ULA proposal, exact accept/reject."""
    rng = cfg.rng()
    scalar = np.ndim(cfg.init) == 0
    x = float(cfg.init) if scalar else np.array(cfg.init, dtype=float)
    fx = p.value(x)
    gx = p.drift(x, cfg.selection, rng)
    shape = () if scalar else np.shape(x)
    scale = math.sqrt(2.0 * cfg.sigma * cfg.epsilon)
    kept = np.empty((cfg.n_kept,) + shape)
    accepted = 0
    j = 0
    for k in range(1, cfg.n_steps + 1):
        noise = rng.standard_normal() if scalar else rng.standard_normal(shape)
        y = x - cfg.epsilon * gx + scale * noise
        fy = p.value(y)
        gy = p.drift(y, cfg.selection, rng)
        log_alpha = (fx - fy) / cfg.sigma + _mala_log_q(x, y, gy, cfg) - _mala_log_q(y, x, gx, cfg)
        if rng.random() < math.exp(min(0.0, log_alpha)):
            x, fx, gx = y, fy, gy
            accepted += 1
        _check_finite(x, k)
        if k > cfg.burn_in and (k - cfg.burn_in) % cfg.thin == 0 and j < cfg.n_kept:
            kept[j] = x
            j += 1
    return Chain(kept, accepted, cfg, SamplerKind.MALA)


_RUNNERS = {SamplerKind.ULA: run_ula, SamplerKind.RWM: run_rwm, SamplerKind.MALA: run_mala}


def run_chains(p, cfg: ChainConfig, kind: SamplerKind, n_chains: int) -> list:
    """Independent chains with per-chain seeds seed XOR index; order-independent."""
    runner = _RUNNERS[kind]
    return [runner(p, replace(cfg, seed=derive_chain_seed(cfg.seed, i))) for i in range(n_chains)]
