"""Minimizing-movement (JKO) solver in one dimension.

State is the quantile function on the uniform probability grid
u_j = (j - 1/2)/M, which makes the squared Wasserstein-2 distance an explicit
sum and keeps unit mass and monotonicity structural.  Each step solves

    Q^(k) = argmin_Q  1/2 * w2(Q^(k-1), Q)^2 + h * F(Q)

where the free energy F = E + sigma * S combines the mean potential value
with the quantile-form entropy -(1/M) sum log(M * dQ).  Monotonicity is kept
by optimizing (Q_1, log-increments); the descent method is Barzilai-Borwein
gradient steps with a monotone backtracking line search, so the objective at
the result never exceeds the objective at the previous iterate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fokker_planck import DensityField, Grid1D
from .potential import SelectionRule

__all__ = [
    "QuantileField",
    "JkoRun",
    "SolverError",
    "w2",
    "free_energy",
    "jko_step",
    "run_jko",
    "interpolate",
    "density_from_quantiles",
    "quantiles_from_density",
]

_MIN_GAP = 1e-12
_FE_DESCENT_TOL = 1e-8


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuantileField:
    """Strictly increasing quantile values at u_j = (j - 1/2)/M."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need a 1D quantile vector with at least two nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("quantile values must be finite")
        if np.min(np.diff(v)) < _MIN_GAP:
            raise ValueError(f"quantile values must increase by at least {_MIN_GAP}")
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def probability_nodes(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) / self.m

    @classmethod
    def gaussian(cls, m: int, mean: float = 0.0, std: float = 1.0) -> "QuantileField":
        from scipy.stats import norm

        u = (np.arange(m) + 0.5) / m
        return cls(norm.ppf(u, loc=mean, scale=std))

    @classmethod
    def uniform(cls, m: int, a: float = 0.0, b: float = 1.0) -> "QuantileField":
        u = (np.arange(m) + 0.5) / m
        return cls(a + (b - a) * u)


def w2(q1: QuantileField, q2: QuantileField) -> float:
    """Wasserstein-2 distance via the quantile representation."""
    if q1.m != q2.m:
        raise ValueError(f"quantile grids differ: {q1.m} vs {q2.m}")
    return float(np.sqrt(np.mean((q1.values - q2.values) ** 2)))


def _entropy(values: np.ndarray) -> float:
    m = len(values)
    return -float(np.sum(np.log(m * np.diff(values)))) / m


def free_energy(p, sigma: float, q: QuantileField) -> float:
    """E + sigma*S: mean potential value plus the quantile-form entropy."""
    return float(np.mean(p.value(q.values))) + sigma * _entropy(q.values)


def _objective_grad(qv, prev, h, sigma, m, p, rule, rng):
    dq = np.diff(qv)
    vals, drifts = p.value_and_drift(qv, rule, rng)
    obj = 0.5 * np.mean((qv - prev) ** 2) + h * (
        float(np.mean(vals)) - sigma / m * np.sum(np.log(m * dq))
    )
    g = (qv - prev) / m + (h / m) * drifts
    ent_gap = sigma / (m * dq)
    g[:-1] += h * ent_gap
    g[1:] -= h * ent_gap
    return obj, g


def jko_objective_grad(p, sigma: float, h: float, q_prev: QuantileField, q: QuantileField,
                       rule: SelectionRule = SelectionRule.MIN_NORM):
    """Objective 1/2 w2^2 + h*F and its gradient in the quantile values."""
    return _objective_grad(q.values, q_prev.values, h, sigma, q.m, p, rule, None)


def _grad_increments(gq: np.ndarray, z: np.ndarray) -> np.ndarray:
    tail = np.cumsum(gq[::-1])[::-1]
    return np.concatenate([[gq.sum()], np.exp(z) * tail[1:]])


def jko_step(p, sigma: float, h: float, q_prev: QuantileField,
             rule: SelectionRule = SelectionRule.MIN_NORM,
             rng: np.random.Generator | None = None,
             gtol: float = 1e-10, max_iters: int = 4000) -> QuantileField:
    """One minimizing-movement step from q_prev.

    Exits on the gradient tolerance, on objective stagnation (kink-pinned
    quantiles stall the selected gradient), or on the iteration cap; the
    objective at the result never exceeds the objective at q_prev.
    """
    if h < 0:
        raise ValueError("h must be nonnegative")
    if h == 0.0:
        return QuantileField(q_prev.values.copy())
    prev = q_prev.values
    m = q_prev.m
    q0 = prev[0]
    z = np.log(np.diff(prev))
    qv = prev.copy()
    obj, gq = _objective_grad(qv, prev, h, sigma, m, p, rule, rng)
    g = _grad_increments(gq, z)
    t = 1.0 / (1.0 + float(np.max(np.abs(g))))
    prev_theta = None
    prev_g = None
    stagnant = 0
    for _ in range(max_iters):
        if np.max(np.abs(g)) <= gtol or stagnant >= 3:
            break
        theta = np.concatenate([[q0], z])
        if prev_theta is not None:
            s = theta - prev_theta
            y = g - prev_g
            sy = float(s @ y)
            t = float(s @ s) / sy if sy > 0 else 1.0
            t = min(max(t, 1e-13), 1e13)
        gg = float(g @ g)
        accepted = False
        for _halving in range(61):
            theta_new = theta - t * g
            qv_new = np.concatenate([[theta_new[0]], theta_new[0] + np.cumsum(np.exp(theta_new[1:]))])
            obj_new, gq_new = _objective_grad(qv_new, prev, h, sigma, m, p, rule, rng)
            if obj_new <= obj - 1e-4 * t * gg or obj_new <= obj:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise SolverError(
                f"line search failed after 60 halvings (obj {obj:.6e}, grad {np.max(np.abs(g)):.2e})"
            )
        stagnant = stagnant + 1 if obj - obj_new <= 1e-16 * (1.0 + abs(obj)) else 0
        prev_theta, prev_g = theta, g
        q0, z = theta_new[0], theta_new[1:]
        qv, obj = qv_new, obj_new
        g = _grad_increments(gq_new, z)
    return QuantileField(qv)


@dataclass(frozen=True)
class JkoRun:
    """A JKO trajectory: states rho_h^(k) and their free energies."""

    h: float
    steps: list
    free_energies: np.ndarray
    converged: bool

    def __post_init__(self):
        fe = np.asarray(self.free_energies, dtype=float)
        if len(self.steps) != len(fe):
            raise ValueError("one free energy per stored state required")
        if fe.size > 1 and np.max(np.diff(fe)) > _FE_DESCENT_TOL:
            raise ValueError(f"free energies increase by {np.max(np.diff(fe)):.3e} > {_FE_DESCENT_TOL}")
        object.__setattr__(self, "free_energies", fe)

    @property
    def n_steps(self) -> int:
        return len(self.steps) - 1


def run_jko(p, sigma: float, h: float, n_steps: int, q0: QuantileField,
            rule: SelectionRule = SelectionRule.MIN_NORM,
            rng: np.random.Generator | None = None) -> JkoRun:
    """n_steps minimizing movements from q0; stores every state including q0."""
    states = [q0]
    energies = [free_energy(p, sigma, q0)]
    q = q0
    for _ in range(n_steps):
        q = jko_step(p, sigma, h, q, rule, rng)
        states.append(q)
        energies.append(free_energy(p, sigma, q))
    moved = w2(states[-1], states[-2]) if n_steps else 0.0
    return JkoRun(h, states, np.array(energies), converged=moved <= 1e-6)


def interpolate(run: JkoRun, t: float) -> QuantileField:
    """Piecewise-constant-in-time interpolant: state floor(t/h) on [kh, (k+1)h)."""
    t_max = run.h * run.n_steps
    if not 0.0 <= t <= t_max:
        raise ValueError(f"t={t} outside [0, {t_max}]")
    # tolerate float slop at exact multiples of h
    k = min(int(np.floor(t / run.h + 1e-9)), run.n_steps)
    return run.steps[k]


def density_from_quantiles(q: QuantileField, grid: Grid1D) -> DensityField:
    """Piecewise-uniform density with mass 1/M between consecutive quantiles.

    The half masses below u_1 and above u_M extend the first/last gap, so the
    construction is exact for uniform laws and O(1/M) in general.
    """
    v = q.values
    first_gap = v[1] - v[0]
    last_gap = v[-1] - v[-2]
    knots = np.concatenate([[v[0] - 0.5 * first_gap], v, [v[-1] + 0.5 * last_gap]])
    m = q.m
    u = np.concatenate([[0.0], (np.arange(m) + 0.5) / m, [1.0]])
    cdf_at_faces = np.interp(grid.faces, knots, u, left=0.0, right=1.0)
    masses = np.diff(cdf_at_faces)
    total = masses.sum()
    if total <= 0.9999:
        raise ValueError("quantile support falls outside the grid; enlarge the domain")
    return DensityField(grid, masses / total / grid.dx)


def quantiles_from_density(rho: DensityField, m: int) -> QuantileField:
    """Invert the piecewise-linear CDF of a cell-averaged density."""
    if m < 2:
        raise ValueError("need at least two quantile nodes")
    cum = np.concatenate([[0.0], np.cumsum(rho.values * rho.grid.dx)])
    cum /= cum[-1]
    u = (np.arange(m) + 0.5) / m
    qv = np.interp(u, cum, rho.grid.faces)
    gaps = np.diff(qv)
    if np.min(gaps) < _MIN_GAP:
        # zero-density cells flatten the CDF; nudge ties apart
        qv = qv + np.arange(m) * (2 * _MIN_GAP)
    return QuantileField(qv)
