"""Piecewise-smooth scalar potentials and their set-valued derivative.

A ``PiecewisePotential1D`` is a continuous confining function built from
polynomial pieces (degree <= 3) glued at a finite set of breakpoints.  Away
from the breakpoints the drift is the ordinary derivative; at a breakpoint it
is the closed interval spanned by the two one-sided derivative limits, and a
``SelectionRule`` turns that interval back into a number.

``ReLUNetPotential`` is the n-dimensional companion: a fully-connected ReLU
regression network whose potential is mean squared error plus a Gaussian
prior term.  It exposes a single-valued drift oracle (reverse-mode
accumulation with a fixed slope at the kinks) rather than interval hulls.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PiecewisePotential1D",
    "SubdiffValue",
    "SelectionRule",
    "ReLUNetPotential",
    "select",
    "example_potential",
    "make_synthetic_regression",
]

_CONTINUITY_TOL = 1e-12
_DIVERGENCE_BOUND = 1e8  # |x| beyond this signals a diverged chain


class SelectionRule(enum.Enum):
    """How to pick a single drift value out of a subdifferential interval."""

    MIN_NORM = "min_norm"
    LEFT_LIMIT = "left_limit"
    RIGHT_LIMIT = "right_limit"
    MIDPOINT = "midpoint"
    RANDOM_CONVEX = "random_convex"

    @classmethod
    def from_name(cls, name: str) -> "SelectionRule":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(r.value for r in cls)
            raise ValueError(f"unknown selection rule {name!r}; expected one of {valid}") from None


@dataclass(frozen=True)
class SubdiffValue:
    """Closed interval [lo, hi] of drift values at a point (singleton when smooth)."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("subdifferential endpoints must be finite")
        if self.lo > self.hi:
            raise ValueError(f"subdifferential interval empty: lo={self.lo} > hi={self.hi}")


def select(v: SubdiffValue, rule: SelectionRule, rng: np.random.Generator | None = None) -> float:
    """Apply a selection rule to an interval; the result always lies in [lo, hi]."""
    if rule is SelectionRule.MIN_NORM:
        if v.lo <= 0.0 <= v.hi:
            return 0.0
        return v.lo if abs(v.lo) < abs(v.hi) else v.hi
    if rule is SelectionRule.LEFT_LIMIT:
        return v.lo
    if rule is SelectionRule.RIGHT_LIMIT:
        return v.hi
    if rule is SelectionRule.MIDPOINT:
        return 0.5 * (v.lo + v.hi)
    if rule is SelectionRule.RANDOM_CONVEX:
        if rng is None:
            raise ValueError("RANDOM_CONVEX selection needs an rng")
        return v.lo + (v.hi - v.lo) * rng.random()
    raise ValueError(f"unhandled rule {rule}")


def _poly_tail_to_inf(coeffs: np.ndarray, left: bool) -> bool:
    """True if the polynomial tends to +inf in the given direction."""
    deg = max((i for i, c in enumerate(coeffs) if c != 0.0), default=0)
    if deg == 0:
        return False
    lead = coeffs[deg]
    if deg % 2 == 0:
        return lead > 0
    return lead < 0 if left else lead > 0


@dataclass(frozen=True)
class PiecewisePotential1D:
    """Continuous confining potential made of polynomial pieces.

    ``breakpoints`` is the exceptional set where the derivative may jump;
    ``pieces[i]`` holds coefficients ``[c0, c1, c2, c3]`` of the polynomial
    valid on the i-th open interval (there is one more piece than breakpoints).
    Instances are immutable and safe to share across threads.
    """

    breakpoints: np.ndarray
    pieces: np.ndarray  # shape (n_pieces, 4)
    _dcoeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __init__(self, breakpoints, pieces):
        bps = np.asarray(breakpoints, dtype=float).reshape(-1)
        pcs = [np.asarray(p, dtype=float).reshape(-1) for p in pieces]
        if any(len(p) > 4 for p in pcs):
            raise ValueError("piece degree capped at 3 (at most 4 coefficients)")
        pmat = np.zeros((len(pcs), 4))
        for i, p in enumerate(pcs):
            pmat[i, : len(p)] = p
        if bps.size and not np.all(np.diff(bps) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(bps)):
            raise ValueError("breakpoints must be finite")
        if pmat.shape[0] != bps.size + 1:
            raise ValueError(f"need {bps.size + 1} pieces for {bps.size} breakpoints, got {pmat.shape[0]}")
        for k, t in enumerate(bps):
            vl = _polyval(pmat[k], t)
            vr = _polyval(pmat[k + 1], t)
            if abs(vl - vr) > _CONTINUITY_TOL:
                raise ValueError(f"pieces {k} and {k + 1} disagree at breakpoint {t}: {vl} vs {vr}")
        if not _poly_tail_to_inf(pmat[0], left=True):
            raise ValueError("leftmost piece must tend to +inf as x -> -inf (confinement)")
        if not _poly_tail_to_inf(pmat[-1], left=False):
            raise ValueError("rightmost piece must tend to +inf as x -> +inf (confinement)")
        dmat = pmat[:, 1:] * np.array([1.0, 2.0, 3.0])
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pmat)
        object.__setattr__(self, "_dcoeffs", dmat)
        # contiguous per-coefficient columns: cheap gathers in vectorized paths
        object.__setattr__(self, "_cols", tuple(np.ascontiguousarray(pmat[:, j]) for j in range(4)))
        object.__setattr__(self, "_dcols", tuple(np.ascontiguousarray(dmat[:, j]) for j in range(3)))

    # -- evaluation ---------------------------------------------------------

    def value(self, x):
        """Potential value; accepts scalars or arrays."""
        x_arr = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x_arr, side="right")
        c = self.pieces[idx]
        out = c[..., 0] + x_arr * (c[..., 1] + x_arr * (c[..., 2] + x_arr * c[..., 3]))
        return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out

    __call__ = value

    def derivative_piece(self, idx, x):
        """Derivative of piece ``idx`` evaluated at x (vectorized)."""
        d = self._dcoeffs[idx]
        return d[..., 0] + x * (d[..., 1] + x * d[..., 2])

    def derivative_sided(self, x, side: str):
        """One-sided derivative limit ('left' uses the piece ending at x)."""
        x_arr = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x_arr, side="left" if side == "left" else "right")
        out = self.derivative_piece(idx, x_arr)
        return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out

    def clarke_subdiff(self, x: float) -> SubdiffValue:
        """Interval of drift values: singleton {f'(x)} off the breakpoints,
        the hull of the two one-sided limits on them."""
        dl = self.derivative_sided(x, "left")
        dr = self.derivative_sided(x, "right")
        return SubdiffValue(min(dl, dr), max(dl, dr))

    def drift(self, x: float, rule: SelectionRule = SelectionRule.MIN_NORM,
              rng: np.random.Generator | None = None) -> float:
        """Single-valued drift selection at x."""
        return select(self.clarke_subdiff(x), rule, rng)

    def drift_array(self, x: np.ndarray, rule: SelectionRule = SelectionRule.MIN_NORM,
                    rng: np.random.Generator | None = None) -> np.ndarray:
        """Vectorized drift; breakpoint hits (exact float equality) get the rule."""
        return self.value_and_drift(x, rule, rng)[1]

    def value_and_drift(self, x: np.ndarray, rule: SelectionRule = SelectionRule.MIN_NORM,
                        rng: np.random.Generator | None = None):
        """(f(x), selected drift(x)) in one pass over an array."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right")
        c0, c1, c2, c3 = (col.take(idx) for col in self._cols)
        vals = c0 + x * (c1 + x * (c2 + x * c3))
        d0, d1, d2 = (col.take(idx) for col in self._dcols)
        drifts = d0 + x * (d1 + x * d2)
        if self.breakpoints.size:
            lower = np.maximum(idx - 1, 0)
            hits = np.nonzero(self.breakpoints.take(lower) == x)[0]
            for i in hits:
                if idx[i] > 0:
                    drifts[i] = self.drift(float(x[i]), rule, rng)
        return vals, drifts

    # -- misc ---------------------------------------------------------------

    @property
    def exceptional_set(self) -> np.ndarray:
        return self.breakpoints

    def confinement_rate(self) -> float:
        """A lower bound c > 0 with f(x) >= c|x| - C outside the breakpoints."""
        probes = []
        if self.breakpoints.size:
            lo, hi = self.breakpoints[0] - 1.0, self.breakpoints[-1] + 1.0
        else:
            lo, hi = -1.0, 1.0
        for x in np.linspace(hi, hi + 100.0, 64):
            probes.append(self.derivative_sided(x, "right"))
        right = min(probes)
        probes = [-self.derivative_sided(x, "left") for x in np.linspace(lo, lo - 100.0, 64)]
        left = min(probes)
        return max(min(left, right), 0.0)

    @classmethod
    def from_dict(cls, table: dict) -> "PiecewisePotential1D":
        """Build from a TOML-style table with keys 'breakpoints' and 'pieces'."""
        unknown = set(table) - {"breakpoints", "pieces"}
        if unknown:
            raise ValueError(f"unknown potential keys: {sorted(unknown)}")
        return cls(table.get("breakpoints", []), table["pieces"])


def _polyval(c, x):
    return c[0] + x * (c[1] + x * (c[2] + x * c[3]))


def example_potential() -> PiecewisePotential1D:
    """The built-in symmetric double-well: |.|-shaped pieces meeting at -1, 0, 1.

    f(x) = -x-1 (x < -1), x+1 (-1 <= x < 0), 1-x (0 <= x < 1), x-1 (x >= 1).
    """
    return PiecewisePotential1D(
        breakpoints=[-1.0, 0.0, 1.0],
        pieces=[[-1.0, -1.0], [1.0, 1.0], [1.0, -1.0], [-1.0, 1.0]],
    )


# ---------------------------------------------------------------------------
# ReLU network potential
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReLUNetPotential:
    """Mean-squared-error potential of a fully connected ReLU regression net.

    ``widths`` lists layer sizes input..output (output must be 1).  The
    parameter vector packs each layer's weight matrix (row-major) followed by
    its bias.  ``relu_slope_at_zero`` in [0, 1] fixes the derivative used when
    a pre-activation is exactly zero; it is a valid selection of the [0, 1]
    interval there.  Immutable; sampling chains may share one instance.
    """

    widths: tuple
    X: np.ndarray
    y: np.ndarray
    lam: float = 0.0
    relu_slope_at_zero: float = 0.0

    def __init__(self, widths, X, y, lam=0.0, relu_slope_at_zero=0.0):
        widths = tuple(int(w) for w in widths)
        if len(widths) < 2 or widths[-1] != 1:
            raise ValueError("widths must run input..hidden..1")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X rows ({X.shape[0]}) != y length ({y.shape[0]})")
        if X.shape[0] and X.shape[1] != widths[0]:
            raise ValueError(f"X has {X.shape[1]} features but input width is {widths[0]}")
        if lam < 0:
            raise ValueError("prior precision lam must be nonnegative")
        if not 0.0 <= relu_slope_at_zero <= 1.0:
            raise ValueError("relu_slope_at_zero must lie in [0, 1]")
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lam", float(lam))
        object.__setattr__(self, "relu_slope_at_zero", float(relu_slope_at_zero))

    @property
    def n_params(self) -> int:
        return sum((self.widths[i] + 1) * self.widths[i + 1] for i in range(len(self.widths) - 1))

    def _unpack(self, params):
        out = []
        k = 0
        for i in range(len(self.widths) - 1):
            nin, nout = self.widths[i], self.widths[i + 1]
            W = params[k : k + nin * nout].reshape(nin, nout)
            k += nin * nout
            b = params[k : k + nout]
            k += nout
            out.append((W, b))
        return out

    def _check(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(-1)
        if params.size != self.n_params:
            raise ValueError(f"parameter vector has size {params.size}, expected {self.n_params}")
        return params

    def predict(self, params, X=None) -> np.ndarray:
        params = self._check(params)
        X = self.X if X is None else np.atleast_2d(np.asarray(X, dtype=float))
        a = X
        layers = self._unpack(params)
        for W, b in layers[:-1]:
            a = np.maximum(a @ W + b, 0.0)
        W, b = layers[-1]
        return (a @ W + b).ravel()

    def value(self, params) -> float:
        params = self._check(params)
        v = 0.5 * self.lam * float(params @ params)
        if self.y.size:
            r = self.predict(params) - self.y
            v += float(r @ r) / self.y.size
        return v

    def test_loss(self, params, X_test, y_test) -> float:
        """Plain MSE on held-out data (no prior term)."""
        r = self.predict(params, X_test) - np.asarray(y_test, dtype=float).reshape(-1)
        return float(r @ r) / len(r)

    def drift(self, params, rule: SelectionRule = SelectionRule.MIN_NORM,
              rng: np.random.Generator | None = None) -> np.ndarray:
        # selection is fixed by relu_slope_at_zero; rule/rng accepted for
        # interface compatibility with the 1D potential
        return self.grad(params)

    def grad(self, params) -> np.ndarray:
        """Reverse-mode derivative of value(); uses relu_slope_at_zero at kinks."""
        params = self._check(params)
        g = self.lam * params
        m = self.y.size
        if m == 0:
            return g
        layers = self._unpack(params)
        acts = [self.X]
        pre = []
        a = self.X
        for W, b in layers[:-1]:
            z = a @ W + b
            pre.append(z)
            a = np.maximum(z, 0.0)
            acts.append(a)
        W, b = layers[-1]
        out = (a @ W + b).ravel()
        delta = (2.0 / m) * (out - self.y)[:, None]
        grads = [(acts[-1].T @ delta, delta.sum(axis=0))]
        d = delta @ W.T
        for i in range(len(layers) - 2, -1, -1):
            z = pre[i]
            dz = np.where(z > 0, 1.0, np.where(z < 0, 0.0, self.relu_slope_at_zero))
            d = d * dz
            grads.append((acts[i].T @ d, d.sum(axis=0)))
            if i > 0:
                d = d @ layers[i][0].T
        grads.reverse()
        k = 0
        for gW, gb in grads:
            g[k : k + gW.size] += gW.ravel()
            k += gW.size
            g[k : k + gb.size] += gb
            k += gb.size
        return g

    def init_params(self, seed: int, scale: float = 0.5) -> np.ndarray:
        """Gaussian parameter init on the chain's generator family."""
        rng = np.random.Generator(np.random.Philox(key=seed))
        return rng.normal(0.0, scale, self.n_params)

    @classmethod
    def from_csv(cls, path, widths, lam=0.0, relu_slope_at_zero=0.0) -> "ReLUNetPotential":
        """Load a dataset CSV (header row, last column is the target)."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"empty dataset file: {path}")
        data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
        return cls(widths, data[:, :-1], data[:, -1], lam=lam, relu_slope_at_zero=relu_slope_at_zero)


def make_synthetic_regression(n: int = 200, d: int = 5, seed: int = 7, noise: float = 0.05):
    """Built-in regression task: targets from a random teacher net plus noise.

    Returns (X_train, y_train, X_test, y_test) with a 3:1 split.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    X = rng.normal(size=(n, d))
    widths = (d, 10, 10, 10, 1)
    teacher = ReLUNetPotential(widths, np.zeros((0, d)), np.zeros(0))
    params = rng.normal(0.0, 0.8, teacher.n_params)
    y = teacher.predict(params, X) + noise * rng.normal(size=n)
    n_train = (3 * n) // 4
    return X[:n_train], y[:n_train], X[n_train:], y[n_train:]
