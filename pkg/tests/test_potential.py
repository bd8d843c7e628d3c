import numpy as np
import pytest

from langinc.potential import (
    PiecewisePotential1D,
    ReLUNetPotential,
    SelectionRule,
    SubdiffValue,
    example_potential,
    select,
)

from conftest import random_piecewise_potential


class TestEval:
    def test_builtin_values(self, example):
        assert example.value(0.0) == pytest.approx(1.0, abs=1e-15)
        assert example.value(1.0) == pytest.approx(0.0, abs=1e-15)
        assert example.value(-3.0) == pytest.approx(2.0, abs=1e-15)
        assert example.value(-1.0) == pytest.approx(0.0, abs=1e-15)
        assert example.value(2.0) == pytest.approx(1.0, abs=1e-15)

    def test_vectorized_matches_scalar(self, example):
        xs = np.linspace(-4, 4, 101)
        vec = example.value(xs)
        assert vec == pytest.approx([example.value(float(x)) for x in xs])

    def test_even_symmetry(self, example):
        rng = np.random.default_rng(5)
        xs = rng.uniform(-30, 30, 500)
        assert example.value(xs) == pytest.approx(example.value(-xs), abs=1e-12)


class TestClarkeSubdiff:
    def test_kinks_of_builtin(self, example):
        for theta in (-1.0, 0.0, 1.0):
            v = example.clarke_subdiff(theta)
            assert (v.lo, v.hi) == (-1.0, 1.0)

    def test_smooth_point_singleton(self, example):
        v = example.clarke_subdiff(0.5)
        assert v.lo == v.hi == -1.0

    def test_absolute_value(self):
        p = PiecewisePotential1D([0.0], [[0.0, -1.0], [0.0, 1.0]])
        v = p.clarke_subdiff(0.0)
        assert (v.lo, v.hi) == (-1.0, 1.0)

    def test_fd_consistency_away_from_kinks(self, example):
        rng = np.random.default_rng(11)
        h = 1e-6
        for _ in range(200):
            x = float(rng.uniform(-5, 5))
            if np.min(np.abs(x - example.breakpoints)) <= h:
                continue
            v = example.clarke_subdiff(x)
            fd = (example.value(x + h) - example.value(x - h)) / (2 * h)
            mid = 0.5 * (v.lo + v.hi)
            assert abs(mid - fd) <= 1e-6 * (1 + abs(mid))

    def test_one_sided_limits_at_breakpoints(self):
        rng = np.random.default_rng(21)
        for trial in range(20):
            p = random_piecewise_potential(rng)
            for theta in p.breakpoints:
                v = p.clarke_subdiff(float(theta))
                h = 1e-6
                left_fd = (p.value(theta - h / 2) - p.value(theta - 3 * h / 2)) / h
                right_fd = (p.value(theta + 3 * h / 2) - p.value(theta + h / 2)) / h
                lo, hi = sorted((left_fd, right_fd))
                assert v.lo == pytest.approx(lo, abs=1e-5)
                assert v.hi == pytest.approx(hi, abs=1e-5)


class TestSelect:
    def test_min_norm(self):
        assert select(SubdiffValue(-1.0, 1.0), SelectionRule.MIN_NORM) == 0.0
        assert select(SubdiffValue(2.0, 3.0), SelectionRule.MIN_NORM) == 2.0
        assert select(SubdiffValue(-3.0, -2.0), SelectionRule.MIN_NORM) == -2.0

    def test_limits_and_midpoint(self):
        v = SubdiffValue(-1.0, 1.0)
        assert select(v, SelectionRule.LEFT_LIMIT) == -1.0
        assert select(v, SelectionRule.RIGHT_LIMIT) == 1.0
        assert select(v, SelectionRule.MIDPOINT) == 0.0

    def test_hull_property_all_rules(self, example):
        rng = np.random.default_rng(3)
        xs = np.concatenate([rng.uniform(-4, 4, 100), example.breakpoints])
        for x in xs:
            v = example.clarke_subdiff(float(x))
            for rule in SelectionRule:
                out = select(v, rule, rng)
                assert v.lo <= out <= v.hi

    def test_random_convex_needs_rng(self):
        with pytest.raises(ValueError):
            select(SubdiffValue(0.0, 1.0), SelectionRule.RANDOM_CONVEX)


class TestConstruction:
    def test_rejects_unsorted_breakpoints(self):
        with pytest.raises(ValueError, match="increasing"):
            PiecewisePotential1D([1.0, 0.0], [[0, -1], [0, 0, 1], [0, 1]])

    def test_rejects_discontinuity(self):
        with pytest.raises(ValueError, match="disagree"):
            PiecewisePotential1D([0.0], [[0.0, -1.0], [0.5, 1.0]])

    def test_rejects_non_confining(self):
        with pytest.raises(ValueError, match="confinement"):
            PiecewisePotential1D([0.0], [[0.0, 1.0], [0.0, 1.0]])
        with pytest.raises(ValueError, match="confinement"):
            PiecewisePotential1D([], [[1.0]])

    def test_rejects_wrong_piece_count(self):
        with pytest.raises(ValueError, match="pieces"):
            PiecewisePotential1D([0.0], [[0.0, -1.0]])

    def test_confinement_bound(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            p = random_piecewise_potential(rng)
            c = p.confinement_rate()
            assert c > 0
            hi = p.breakpoints[-1] + 1.0
            lo = p.breakpoints[0] - 1.0
            big = max(abs(hi), abs(lo)) + 50.0
            ref = max(abs(p.value(hi)), abs(p.value(lo)))
            for x in np.linspace(big, big + 30, 7):
                assert p.value(x) >= 0.5 * c * abs(x) - ref - c * big
                assert p.value(-x) >= 0.5 * c * abs(x) - ref - c * big

    def test_from_dict(self):
        p = PiecewisePotential1D.from_dict(
            {"breakpoints": [-1.0, 0.0, 1.0],
             "pieces": [[-1, -1], [1, 1], [1, -1], [-1, 1]]}
        )
        assert p.value(0.5) == example_potential().value(0.5)
        with pytest.raises(ValueError, match="unknown"):
            PiecewisePotential1D.from_dict({"breakpoints": [], "pieces": [[0, 0, 1]], "extra": 1})


class TestReLUNet:
    WIDTHS = (3, 10, 10, 10, 1)

    def _toy(self, m=20, lam=0.0, slope0=0.0, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(m, 3))
        y = rng.normal(size=m)
        return ReLUNetPotential(self.WIDTHS, x, y, lam=lam, relu_slope_at_zero=slope0)

    def test_param_count(self):
        p = self._toy()
        assert p.n_params == 4 * 10 + 11 * 10 + 11 * 10 + 11

    def test_grad_matches_fd_in_smooth_region(self):
        p = self._toy()
        rng = np.random.default_rng(1)
        # large positive biases keep every hidden unit strictly active
        params = 0.1 * rng.normal(size=p.n_params)
        for layer_start, n_in, n_out in ((0, 3, 10), (40, 10, 10), (150, 10, 10)):
            b0 = layer_start + n_in * n_out
            params[b0 : b0 + n_out] = 5.0
        g = p.grad(params)
        h = 1e-6
        for j in rng.integers(0, p.n_params, 12):
            e = np.zeros(p.n_params)
            e[j] = h
            fd = (p.value(params + e) - p.value(params - e)) / (2 * h)
            assert g[j] == pytest.approx(fd, rel=1e-5, abs=1e-8)

    def test_pure_prior(self):
        p = ReLUNetPotential(self.WIDTHS, np.zeros((0, 3)), np.zeros(0), lam=1.0)
        params = np.arange(p.n_params, dtype=float) / p.n_params
        assert p.grad(params) == pytest.approx(params)
        assert p.value(params) == pytest.approx(0.5 * params @ params)

    def test_slope_at_zero_brackets_one_sided_fd(self):
        # single datum, first pre-activation exactly zero: w*1 + b = 0
        widths = (1, 1, 1, 1, 1)
        x = np.array([[1.0]])
        y = np.array([0.0])
        params = np.array([1.0, -1.0, 1.0, 0.5, 1.0, 0.5, 1.0, 0.5])
        p0 = ReLUNetPotential(widths, x, y, relu_slope_at_zero=0.0)
        p1 = ReLUNetPotential(widths, x, y, relu_slope_at_zero=1.0)
        g0 = p0.grad(params)
        g1 = p1.grad(params)
        h = 1e-6
        for j in range(2):  # the weight and bias feeding the zero pre-activation
            e = np.zeros(len(params))
            e[j] = h
            fd_plus = (p0.value(params + e) - p0.value(params)) / h
            fd_minus = (p0.value(params) - p0.value(params - e)) / h
            lo = min(g0[j], g1[j]) - 1e-4
            hi = max(g0[j], g1[j]) + 1e-4
            assert lo <= fd_plus <= hi
            assert lo <= fd_minus <= hi

    def test_dimension_mismatch(self):
        p = self._toy()
        with pytest.raises(ValueError, match="size"):
            p.grad(np.zeros(p.n_params - 1))

    def test_slope_range_validated(self):
        with pytest.raises(ValueError):
            self._toy(slope0=1.5)

    def test_from_csv(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a,b,c,target\n1.0,2.0,3.0,0.5\n0.0,1.0,-1.0,1.5\n")
        p = ReLUNetPotential.from_csv(path, (3, 10, 10, 10, 1), lam=0.1)
        assert p.X.shape == (2, 3)
        assert p.y == pytest.approx([0.5, 1.5])
