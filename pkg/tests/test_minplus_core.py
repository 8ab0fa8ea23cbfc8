import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiclassical.errors import IncompatibleGridError
from semiclassical.minplus_core import (
    Grid1D,
    SampledFunction,
    delta_min,
    inf_convolution,
    legendre_fenchel,
    minplus_combination,
    minplus_dot,
    otimes,
)

INF = math.inf


def brute_conv(grid, f, g):
    """Double loop with the lookup written out longhand."""
    x = list(grid.x)
    out = []
    for i in range(grid.n):
        best = INF
        for j in range(grid.n):
            y = x[i] - x[j]
            k = math.ceil((y - grid.x_min) / grid.dx - 0.5)
            gv = g[k] if 0 <= k < grid.n else INF
            best = min(best, f[j] + gv)
        out.append(best)
    return np.array(out)


def convex_pl(rng, grid, lip, support=None):
    """max of random affine pieces with slopes in [-lip, lip]; +inf outside ``support``."""
    slopes = rng.uniform(-lip, lip, 5)
    offsets = rng.uniform(-1, 1, 5)
    v = np.max(slopes[:, None] * grid.x[None, :] + offsets[:, None], axis=0)
    if support is not None:
        v[(grid.x < support[0]) | (grid.x > support[1])] = INF
    return SampledFunction(grid, v)


class TestTypes:
    def test_grid_samples(self):
        g = Grid1D(-1.0, 1.0, 5)
        assert g.dx == 0.5
        np.testing.assert_array_equal(g.x, [-1.0, -0.5, 0.0, 0.5, 1.0])

    @pytest.mark.parametrize("args", [(1.0, 0.0, 5), (0.0, 1.0, 1), (0.0, 1.0, 2.5)])
    def test_bad_grid(self, args):
        with pytest.raises(ValueError):
            Grid1D(*args)

    @pytest.mark.parametrize("bad", [np.nan, -np.inf])
    def test_values_reject_nan_and_neg_inf(self, bad):
        with pytest.raises(ValueError):
            SampledFunction(Grid1D(0, 1, 3), [0.0, bad, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            SampledFunction(Grid1D(0, 1, 3), [0.0, 1.0])

    def test_otimes_absorbing(self):
        assert otimes(INF, 3.0) == INF
        assert otimes(INF, INF) == INF
        with pytest.raises(ValueError):
            otimes(-INF, 1.0)


class TestDot:
    def test_quadratics(self):
        g = Grid1D(-5, 5, 10001)
        f = SampledFunction(g, g.x**2)
        h = SampledFunction(g, (g.x - 2) ** 2)
        brute = min(a + b for a, b in zip(f.values, h.values))
        assert minplus_dot(f, h) == brute
        assert minplus_dot(f, h) == pytest.approx(2.0, abs=1e-3)

    def test_delta_picks_value(self):
        g = Grid1D(-1, 1, 21)
        f = SampledFunction(g, np.cos(g.x))
        assert minplus_dot(delta_min(g, 0.3), f) == f.values[13]

    def test_infinite_absorbs(self):
        g = Grid1D(-1, 1, 11)
        f = SampledFunction(g, np.full(11, INF))
        assert minplus_dot(f, SampledFunction(g, g.x)) == INF

    def test_grid_mismatch(self):
        a = SampledFunction(Grid1D(0, 1, 3), [0, 0, 0])
        b = SampledFunction(Grid1D(0, 1, 4), [0, 0, 0, 0])
        with pytest.raises(IncompatibleGridError):
            minplus_dot(a, b)


class TestDelta:
    def test_center(self):
        np.testing.assert_array_equal(delta_min(Grid1D(-1, 1, 3), 0.0).values, [INF, 0, INF])

    def test_boundary(self):
        v = delta_min(Grid1D(-1, 1, 5), -1.0).values
        assert v[0] == 0 and np.isinf(v[1:]).all()

    def test_tie_goes_low(self):
        v = delta_min(Grid1D(0, 1, 3), 0.25).values
        np.testing.assert_array_equal(v, [0, INF, INF])

    def test_nearest(self):
        v = delta_min(Grid1D(0, 1, 3), 0.3).values
        np.testing.assert_array_equal(v, [INF, 0, INF])

    def test_outside(self):
        with pytest.raises(ValueError):
            delta_min(Grid1D(0, 1, 3), 1.5)


class TestInfConvolution:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        g = Grid1D(-1, 1, 41)
        f = rng.uniform(-1, 1, g.n)
        h = rng.uniform(-1, 1, g.n)
        h[rng.random(g.n) < 0.2] = INF
        out = inf_convolution(SampledFunction(g, f), SampledFunction(g, h)).values
        np.testing.assert_array_equal(out, brute_conv(g, f, h))

    def test_half_quadratics(self):
        g = Grid1D(-4, 4, 801)
        q = SampledFunction(g, 0.5 * g.x**2)
        out = inf_convolution(q, q).values
        # analytic inf-convolution of two x^2/2 is x^2/4; grid error O(dx)
        inner = np.abs(g.x) <= 2
        assert np.max(np.abs(out - 0.25 * g.x**2)[inner]) <= g.dx

    def test_constant_absorbs_to_minimum(self):
        g = Grid1D(-2, 2, 101)
        out = inf_convolution(SampledFunction(g, np.abs(g.x)), SampledFunction(g, np.zeros(g.n)))
        # every x_i has some j with x_j = 0 and x_i - x_j on the grid
        np.testing.assert_array_equal(out.values, np.zeros(g.n))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_neutral_element(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid1D(-3, 3, 61)
        f = SampledFunction(g, rng.normal(size=g.n) * 10)
        out = inf_convolution(f, delta_min(g, 0.0))
        np.testing.assert_array_equal(out.values, f.values)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_commutative(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid1D(-3, 3, 61)
        f = SampledFunction(g, rng.normal(size=g.n))
        h = SampledFunction(g, np.where(rng.random(g.n) < 0.3, INF, rng.normal(size=g.n)))
        np.testing.assert_array_equal(inf_convolution(f, h).values, inf_convolution(h, f).values)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_associative(self, seed):
        # dyadic values keep every partial sum exact; support in the middle
        # third keeps every intermediate argument on the grid
        rng = np.random.default_rng(seed)
        g = Grid1D(-3, 3, 61)
        middle = np.abs(g.x) <= 1.0 + 1e-12

        def rand():
            v = rng.integers(-800, 800, g.n) / 8.0
            v[~middle | (rng.random(g.n) < 0.2)] = INF
            return SampledFunction(g, v)

        a, b, c = rand(), rand(), rand()
        left = inf_convolution(inf_convolution(a, b), c).values
        right = inf_convolution(a, inf_convolution(b, c)).values
        np.testing.assert_array_equal(left, right)


class TestLegendre:
    def test_quadratic_self_dual(self):
        g = Grid1D(-10, 10, 4001)
        pg = Grid1D(-3, 3, 121)
        fs = legendre_fenchel(SampledFunction(g, 0.5 * g.x**2), pg).values
        brute = np.array([max(p * x - 0.5 * x * x for x in g.x) for p in pg.x])
        np.testing.assert_allclose(fs, brute, rtol=0, atol=1e-12)
        assert np.max(np.abs(fs - 0.5 * pg.x**2)) <= 5e-3

    def test_abs(self):
        g = Grid1D(-10, 10, 4001)
        pg = Grid1D(-0.9, 0.9, 91)
        fs = legendre_fenchel(SampledFunction(g, np.abs(g.x)), pg).values
        brute = np.array([max(p * x - abs(x) for x in g.x) for p in pg.x])
        np.testing.assert_allclose(fs, brute, rtol=0, atol=1e-12)
        assert np.max(np.abs(fs)) <= 5e-3

    def test_constant(self):
        g = Grid1D(-1, 1, 11)
        fs = legendre_fenchel(SampledFunction(g, np.full(11, 2.5)), Grid1D(-1, 1, 3))
        assert fs.values[1] == -2.5

    def test_all_infinite(self):
        g = Grid1D(-1, 1, 11)
        with pytest.raises(ValueError):
            legendre_fenchel(SampledFunction(g, np.full(11, INF)), g)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_convolution_theorem(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid1D(-2, 2, 201)
        lip = 2.0
        f = convex_pl(rng, g, lip, support=(-1, 1))
        h = convex_pl(rng, g, lip, support=(-1, 1))
        pg = Grid1D(-3, 3, 301)
        lhs = legendre_fenchel(inf_convolution(f, h), pg).values
        rhs = legendre_fenchel(f, pg).values + legendre_fenchel(h, pg).values
        assert np.max(np.abs(lhs - rhs)) <= 2 * lip * g.dx

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_involution(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid1D(-1, 1, 201)
        lip = 2.0
        f = convex_pl(rng, g, lip)
        pg = Grid1D(-lip, lip, 4001)
        back = legendre_fenchel(legendre_fenchel(f, pg), g).values
        inner = np.abs(g.x) <= 0.9
        assert np.max(np.abs(back - f.values)[inner]) <= 2 * lip * g.dx


class TestCombination:
    def test_identity(self):
        g = Grid1D(0, 1, 5)
        s = SampledFunction(g, g.x**2)
        np.testing.assert_array_equal(minplus_combination([(0.0, s)]).values, s.values)

    def test_domination(self):
        g = Grid1D(0, 1, 5)
        s = SampledFunction(g, g.x**2)
        other = SampledFunction(g, -g.x)
        big = np.ptp(s.values) + 10
        np.testing.assert_array_equal(minplus_combination([(0.0, s), (big, other)]).values, s.values)

    def test_empty(self):
        with pytest.raises(ValueError):
            minplus_combination([])
