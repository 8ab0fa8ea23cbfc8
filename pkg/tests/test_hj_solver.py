import math

import numpy as np
import pytest

from semiclassical.classical import PotentialSpec, action_closed_form
from semiclassical.errors import CausticError, IncompatibleGridError
from semiclassical.hj_solver import (
    ActionField,
    DensityField,
    combine_action_fields,
    hj_residual,
    hopf_lax_solve,
    min_switch_mask,
    pushforward_density,
    sample_inverse_cdf,
    statistical_hj_solve,
    transport_density,
    velocity_field,
)
from semiclassical.minplus_core import Grid1D, SampledFunction, delta_min


def plane_wave_action(x, t, v0, K, m):
    """Hopf-Lax value for S0 = m v0 x under V = -K x, via the characteristic foot."""
    y = x - v0 * t - K * t * t / (2 * m)
    return m * v0 * y + action_closed_form(x, t, y, PotentialSpec.linear(K, m))


def gaussian(x, mu, s):
    return np.exp(-0.5 * ((x - mu) / s) ** 2) / (s * math.sqrt(2 * math.pi))


class TestOracleValue:
    def test_hand_value(self):
        # foot y = 0, so the value is S_cl(2, 1; 0) = 2 + 2 - 1/6
        assert plane_wave_action(2.0, 1.0, 1.0, 2.0, 1.0) == pytest.approx(23 / 6, abs=1e-14)

    def test_expanded_polynomial(self):
        rng = np.random.default_rng(0)
        x, t, v0, K, m = rng.uniform(-3, 3, 20), rng.uniform(0.1, 2, 20), rng.uniform(-2, 2, 20), \
            rng.uniform(-2, 2, 20), rng.uniform(0.5, 2, 20)
        poly = m * v0 * x - 0.5 * m * v0**2 * t + K * x * t - 0.5 * K * v0 * t**2 - K**2 * t**3 / (6 * m)
        foot = [plane_wave_action(*args) for args in zip(x, t, v0, K, m)]
        np.testing.assert_allclose(foot, poly, atol=1e-12)


class TestHopfLax:
    @pytest.mark.parametrize("t", [0.5, 1.0])
    def test_linear_plane_wave(self, t):
        g = Grid1D(-10, 10, 4001)
        S = hopf_lax_solve(SampledFunction(g, g.x), PotentialSpec.linear(2.0), times=[t])
        mid = np.abs(g.x) <= 5
        err = np.abs(S.S[0] - plane_wave_action(g.x, t, 1.0, 2.0, 1.0))[mid]
        assert err.max() <= 5e-3

    def test_middle_node_value(self):
        g = Grid1D(-10, 10, 4001)
        S = hopf_lax_solve(SampledFunction(g, g.x), PotentialSpec.linear(2.0), times=[1.0])
        assert S.S[0, 2400] == pytest.approx(23 / 6, abs=5e-3)

    @pytest.mark.parametrize("pot", [PotentialSpec.free(), PotentialSpec.linear(-1.0), PotentialSpec.harmonic(1.3)])
    def test_elementary_solution(self, pot):
        g = Grid1D(-5, 5, 401)
        x0 = g.x[123]
        S = hopf_lax_solve(delta_min(g, x0), pot, times=[0.4, 1.0])
        for k, t in enumerate(S.times):
            np.testing.assert_array_equal(S.S[k], action_closed_form(g.x, t, x0, pot))

    def test_refine_never_worse(self):
        g = Grid1D(-5, 5, 201)
        S0 = SampledFunction(g, 0.3 * g.x**2)
        pot = PotentialSpec.free()
        coarse = hopf_lax_solve(S0, pot, times=[1.0], refine=False).S[0]
        fine = hopf_lax_solve(S0, pot, times=[1.0]).S[0]
        assert (fine <= coarse).all()
        # exact value for a quadratic: 0.3 x^2 / (1 + 0.6 t)
        mid = np.abs(g.x) <= 2.5
        assert np.abs(fine - 0.3 * g.x**2 / 1.6)[mid].max() < np.abs(coarse - 0.3 * g.x**2 / 1.6)[mid].max()

    def test_caustic_times_listed(self):
        g = Grid1D(-1, 1, 11)
        with pytest.raises(CausticError, match="3.14"):
            hopf_lax_solve(SampledFunction(g, g.x), PotentialSpec.harmonic(1.0), times=[0.5, math.pi])

    def test_bad_time(self):
        g = Grid1D(-1, 1, 11)
        with pytest.raises(ValueError):
            hopf_lax_solve(SampledFunction(g, g.x), PotentialSpec.free(), times=[0.0])

    def test_grid_mismatch(self):
        g = Grid1D(-1, 1, 11)
        with pytest.raises(IncompatibleGridError):
            hopf_lax_solve(SampledFunction(g, g.x), PotentialSpec.free(), grid=Grid1D(-1, 1, 12))


class TestResidualAndCombination:
    def test_smooth_solution_residual(self):
        g = Grid1D(-10, 10, 801)
        times = np.linspace(0.5, 1.0, 11)
        S = hopf_lax_solve(SampledFunction(g, 0.25 * g.x**2), PotentialSpec.free(), times=times)
        inner = np.zeros_like(S.S, dtype=bool)
        inner[:, np.abs(g.x) > 5] = True
        assert hj_residual(S, PotentialSpec.free(), exclude=inner) <= 1e-2

    def test_min_plus_linearity_exact(self):
        g = Grid1D(-6, 6, 241)
        pot = PotentialSpec.free()
        a = SampledFunction(g, g.x)
        b = SampledFunction(g, -g.x)
        times = [0.5, 1.0]
        both = hopf_lax_solve(SampledFunction(g, np.minimum(a.values, b.values)), pot, times=times, refine=False)
        comb = combine_action_fields(
            [(0.0, hopf_lax_solve(a, pot, times=times, refine=False)),
             (0.0, hopf_lax_solve(b, pot, times=times, refine=False))]
        )
        np.testing.assert_array_equal(both.S, comb.S)

    def test_switch_mask_and_residual(self):
        g = Grid1D(-6, 6, 481)
        pot = PotentialSpec.free()
        times = np.linspace(0.5, 1.0, 11)
        pairs = [(0.0, hopf_lax_solve(SampledFunction(g, s * g.x), pot, times=times)) for s in (1, -1)]
        comb = combine_action_fields(pairs)
        mask = min_switch_mask(pairs)
        # branches swap at x = 0 only
        assert mask[:, 240].all() and not mask[:, 250].any()
        edge = np.zeros_like(mask)
        edge[:, np.abs(g.x) > 3] = True
        assert hj_residual(comb, pot, exclude=mask | edge) <= 1e-6
        assert hj_residual(comb, pot, exclude=edge) > 0.1

    def test_velocity_masks_infinite(self):
        g = Grid1D(-1, 1, 11)
        s = np.tile(g.x, (3, 1))
        s[:, 0] = np.inf
        v = velocity_field(ActionField(g, [0.1, 0.2, 0.3], s), PotentialSpec.free())
        assert v.mask[:, :2].all()
        np.testing.assert_allclose(v[:, 5].data, 1.0)


class TestDensity:
    def test_inverse_cdf_uniform(self):
        x = np.linspace(0, 2, 5)
        u = np.array([0.0, 0.25, 0.5, 0.999])
        np.testing.assert_allclose(sample_inverse_cdf(x, np.ones(5), u), 2 * u)

    def test_density_field_rejects_negative(self):
        g = Grid1D(-1, 1, 3)
        with pytest.raises(ValueError):
            DensityField(g, [1.0], [[0.0, -1.0, 0.0]])

    def test_free_transport_kde(self):
        g = Grid1D(-8, 8, 801)
        pot = PotentialSpec.free()
        rho0 = SampledFunction(g, gaussian(g.x, 0, 1))
        S = hopf_lax_solve(SampledFunction(g, g.x), pot, times=[0.5, 1.0])
        rho = transport_density(rho0, S, pot, n_particles=100_000, seed=3)
        assert rho.mass() == pytest.approx([1, 1], abs=1e-12)
        assert rho.mean()[-1] == pytest.approx(1.0, abs=0.02)
        assert rho.std()[-1] == pytest.approx(1.0, abs=0.03)
        again = transport_density(rho0, S, pot, n_particles=100_000, seed=3)
        np.testing.assert_array_equal(rho.rho, again.rho)

    def test_pushforward_free_exact(self):
        g = Grid1D(-10, 10, 1001)
        pot = PotentialSpec.free()
        rho0 = SampledFunction(g, gaussian(g.x, 0, 1))
        # S0 = 0.5 x^2 spreads the density by (1 + t)
        rho = pushforward_density(rho0, SampledFunction(g, 0.5 * g.x**2), pot, [1.0])
        np.testing.assert_allclose(rho.rho[0], gaussian(g.x, 0, 2), atol=2e-5)

    def test_pushforward_caustic(self):
        g = Grid1D(-5, 5, 201)
        rho0 = SampledFunction(g, gaussian(g.x, 0, 1))
        with pytest.raises(CausticError):
            pushforward_density(rho0, SampledFunction(g, -0.5 * g.x**2), PotentialSpec.free(), [1.5])

    def test_statistical_pair(self):
        g = Grid1D(-10, 10, 801)
        rho0 = SampledFunction(g, gaussian(g.x, 0, 1))
        S, rho = statistical_hj_solve(rho0, SampledFunction(g, g.x), PotentialSpec.free(), times=[1.0],
                                      density="pushforward")
        np.testing.assert_allclose(rho.rho[0], gaussian(g.x, 1, 1), atol=1e-6)
        mid = np.abs(g.x) <= 5
        np.testing.assert_allclose(S.S[0][mid], (g.x - 0.5)[mid], atol=1e-9)
        with pytest.raises(ValueError):
            statistical_hj_solve(rho0, SampledFunction(g, g.x), PotentialSpec.free(), density="histogram")


class TestWorkedValues:
    def test_short_time_limit(self):
        g = Grid1D(-5, 5, 1001)
        s0 = np.sin(g.x)
        S = hopf_lax_solve(SampledFunction(g, s0), PotentialSpec.free(), times=[1e-4])
        assert np.max(np.abs(S.S[0] - s0)) <= 1e-2

    def test_plane_action_gives_constant_velocity(self):
        g = Grid1D(-10, 10, 2001)
        S = ActionField(g, [0.0], [0.7 * g.x])
        np.testing.assert_allclose(velocity_field(S, PotentialSpec.free()).data, 0.7, atol=1e-12)

    def test_free_solution_velocity(self):
        g = Grid1D(-10, 10, 2001)
        S = hopf_lax_solve(SampledFunction(g, 1.5 * g.x), PotentialSpec.free(), times=[1.0])
        v = velocity_field(S, PotentialSpec.free())[0]
        mid = np.abs(g.x) <= 5
        assert np.max(np.abs(v[mid] - 1.5)) <= 1e-8

    def test_closed_form_residual(self):
        g = Grid1D(-10, 10, 4001)  # dx = 5e-3
        m, K, v0 = 1.0, 2.0, 1.0
        t = np.arange(1, 12) * 1e-3 + 0.5
        x = g.x
        S = (m * v0 * x - 0.5 * m * v0**2 * t[:, None] + K * x * t[:, None]
             - 0.5 * K * v0 * t[:, None] ** 2 - K**2 * t[:, None] ** 3 / (6 * m))
        assert hj_residual(ActionField(g, t, S), PotentialSpec.linear(K, m)) <= 1e-6

    def test_hopf_lax_residual(self):
        g = Grid1D(-10, 10, 4001)
        t = np.arange(1, 12) * 1e-3 + 0.5
        S = hopf_lax_solve(SampledFunction(g, g.x), PotentialSpec.linear(2.0), times=t)
        edge = np.zeros_like(S.S, dtype=bool)
        edge[:, np.abs(g.x) > 5] = True
        assert hj_residual(S, PotentialSpec.linear(2.0), exclude=edge) <= 1e-2

    def test_zero_velocity_keeps_density(self):
        g = Grid1D(-8, 8, 801)
        rho0 = SampledFunction(g, gaussian(g.x, 0, 1))
        S = hopf_lax_solve(SampledFunction(g, np.zeros(g.n)), PotentialSpec.free(), times=[1.0])
        rho = transport_density(rho0, S, PotentialSpec.free(), n_particles=100_000, seed=1)
        assert rho.mean()[0] == pytest.approx(0.0, abs=0.02)
        assert rho.std()[0] == pytest.approx(1.0, abs=0.03)

    def test_narrow_density_follows_trajectory(self):
        # constant force K = 2 from x0 = 0, v0 = 1 lands at 1 + 1 = 2 at t = 1
        g = Grid1D(-4, 6, 1001)
        rho0 = SampledFunction(g, gaussian(g.x, 0, 0.05))
        S0 = SampledFunction(g, g.x)
        pot = PotentialSpec.linear(2.0)
        times = np.linspace(0.02, 1.0, 50)
        pf = pushforward_density(rho0, S0, pot, times)
        assert pf.mean()[-1] == pytest.approx(2.0, abs=1e-3)
        kde = transport_density(rho0, hopf_lax_solve(S0, pot, times=times), pot, n_particles=20_000)
        assert kde.mean()[-1] == pytest.approx(2.0, abs=0.02)

    def test_harmonic_below_first_caustic(self):
        g = Grid1D(-5, 5, 401)
        S = hopf_lax_solve(SampledFunction(g, g.x), PotentialSpec.harmonic(1.0), times=[0.5, 0.89 * math.pi])
        assert np.isfinite(S.S).all()


class TestGridInterp:
    def test_matches_numpy(self):
        from semiclassical.hj_solver import grid_interp

        g = Grid1D(-3, 2, 57)
        rng = np.random.default_rng(4)
        vals = rng.normal(size=g.n)
        pos = rng.uniform(-4, 3, 1000)
        np.testing.assert_allclose(grid_interp(pos, g, vals), np.interp(pos, g.x, vals), atol=1e-13)
        np.testing.assert_allclose(grid_interp(g.x, g, vals), vals, atol=1e-13)
