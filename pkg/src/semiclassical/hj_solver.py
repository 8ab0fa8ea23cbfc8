"""Hamilton-Jacobi action by the Hopf-Lax formula, and classical density transport."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .classical import PotentialSpec, _check_caustic, _rk4, action_closed_form
from .errors import CausticError, IncompatibleGridError, ParticleEscapeError
from .minplus_core import Grid1D, SampledFunction, minplus_combination

__all__ = [
    "ActionField",
    "DensityField",
    "hopf_lax_solve",
    "velocity_field",
    "hj_residual",
    "combine_action_fields",
    "min_switch_mask",
    "sample_inverse_cdf",
    "transport_density",
    "pushforward_density",
    "statistical_hj_solve",
]

log = logging.getLogger(__name__)

_CHUNK = 256


@dataclass(frozen=True, eq=False)
class ActionField:
    """``S[k, i] = S(x_i, t_k)``; entries may be +inf."""

    grid: Grid1D
    times: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        S = np.asarray(self.S, dtype=float)
        if S.shape != (times.size, self.grid.n):
            raise ValueError(f"S has shape {S.shape}, expected {(times.size, self.grid.n)}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "S", S)

    def at(self, k: int) -> SampledFunction:
        return SampledFunction(self.grid, self.S[k])


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: Grid1D
    times: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != (len(self.times), self.grid.n):
            raise ValueError(f"rho has shape {rho.shape}, expected {(len(self.times), self.grid.n)}")
        if (rho < 0).any():
            raise ValueError("density must be non-negative")

    def mass(self) -> np.ndarray:
        return np.trapezoid(self.rho, dx=self.grid.dx, axis=1)

    def mean(self) -> np.ndarray:
        return np.trapezoid(self.rho * self.grid.x, dx=self.grid.dx, axis=1) / self.mass()

    def std(self) -> np.ndarray:
        x = self.grid.x
        mu = self.mean()[:, None]
        var = np.trapezoid(self.rho * (x - mu) ** 2, dx=self.grid.dx, axis=1) / self.mass()
        return np.sqrt(var)


def _refine(phi_m, phi_0, phi_p):
    """Vertex value of the parabola through three equally spaced samples."""
    curv = phi_m - 2 * phi_0 + phi_p
    ok = np.isfinite(phi_m) & np.isfinite(phi_p) & (curv > 0)
    out = phi_0.copy()
    with np.errstate(invalid="ignore", divide="ignore"):
        vertex = phi_0 - (phi_p - phi_m) ** 2 / (8 * curv)
    out[ok] = np.minimum(phi_0[ok], vertex[ok])
    return out


def hopf_lax_solve(S0: SampledFunction, pot: PotentialSpec, grid: Grid1D | None = None,
                   times: Sequence[float] = (1.0,), refine: bool = True) -> ActionField:
    """``S(x_i, t) = min_j S0(x_j) + S_cl(x_i, t; x_j)`` on the grid of ``S0``.

    Minimisation is restricted to grid nodes (``S0`` is +inf off the grid).
    With ``refine`` the discrete minimum is improved by a parabola through
    the minimiser and its two neighbours whenever both are finite, the
    minimiser is interior, and the parabola is convex.
    """
    grid = S0.grid if grid is None else grid
    if grid != S0.grid:
        raise IncompatibleGridError("S0 must be sampled on the solve grid")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if (times <= 0).any():
        raise ValueError(f"Hopf-Lax times must be positive, got {times[times <= 0]}")
    bad = []
    for t in times:
        try:
            _check_caustic(t, pot)
        except CausticError:
            bad.append(float(t))
    if bad:
        raise CausticError(f"harmonic caustic at times {bad}")

    x = grid.x
    n = grid.n
    finite = np.isfinite(S0.values)
    j_fin = np.flatnonzero(finite)
    s0 = S0.values[finite]
    out = np.empty((times.size, n))
    for k, t in enumerate(times):
        for start in range(0, n, _CHUNK):
            sl = slice(start, min(start + _CHUNK, n))
            # +inf entries of S0 are dropped rather than added
            phi = s0[None, :] + action_closed_form(x[sl, None], t, x[None, j_fin], pot)
            jm = np.argmin(phi, axis=1)
            rows = np.arange(phi.shape[0])
            best = phi[rows, jm]
            if refine:
                # neighbours count only if they are adjacent grid nodes with finite S0
                j0 = j_fin[jm]
                lo = np.maximum(jm - 1, 0)
                hi = np.minimum(jm + 1, j_fin.size - 1)
                inner = (jm > 0) & (jm < j_fin.size - 1)
                inner &= (j_fin[lo] == j0 - 1) & (j_fin[hi] == j0 + 1)
                r = rows[inner]
                best[inner] = _refine(phi[r, lo[inner]], best[inner], phi[r, hi[inner]])
            out[k, sl] = best
    return ActionField(grid, times, out)


def _x_gradient(S, dx):
    """Central differences in x, one-sided at the ends; NaN where a stencil value is not finite."""
    g = np.full(S.shape, np.nan)
    with np.errstate(invalid="ignore"):
        g[..., 1:-1] = (S[..., 2:] - S[..., :-2]) / (2 * dx)
        g[..., 0] = (S[..., 1] - S[..., 0]) / dx
        g[..., -1] = (S[..., -1] - S[..., -2]) / dx
    bad = ~np.isfinite(S)
    stencil = bad.copy()
    stencil[..., 1:] |= bad[..., :-1]
    stencil[..., :-1] |= bad[..., 1:]
    g[stencil | ~np.isfinite(g)] = np.nan
    return g


def velocity_field(S: ActionField, pot: PotentialSpec) -> np.ma.MaskedArray:
    """``grad S / m`` by finite differences; samples next to +inf values are masked."""
    v = _x_gradient(S.S, S.grid.dx) / pot.m
    return np.ma.masked_invalid(v)


def hj_residual(S: ActionField, pot: PotentialSpec, exclude: np.ndarray | None = None) -> float:
    """Max over interior samples of ``|S_t + S_x**2 / 2m + V|`` (central differences).

    Samples whose stencil touches a non-finite value, or that are flagged in
    ``exclude`` (shape of ``S.S``), are skipped.
    """
    if S.times.size < 3:
        raise ValueError("hj_residual needs at least three time samples")
    s, t, dx = S.S, S.times, S.grid.dx
    with np.errstate(invalid="ignore"):
        s_t = (s[2:, 1:-1] - s[:-2, 1:-1]) / (t[2:] - t[:-2])[:, None]
        s_x = (s[1:-1, 2:] - s[1:-1, :-2]) / (2 * dx)
        r = np.abs(s_t + s_x**2 / (2 * pot.m) + pot.V(S.grid.x[1:-1])[None, :])
    ok = np.isfinite(r)
    if exclude is not None:
        ok &= ~np.asarray(exclude, dtype=bool)[1:-1, 1:-1]
    if not ok.any():
        raise ValueError("no interior samples left to evaluate the residual on")
    return float(r[ok].max())


def combine_action_fields(pairs: Sequence[tuple[float, ActionField]]) -> ActionField:
    """Min-plus combination ``min_k offset_k + S_k`` applied at every time level."""
    if not pairs:
        raise ValueError("need at least one (offset, ActionField) pair")
    first = pairs[0][1]
    for _, f in pairs:
        if f.grid != first.grid or not np.array_equal(f.times, first.times):
            raise IncompatibleGridError("action fields must share grid and times")
    rows = [
        minplus_combination([(c, f.at(k)) for c, f in pairs]).values
        for k in range(first.times.size)
    ]
    return ActionField(first.grid, first.times, np.array(rows))


def min_switch_mask(pairs: Sequence[tuple[float, ActionField]], band: int = 3) -> np.ndarray:
    """Flag samples within ``band`` nodes of a change in the winning branch of a combination."""
    stack = np.array([c + f.S for c, f in pairs])
    branch = np.argmin(stack, axis=0)
    switch = np.zeros(branch.shape, dtype=bool)
    change = branch[:, 1:] != branch[:, :-1]
    switch[:, 1:] |= change
    switch[:, :-1] |= change
    out = switch.copy()
    for s in range(1, band + 1):
        out[:, s:] |= switch[:, :-s]
        out[:, :-s] |= switch[:, s:]
    return out


def grid_interp(pos: np.ndarray, grid: Grid1D, values: np.ndarray) -> np.ndarray:
    """Linear interpolation of samples on ``grid``, constant beyond the ends.

    Same result as ``np.interp(pos, grid.x, values)`` up to rounding, but the
    cell index comes from arithmetic instead of a binary search.
    """
    u = (pos - grid.x_min) / grid.dx
    i = np.clip(np.floor(u).astype(np.int64), 0, grid.n - 2)
    w = np.clip(u - i, 0.0, 1.0)
    return values[i] + w * (values[i + 1] - values[i])


def sample_inverse_cdf(x: np.ndarray, density: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Map uniforms ``u`` in [0, 1) through the inverse of the piecewise-linear CDF of ``density``."""
    density = np.clip(np.asarray(density, dtype=float), 0, None)
    cell = 0.5 * (density[1:] + density[:-1]) * np.diff(x)
    cdf = np.concatenate([[0.0], np.cumsum(cell)])
    if cdf[-1] <= 0:
        raise ValueError("density has no mass")
    cdf /= cdf[-1]
    idx = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(x) - 2)
    width = cdf[idx + 1] - cdf[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(width > 0, (u - cdf[idx]) / width, 0.0)
    return x[idx] + frac * (x[idx + 1] - x[idx])


def _binned_kde(samples, grid: Grid1D):
    """Gaussian KDE with the normal-reference bandwidth, evaluated by linear binning + smoothing."""
    n = samples.size
    bw = 1.06 * np.std(samples) * n ** (-1 / 5)
    u = (samples - grid.x_min) / grid.dx
    lo = np.clip(np.floor(u).astype(np.int64), 0, grid.n - 2)
    w = np.clip(u - lo, 0.0, 1.0)
    counts = np.bincount(lo, weights=1 - w, minlength=grid.n) + np.bincount(lo + 1, weights=w, minlength=grid.n)
    rho = gaussian_filter1d(counts, bw / grid.dx, mode="constant") if bw > 0 else counts
    rho = np.clip(rho, 0, None)
    return rho / np.trapezoid(rho, dx=grid.dx)


def _time_steps(t_from, t_to, max_step):
    n = max(1, int(np.ceil((t_to - t_from) / max_step - 1e-12)))
    return n, (t_to - t_from) / n


def transport_density(rho0: SampledFunction, S: ActionField, pot: PotentialSpec,
                      n_particles: int = 100_000, seed: int = 0,
                      max_step: float = 1e-2) -> DensityField:
    """Density at ``S.times`` by advecting particles along ``grad S / m`` and a KDE.

    Particles start from ``rho0`` by inverse-CDF sampling and move with RK4;
    velocities are linear in x and nearest in t.  Particles leaving the grid
    are clamped to its edge; more than 1% clamped is an error.
    """
    grid = S.grid
    if rho0.grid != grid:
        raise IncompatibleGridError("rho0 and S must share a grid")
    if (rho0.values < 0).any():
        raise ValueError("rho0 must be non-negative")
    rng = np.random.default_rng(seed)
    x = sample_inverse_cdf(grid.x, rho0.values, rng.random(n_particles))
    v = velocity_field(S, pot)
    xs = grid.x
    rows = []
    for k in range(S.times.size):
        row = v[k]
        if np.ma.is_masked(row):
            good = ~np.ma.getmaskarray(row)
            rows.append(np.interp(xs, xs[good], row.data[good]))
        else:
            rows.append(np.asarray(row))
    rows = np.array(rows)

    def vel(pos, t):
        k = int(np.argmin(np.abs(S.times - t)))
        return grid_interp(pos, grid, rows[k])

    escaped = np.zeros(n_particles, dtype=bool)
    out = np.empty((S.times.size, grid.n))
    t = 0.0
    for k, t_out in enumerate(S.times):
        n_sub, h = _time_steps(t, t_out, max_step)
        for _ in range(n_sub):
            k1 = vel(x, t)
            k2 = vel(x + 0.5 * h * k1, t + 0.5 * h)
            k3 = vel(x + 0.5 * h * k2, t + 0.5 * h)
            k4 = vel(x + h * k3, t + h)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
            out_of = (x < grid.x_min) | (x > grid.x_max)
            escaped |= out_of
            x = np.clip(x, grid.x_min, grid.x_max)
        t = float(t_out)
        frac = escaped.mean()
        if frac > 0.01:
            raise ParticleEscapeError(
                f"{frac:.1%} of particles left [{grid.x_min}, {grid.x_max}] by t={t_out}; use a larger grid"
            )
        out[k] = _binned_kde(x, grid)
    if escaped.any():
        log.info("%d particles clamped at the grid edge", int(escaped.sum()))
    return DensityField(grid, S.times, out)


def pushforward_density(rho0: SampledFunction, S0: SampledFunction, pot: PotentialSpec,
                        times: Sequence[float], max_step: float = 1e-3) -> DensityField:
    """Density at ``times`` by the deterministic Lagrangian push-forward of ``rho0``.

    Every grid node ``y`` is a characteristic with initial velocity
    ``S0'(y) / m`` moved by Newton's law; the density at ``X(y, t)`` is
    ``rho0(y) / X_y(y, t)``, read back onto the grid by linear interpolation.
    Requires ``X`` to stay monotone in ``y`` (no caustic).
    """
    grid = rho0.grid
    if S0.grid != grid:
        raise IncompatibleGridError("rho0 and S0 must share a grid")
    y = grid.x
    x = y.copy()
    v = np.gradient(S0.values, grid.dx) / pot.m
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty((times.size, grid.n))
    t = 0.0
    for k, t_out in enumerate(times):
        if t_out > t:
            n_sub, h = _time_steps(t, t_out, max_step)
            xs, vs = _rk4(x, v, pot, h, n_sub)
            x, v = xs[-1], vs[-1]
            t = float(t_out)
        jac = np.gradient(x, grid.dx)
        if (jac <= 0).any():
            raise CausticError(f"characteristics cross before t={t_out}")
        rho = np.interp(grid.x, x, rho0.values / jac, left=0.0, right=0.0)
        out[k] = rho / np.trapezoid(rho, dx=grid.dx)
    return DensityField(grid, times, out)


def statistical_hj_solve(rho0: SampledFunction, S0: SampledFunction, pot: PotentialSpec,
                         grid: Grid1D | None = None, times: Sequence[float] = (1.0,),
                         n_particles: int = 100_000, seed: int = 0,
                         density: str = "kde") -> tuple[ActionField, DensityField]:
    """Classical pair ``(S, rho)`` of the statistical Hamilton-Jacobi system.

    ``density="kde"`` transports particles along the Hopf-Lax velocity field;
    ``density="pushforward"`` uses the deterministic Lagrangian map instead.
    """
    S = hopf_lax_solve(S0, pot, grid, times)
    if density == "kde":
        rho = transport_density(rho0, S, pot, n_particles, seed)
    elif density == "pushforward":
        rho = pushforward_density(rho0, S0, pot, S.times)
    else:
        raise ValueError(f"unknown density method {density!r}")
    return S, rho
