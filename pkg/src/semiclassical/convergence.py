"""hbar -> 0 sweeps against the classical limits, and de Broglie-Bohm ensembles."""
from __future__ import annotations

import logging
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .classical import PotentialSpec, deterministic_action, solve_trajectory
from .errors import ParticleEscapeError
from .hj_solver import grid_interp, sample_inverse_cdf, statistical_hj_solve
from .minplus_core import Grid1D, SampledFunction
from .quantum import (
    CoherentStateParams,
    MadelungFields,
    init_coherent_state,
    madelung_decompose,
    split_step_snapshots,
    wavefunction_from_fields,
)

__all__ = [
    "SweepResult",
    "DeterministicSweepResult",
    "BohmEnsemble",
    "refined_grid",
    "statistical_sweep",
    "deterministic_sweep",
    "bohm_trajectories",
    "equivariance_l1",
    "convergence_order_estimate",
]

log = logging.getLogger(__name__)

EPS_CMP = 1e-3


def _check_hbars(hbars):
    h = np.asarray(hbars, dtype=float)
    if h.size == 0:
        raise ValueError("need at least one hbar value")
    if (h <= 0).any():
        raise ValueError(f"hbar values must be positive, got {list(h)}")
    if (np.diff(h) >= 0).any():
        raise ValueError(f"hbar values must be strictly descending, got {list(h)}")
    return h


def _run_all(fun, hbars, workers):
    """Apply ``fun`` per hbar; results come back in ``hbars`` order whatever the worker count."""
    if workers is not None and workers != 1 and len(hbars) > 1:
        with ThreadPoolExecutor(max_workers=workers or None) as pool:
            return list(pool.map(fun, hbars))
    return [fun(h) for h in hbars]


@dataclass(frozen=True)
class SweepResult:
    hbars: list
    err_S: list
    err_rho: list
    runtimes: list

    def __post_init__(self):
        n = len(self.hbars)
        if not (len(self.err_S) == len(self.err_rho) == len(self.runtimes) == n):
            raise ValueError("sweep columns must have equal length")
        _check_hbars(self.hbars)


@dataclass(frozen=True)
class DeterministicSweepResult:
    hbars: list
    mean_err: list
    var_ratio: list
    err_S: list
    offset_err: list
    runtimes: list


def refined_grid(base: Grid1D, hbar_ref: float, hbar: float) -> Grid1D:
    """Same interval, ``n - 1`` scaled by ``hbar_ref / hbar``."""
    n = int(round((base.n - 1) * hbar_ref / hbar)) + 1
    return Grid1D(base.x_min, base.x_max, n)


def _phase_gap(S_q, S_c, weight, where):
    """Sup of ``|S_q - S_c - c|`` over ``where``, ``c`` the weighted mean gap."""
    d = S_q[where] - S_c[where]
    w = weight[where]
    c = float(np.sum(w * d) / np.sum(w))
    return float(np.max(np.abs(d - c))), c


def _evolve_to(wf, pot, times, dt):
    """States at each of ``times`` (ascending, > 0) using steps no larger than ``dt``."""
    out = []
    t = 0.0
    for t_out in times:
        n = max(1, int(np.ceil((t_out - t) / dt - 1e-9)))
        wf = split_step_snapshots(wf, pot, (t_out - t) / n, n, every=n)[-1]
        out.append(wf)
        t = t_out
    return out


def statistical_sweep(rho0: Callable, S0: Callable, pot: PotentialSpec, grid: Grid1D,
                      times: Sequence[float], hbars: Sequence[float], dt: float = 1e-2,
                      density: str = "pushforward", n_particles: int = 100_000, seed: int = 0,
                      workers: int | None = 1) -> SweepResult:
    """Quantum vs classical statistical Hamilton-Jacobi solution for each ``hbar``.

    ``rho0`` and ``S0`` are plain functions of ``x`` and cannot depend on
    ``hbar``.  ``grid`` is used as is for ``hbars[0]`` and refined
    proportionally to ``1 / hbar`` below it.  Errors are maxima over
    ``times``: ``err_S`` is the sup over the mask where the classical density
    exceeds ``EPS_CMP * max`` after removing the density-weighted mean
    offset; ``err_rho`` is the L1 distance.
    """
    hbars = _check_hbars(hbars)
    times = np.atleast_1d(np.asarray(times, dtype=float))

    def one(hbar):
        start = _time.perf_counter()
        g = refined_grid(grid, hbars[0], hbar)
        r0 = SampledFunction(g, rho0(g.x))
        s0 = SampledFunction(g, S0(g.x))
        S_cl, rho_cl = statistical_hj_solve(r0, s0, pot, g, times, n_particles, seed, density)
        try:
            states = _evolve_to(wavefunction_from_fields(r0, s0, hbar, pot.m), pot, times, dt)
        except Exception as exc:
            raise type(exc)(f"hbar={hbar:g}: {exc}") from exc
        err_S, err_rho = 0.0, 0.0
        for k, wf in enumerate(states):
            f = madelung_decompose(wf)
            rc = rho_cl.rho[k]
            where = f.mask & (rc > EPS_CMP * rc.max()) & np.isfinite(S_cl.S[k])
            err_S = max(err_S, _phase_gap(f.S, S_cl.S[k], f.rho, where)[0])
            err_rho = max(err_rho, float(np.trapezoid(np.abs(f.rho - rc), dx=g.dx)))
        runtime = _time.perf_counter() - start
        log.info("hbar=%g n=%d err_S=%.3e err_rho=%.3e (%.1fs)", hbar, g.n, err_S, err_rho, runtime)
        return err_S, err_rho, runtime

    rows = _run_all(one, list(hbars), workers)
    return SweepResult([float(h) for h in hbars], [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows])


def _wrap_phase(c, period):
    return (c + period / 2) % period - period / 2


def deterministic_sweep(x0: float, v0: float, omega: float, t_eval: float,
                        hbars: Sequence[float], grid: Grid1D, m: float = 1.0,
                        dt: float = 1e-3, workers: int | None = 1) -> DeterministicSweepResult:
    """Coherent states of shrinking width against the single classical trajectory.

    For each ``hbar``: ``mean_err = |<x> - xi(t)|``,
    ``var_ratio = Var / (hbar / 2 m omega)``, ``err_S`` the masked sup gap to
    the deterministic action plus ``-hbar omega t / 2`` after removing a
    global constant, and ``offset_err`` that constant reduced modulo
    ``2 pi hbar``.
    """
    hbars = _check_hbars(hbars)
    pot = PotentialSpec.harmonic(omega, m)

    def one(hbar):
        start = _time.perf_counter()
        p = CoherentStateParams(x0, v0, omega, m, hbar)
        try:
            wf = _evolve_to(init_coherent_state(grid, p), pot, [t_eval], dt)[0]
        except Exception as exc:
            raise type(exc)(f"hbar={hbar:g}: {exc}") from exc
        f = madelung_decompose(wf)
        xi = solve_trajectory(p.state, pot, t_eval).xi[-1]
        S_ref = deterministic_action(grid.x, t_eval, p.state, pot) - hbar * omega * t_eval / 2
        err_S, c = _phase_gap(f.S, S_ref, f.rho, f.mask)
        return (abs(f.mean() - xi), f.variance() / p.sigma**2, err_S,
                abs(_wrap_phase(c, 2 * np.pi * hbar)), _time.perf_counter() - start)

    rows = _run_all(one, list(hbars), workers)
    cols = list(zip(*rows))
    return DeterministicSweepResult([float(h) for h in hbars], *[list(c) for c in cols])


@dataclass(frozen=True, eq=False)
class BohmEnsemble:
    seed: int
    starts: np.ndarray
    paths: np.ndarray
    times: np.ndarray
    n_fallback: int = 0
    v_max: float = field(default=np.inf)

    def __post_init__(self):
        if self.paths.shape[0] != self.starts.size:
            raise ValueError("one path per start position is required")

    def is_continuous(self) -> bool:
        """Every step moves a particle by at most ``v_max * dt``."""
        step = np.abs(np.diff(self.paths, axis=1))
        dt = np.diff(self.times)
        return bool(np.all(step <= self.v_max * dt[None, :] * (1 + 1e-9) + 1e-12))


def _snapshot_velocity(f: MadelungFields, m: float):
    """Central-difference ``S' / m`` on the mask; other samples copy the nearest valid one."""
    S, mask = f.S, f.mask
    n = S.size
    valid = np.zeros(n, dtype=bool)
    valid[1:-1] = mask[1:-1] & mask[:-2] & mask[2:]
    v = np.full(n, np.nan)
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        raise ValueError("snapshot has no interior masked samples")
    v[idx] = (S[idx + 1] - S[idx - 1]) / (2 * f.grid.dx * m)
    pos = np.clip(np.searchsorted(idx, np.arange(n)), 1, max(idx.size - 1, 1))
    left = idx[pos - 1]
    right = idx[np.minimum(pos, idx.size - 1)]
    nearest = np.where(np.abs(np.arange(n) - left) <= np.abs(right - np.arange(n)), left, right)
    return v[nearest], mask


def bohm_trajectories(snapshots: Sequence[MadelungFields], times: Sequence[float], m: float = 1.0,
                      n_particles: int = 10_000, seed: int = 0, substeps: int = 1,
                      starts: np.ndarray | None = None) -> BohmEnsemble:
    """Integrate ``x' = S'(x, t) / m`` from positions drawn from the first snapshot's density.

    Velocities are linear in ``x`` and linear in ``t`` between snapshots;
    RK4 advances ``substeps`` steps per snapshot interval.  Particles found
    where the density mask is off keep the nearest on-mask velocity; more
    than 1% of particles doing so is an error.  Explicit ``starts`` replace
    the random draw.
    """
    times = np.asarray(times, dtype=float)
    if len(snapshots) != times.size or times.size < 2:
        raise ValueError("need one snapshot per time and at least two of them")
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0) or steps[0] <= 0:
        raise ValueError("snapshot times must be uniform and increasing")
    if starts is not None:
        starts = np.atleast_1d(np.asarray(starts, dtype=float))
        n_particles = starts.size
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    grid = snapshots[0].grid
    xs = grid.x
    vel, masks = zip(*[_snapshot_velocity(f, m) for f in snapshots])
    vel = np.array(vel)
    masks = np.array(masks)
    if starts is None:
        rng = np.random.default_rng(seed)
        starts = sample_inverse_cdf(xs, snapshots[0].rho, rng.random(n_particles))

    t0, dt_snap = times[0], steps[0]

    def v_at(x, t):
        a = (t - t0) / dt_snap
        k = min(int(np.floor(a + 1e-12)), times.size - 2)
        w = a - k
        return (1 - w) * grid_interp(x, grid, vel[k]) + w * grid_interp(x, grid, vel[k + 1])

    def off_mask(x, k):
        i = np.clip(np.rint((x - grid.x_min) / grid.dx).astype(np.int64), 0, grid.n - 1)
        return ~masks[k][i]

    x = starts.copy()
    paths = np.empty((n_particles, times.size))
    paths[:, 0] = x
    flagged = off_mask(x, 0)
    h = dt_snap / substeps
    for k in range(times.size - 1):
        for s in range(substeps):
            t = times[k] + s * h
            k1 = v_at(x, t)
            k2 = v_at(x + 0.5 * h * k1, t + 0.5 * h)
            k3 = v_at(x + 0.5 * h * k2, t + 0.5 * h)
            k4 = v_at(x + h * k3, t + h)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        paths[:, k + 1] = x
        flagged |= off_mask(x, k + 1)
    n_fb = int(flagged.sum())
    if n_fb:
        log.info("%d of %d Bohm particles used the masked-region velocity fallback", n_fb, n_particles)
    if n_fb > 0.01 * n_particles:
        raise ParticleEscapeError(
            f"{n_fb / n_particles:.1%} of particles entered masked-off regions; "
            "lower eps_rho or refine the grid"
        )
    return BohmEnsemble(seed, starts, paths, times, n_fb, float(np.abs(vel).max()))


def equivariance_l1(positions: np.ndarray, rho: np.ndarray, grid: Grid1D, bin_width: float = 0.1) -> float:
    """L1 distance between the particle histogram and the bin averages of ``rho``."""
    n_bins = max(1, int(round(grid.length / bin_width)))
    edges = np.linspace(grid.x_min, grid.x_max, n_bins + 1)
    hist, _ = np.histogram(positions, bins=edges, density=False)
    hist = hist / (positions.size * np.diff(edges))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * grid.dx)])
    cdf /= cdf[-1]
    mass = np.diff(np.interp(edges, grid.x, cdf))
    return float(np.sum(np.abs(hist * np.diff(edges) - mass)))


def convergence_order_estimate(sweep, field: str = "err_S") -> float:
    """Least-squares slope of ``log(err)`` against ``log(hbar)``."""
    h = np.asarray(sweep.hbars, dtype=float)
    e = np.asarray(getattr(sweep, field), dtype=float)
    if h.size < 3:
        raise ValueError("need at least three sweep points for an order estimate")
    if (e <= 0).any():
        raise ValueError(f"{field} must be positive for a log-log fit")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])
