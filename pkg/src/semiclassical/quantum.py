"""Split-step Schrödinger evolution and the Madelung (density, phase) picture.

Spectral steps treat the grid as periodic with period ``n * dx``.  States
are expected to be negligible near both ends of the grid; the constructors
enforce an 8-sigma margin.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .classical import ClassicalState, PotentialSpec, deterministic_action, solve_trajectory
from .errors import ResolutionError
from .minplus_core import Grid1D, SampledFunction

__all__ = [
    "WaveFunction",
    "MadelungFields",
    "CoherentStateParams",
    "init_gaussian_packet",
    "init_coherent_state",
    "init_plane_wave",
    "wavefunction_from_fields",
    "spectral_tail",
    "split_step_evolve",
    "split_step_snapshots",
    "madelung_decompose",
    "quantum_potential",
    "madelung_residual",
    "analytic_coherent_state",
]

log = logging.getLogger(__name__)

MARGIN_SIGMAS = 8.0
TAIL_TOL = 1e-10
# fraction of the Nyquist wavenumber above which spectral mass counts as tail
TAIL_START = 0.75


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: Grid1D
    psi: np.ndarray
    hbar: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != (self.grid.n,):
            raise ValueError(f"psi has shape {psi.shape}, expected ({self.grid.n},)")
        if not self.hbar > 0 or not self.m > 0:
            raise ValueError("hbar and m must be positive")
        object.__setattr__(self, "psi", psi)

    @property
    def rho(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def norm(self) -> float:
        return float(np.trapezoid(self.rho, dx=self.grid.dx))

    def mean(self) -> float:
        return float(np.trapezoid(self.rho * self.grid.x, dx=self.grid.dx) / self.norm())

    def variance(self) -> float:
        mu = self.mean()
        return float(np.trapezoid(self.rho * (self.grid.x - mu) ** 2, dx=self.grid.dx) / self.norm())

    def normalized(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.psi / np.sqrt(self.norm()), self.hbar, self.m)


@dataclass(frozen=True, eq=False)
class MadelungFields:
    """``rho = |psi|**2`` and the unwrapped phase ``S`` (NaN off the mask)."""

    grid: Grid1D
    rho: np.ndarray
    S: np.ndarray
    mask: np.ndarray
    hbar: float = 1.0

    def reconstruct(self) -> np.ndarray:
        """``sqrt(rho) exp(i S / hbar)`` on the mask, 0 elsewhere."""
        psi = np.zeros(self.grid.n, dtype=complex)
        m = self.mask
        psi[m] = np.sqrt(self.rho[m]) * np.exp(1j * self.S[m] / self.hbar)
        return psi

    def mean(self) -> float:
        dx = self.grid.dx
        return float(np.trapezoid(self.rho * self.grid.x, dx=dx) / np.trapezoid(self.rho, dx=dx))

    def variance(self) -> float:
        dx = self.grid.dx
        mu = self.mean()
        return float(np.trapezoid(self.rho * (self.grid.x - mu) ** 2, dx=dx) / np.trapezoid(self.rho, dx=dx))


@dataclass(frozen=True)
class CoherentStateParams:
    x0: float
    v0: float
    omega: float
    m: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("omega", "m", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.hbar / (2 * self.m * self.omega)))

    @property
    def potential(self) -> PotentialSpec:
        return PotentialSpec.harmonic(self.omega, self.m)

    @property
    def state(self) -> ClassicalState:
        return ClassicalState(self.x0, self.v0)

    @property
    def amplitude(self) -> float:
        return float(np.hypot(self.x0, self.v0 / self.omega))


def _require_span(grid, lo, hi, what):
    if lo < grid.x_min or hi > grid.x_max:
        raise ResolutionError(
            f"grid [{grid.x_min}, {grid.x_max}] does not cover [{lo:.4g}, {hi:.4g}] needed for {what}"
        )


def _gaussian_psi(grid, x0, v0, sigma, hbar, m):
    x = grid.x
    amp = (2 * np.pi * sigma**2) ** -0.25 * np.exp(-((x - x0) ** 2) / (4 * sigma**2))
    return WaveFunction(grid, amp * np.exp(1j * m * v0 * x / hbar), hbar, m).normalized()


def init_gaussian_packet(grid: Grid1D, x0: float, v0: float, sigma: float,
                         hbar: float = 1.0, m: float = 1.0) -> WaveFunction:
    """Gaussian of position width ``sigma`` carrying the plane phase ``m v0 x / hbar``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    _require_span(grid, x0 - MARGIN_SIGMAS * sigma, x0 + MARGIN_SIGMAS * sigma, "the packet")
    return _gaussian_psi(grid, x0, v0, sigma, hbar, m)


def init_coherent_state(grid: Grid1D, params: CoherentStateParams) -> WaveFunction:
    """Harmonic coherent state: width ``sqrt(hbar / 2 m omega)``, phase ``m v0 x / hbar``.

    The grid must hold the whole classical orbit plus an 8-sigma margin.
    """
    s, a = params.sigma, params.amplitude
    _require_span(grid, -a - MARGIN_SIGMAS * s, a + MARGIN_SIGMAS * s, "the coherent-state orbit")
    return _gaussian_psi(grid, params.x0, params.v0, s, params.hbar, params.m)


def init_plane_wave(grid: Grid1D, v0: float, hbar: float = 1.0, m: float = 1.0) -> WaveFunction:
    """Uniform density, phase ``m v0 x / hbar``."""
    return WaveFunction(grid, np.exp(1j * m * v0 * grid.x / hbar), hbar, m).normalized()


def wavefunction_from_fields(rho0: SampledFunction, S0: SampledFunction, hbar: float,
                             m: float = 1.0) -> WaveFunction:
    """``sqrt(rho0) exp(i S0 / hbar)``, normalised."""
    if rho0.grid != S0.grid:
        raise ValueError("rho0 and S0 must share a grid")
    psi = np.sqrt(np.clip(rho0.values, 0, None)) * np.exp(1j * S0.values / hbar)
    return WaveFunction(rho0.grid, psi, hbar, m).normalized()


def _wavenumbers(grid):
    return 2 * np.pi * np.fft.fftfreq(grid.n, d=grid.dx)


def spectral_tail(wf: WaveFunction) -> float:
    """Fraction of spectral power above ``TAIL_START`` of the Nyquist wavenumber."""
    k = _wavenumbers(wf.grid)
    power = np.abs(np.fft.fft(wf.psi)) ** 2
    k_nyq = np.pi / wf.grid.dx
    return float(power[np.abs(k) > TAIL_START * k_nyq].sum() / power.sum())


def _check_tail(wf, when):
    tail = spectral_tail(wf)
    if tail > TAIL_TOL:
        raise ResolutionError(
            f"spectral tail mass {tail:.2e} {when} exceeds {TAIL_TOL:g}; refine the grid"
        )


class _Stepper:
    """Strang step ``exp(-iV dt/2hbar) F^-1 exp(-i hbar k^2 dt/2m) F exp(-iV dt/2hbar)``."""

    def __init__(self, grid, pot, dt, hbar, m):
        k = _wavenumbers(grid)
        self.half_v = np.exp(-0.5j * pot.V(grid.x) * dt / hbar)
        self.kinetic = np.exp(-0.5j * hbar * k**2 * dt / m)

    def __call__(self, psi):
        return self.half_v * np.fft.ifft(self.kinetic * np.fft.fft(self.half_v * psi))


def split_step_evolve(wf: WaveFunction, pot: PotentialSpec, dt: float, n_steps: int) -> WaveFunction:
    """Advance ``wf`` by ``n_steps`` Strang split-step steps of size ``dt``."""
    return split_step_snapshots(wf, pot, dt, n_steps, every=max(n_steps, 1))[-1]


def split_step_snapshots(wf: WaveFunction, pot: PotentialSpec, dt: float, n_steps: int,
                         every: int = 1) -> list[WaveFunction]:
    """States at steps ``0, every, 2*every, ...`` (and the final step) of a split-step run."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_steps < 0 or every < 1:
        raise ValueError("n_steps must be >= 0 and every >= 1")
    if abs(pot.m - wf.m) > 1e-15 * wf.m:
        raise ValueError(f"potential mass {pot.m} differs from wave-function mass {wf.m}")
    out = [wf]
    if n_steps == 0:
        return out
    _check_tail(wf, "in the initial state")
    step = _Stepper(wf.grid, pot, dt, wf.hbar, wf.m)
    psi = wf.psi
    for i in range(1, n_steps + 1):
        psi = step(psi)
        if i % every == 0 or i == n_steps:
            out.append(WaveFunction(wf.grid, psi, wf.hbar, wf.m))
    _check_tail(out[-1], "after evolution")
    return out


def _components(mask):
    """``(start, stop)`` index ranges of the runs of True in ``mask``."""
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def _wrap(phase):
    """Map phase increments to (-pi, pi]."""
    out = np.angle(np.exp(1j * phase)) if np.iscomplexobj(phase) else np.asarray(phase, dtype=float)
    return np.where(out <= -np.pi, out + 2 * np.pi, out)


def madelung_decompose(wf: WaveFunction, eps_rho: float | None = None) -> MadelungFields:
    """Split ``psi`` into ``rho`` and an unwrapped action ``S`` with ``psi = sqrt(rho) e^{iS/hbar}``.

    Each connected run of ``rho >= eps_rho`` (default ``1e-6 * max rho``) is
    unwrapped separately, anchored at its density maximum where
    ``S = hbar * arg psi``.  ``S`` is NaN off the mask.
    """
    rho = wf.rho
    if eps_rho is None:
        eps_rho = 1e-6 * rho.max()
    if not eps_rho > 0:
        raise ValueError(f"eps_rho must be positive, got {eps_rho}")
    mask = rho >= eps_rho
    if not mask.any():
        raise ValueError(f"no sample has density >= eps_rho={eps_rho:g}")
    psi = wf.psi
    S = np.full(wf.grid.n, np.nan)
    increments = _wrap(np.angle(psi[1:] * np.conj(psi[:-1])))
    for a, b in _components(mask):
        anchor = a + int(np.argmax(rho[a:b]))
        phase = np.empty(b - a)
        j = anchor - a
        phase[j] = np.angle(psi[anchor])
        phase[j + 1:] = phase[j] + np.cumsum(increments[anchor:b - 1])
        phase[:j] = phase[j] - np.cumsum(increments[a:anchor][::-1])[::-1]
        S[a:b] = wf.hbar * phase
    return MadelungFields(wf.grid, rho, S, mask, wf.hbar)


def quantum_potential(rho, hbar: float, m: float = 1.0, grid: Grid1D | None = None,
                      mask: np.ndarray | None = None) -> np.ndarray:
    """``Q = -(hbar**2 / 2m) (sqrt rho)'' / sqrt rho`` by second central differences.

    ``rho`` is a :class:`SampledFunction` or an array together with ``grid``.
    NaN at the two end samples and wherever ``mask`` is False or ``rho`` is 0.
    """
    if isinstance(rho, SampledFunction):
        grid, rho = rho.grid, rho.values
    elif grid is None:
        raise ValueError("a grid is needed when rho is a bare array")
    rho = np.asarray(rho, dtype=float)
    if (rho < 0).any():
        raise ValueError("rho must be non-negative")
    amp = np.sqrt(rho)
    Q = np.full(rho.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = (amp[2:] - 2 * amp[1:-1] + amp[:-2]) / grid.dx**2
        Q[1:-1] = -(hbar**2) / (2 * m) * lap / amp[1:-1]
    Q[~np.isfinite(Q)] = np.nan
    if mask is not None:
        Q[~np.asarray(mask, dtype=bool)] = np.nan
    return Q


def madelung_residual(fields_t, dt: float, pot: PotentialSpec, hbar: float, m: float = 1.0,
                      quantum: bool = True) -> tuple[float, float]:
    """Max residuals of the Madelung phase and continuity equations at the middle snapshot.

    ``fields_t`` holds snapshots at ``t - dt, t, t + dt``.  Phase branches of
    the outer snapshots are aligned sample by sample to the middle one
    modulo ``2 pi hbar``.  ``quantum=False`` drops the quantum-potential
    term (a negative control).
    """
    prev, now, nxt = fields_t
    grid = now.grid
    dx = grid.dx
    two_pi_h = 2 * np.pi * hbar

    def aligned(f):
        k = np.round((f.S - now.S) / two_pi_h)
        return f.S - two_pi_h * k

    valid = prev.mask & now.mask & nxt.mask
    inner = np.zeros(grid.n, dtype=bool)
    inner[1:-1] = valid[1:-1] & now.mask[:-2] & now.mask[2:]
    if not inner.any():
        raise ValueError("the three snapshots share no interior masked samples")
    i = np.flatnonzero(inner)
    S = now.S
    s_t = (aligned(nxt)[i] - aligned(prev)[i]) / (2 * dt)
    s_x = (S[i + 1] - S[i - 1]) / (2 * dx)
    s_xx = (S[i + 1] - 2 * S[i] + S[i - 1]) / dx**2
    rho = now.rho
    r_t = (nxt.rho[i] - prev.rho[i]) / (2 * dt)
    r_x = (rho[i + 1] - rho[i - 1]) / (2 * dx)
    phase = s_t + s_x**2 / (2 * m) + pot.V(grid.x[i])
    if quantum:
        phase = phase + quantum_potential(rho, hbar, m, grid)[i]
    continuity = r_t + (r_x * s_x + rho[i] * s_xx) / m
    return float(np.max(np.abs(phase))), float(np.max(np.abs(continuity)))


def analytic_coherent_state(params: CoherentStateParams, t: float, grid: Grid1D,
                            eps_rho: float | None = None) -> MadelungFields:
    """Exact density and action of the 1-D harmonic coherent state at time ``t``.

    ``rho`` is the Gaussian of width ``sigma_hbar`` centred on the classical
    path ``xi(t)``; ``S = m xi'(t) x + g(t) - hbar omega t / 2`` with ``xi``
    and ``g`` from the classical integrator.
    """
    pot, state = params.potential, params.state
    s = params.sigma
    x = grid.x
    if t == 0:
        xi = params.x0
    else:
        xi = solve_trajectory(state, pot, t).xi[-1]
    rho = (2 * np.pi * s**2) ** -0.5 * np.exp(-((x - xi) ** 2) / (2 * s**2))
    S = deterministic_action(x, t, state, pot) - params.hbar * params.omega * t / 2
    if eps_rho is None:
        eps_rho = 1e-6 * rho.max()
    mask = rho >= eps_rho
    return MadelungFields(grid, rho, np.where(mask, S, np.nan), mask, params.hbar)
