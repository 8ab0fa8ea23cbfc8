"""Classical 1-D mechanics: trajectories and the three actions.

Potentials use the sign convention ``L = m v**2 / 2 - V(x)`` with
``V = -K x`` for the linear kind, so that ``L = m v**2 / 2 + K x``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import CausticError, ShootingError

__all__ = [
    "PotentialSpec",
    "ClassicalState",
    "Trajectory",
    "solve_trajectory",
    "action_closed_form",
    "action_numeric",
    "initial_velocity_from_endpoints",
    "deterministic_action",
    "deterministic_g",
    "deterministic_hj_residual",
]

KINDS = ("free", "linear", "harmonic")


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "free"
    m: float = 1.0
    K: float = 0.0
    omega: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if self.kind == "harmonic" and not (self.omega is not None and self.omega > 0):
            raise ValueError(f"harmonic potential needs omega > 0, got {self.omega}")

    @classmethod
    def free(cls, m=1.0):
        return cls("free", m=m)

    @classmethod
    def linear(cls, K, m=1.0):
        return cls("linear", m=m, K=K)

    @classmethod
    def harmonic(cls, omega, m=1.0):
        return cls("harmonic", m=m, omega=omega)

    @property
    def force_constant(self) -> float:
        return self.K if self.kind == "linear" else 0.0

    def V(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "linear":
            return -self.K * x
        return 0.5 * self.m * self.omega**2 * x**2

    def force(self, x):
        """``-V'(x)``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "linear":
            return np.full_like(x, self.K)
        return -self.m * self.omega**2 * x

    def curvature(self, x):
        """``V''(x)``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "harmonic":
            return np.full_like(x, self.m * self.omega**2)
        return np.zeros_like(x)

    def acceleration(self, x):
        return self.force(x) / self.m

    @property
    def time_scale(self) -> float:
        """Oscillation period for the harmonic kind, 1 otherwise."""
        return 2 * np.pi / self.omega if self.kind == "harmonic" else 1.0

    @property
    def default_dt(self) -> float:
        return 1e-3 * self.time_scale


@dataclass(frozen=True)
class ClassicalState:
    x0: float
    v0: float

    def __post_init__(self):
        if not (np.isfinite(self.x0) and np.isfinite(self.v0)):
            raise ValueError(f"initial state must be finite, got ({self.x0}, {self.v0})")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    xi: np.ndarray
    xi_dot: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def energy(self, pot: PotentialSpec) -> np.ndarray:
        return 0.5 * pot.m * self.xi_dot**2 + pot.V(self.xi)


def _rk4(x, v, pot, dt, n_steps, tangent=False):
    """Classic RK4 for ``x' = v, v' = a(x)``; columns are one trajectory each.

    With ``tangent=True`` also integrates the variational equation for
    ``d(x, v) / d v0`` and returns it.
    """
    a = pot.acceleration
    xs = np.empty((n_steps + 1,) + np.shape(x))
    vs = np.empty_like(xs)
    xs[0], vs[0] = x, v
    dx, dv = np.zeros_like(x), np.ones_like(x)
    for k in range(n_steps):
        k1x, k1v = v, a(x)
        k2x, k2v = v + 0.5 * dt * k1v, a(x + 0.5 * dt * k1x)
        k3x, k3v = v + 0.5 * dt * k2v, a(x + 0.5 * dt * k2x)
        k4x, k4v = v + dt * k3v, a(x + dt * k3x)
        if tangent:
            c = -pot.curvature(x) / pot.m  # constant for every supported kind
            t1x, t1v = dv, c * dx
            t2x, t2v = dv + 0.5 * dt * t1v, c * (dx + 0.5 * dt * t1x)
            t3x, t3v = dv + 0.5 * dt * t2v, c * (dx + 0.5 * dt * t2x)
            t4x, t4v = dv + dt * t3v, c * (dx + dt * t3x)
            dx = dx + dt / 6 * (t1x + 2 * t2x + 2 * t3x + t4x)
            dv = dv + dt / 6 * (t1v + 2 * t2v + 2 * t3v + t4v)
        x = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        xs[k + 1], vs[k + 1] = x, v
    if tangent:
        return xs, vs, dx
    return xs, vs


def _step_count(t_end, dt):
    n = int(round(t_end / dt))
    if n < 1 or abs(n * dt - t_end) > 1e-9 * max(t_end, dt):
        raise ValueError(f"t_end={t_end} is not an integer multiple of dt={dt}")
    return n


def _even_steps(t, pot, max_dt=None):
    """An even step count whose step does not exceed the default RK4 step."""
    h = pot.default_dt if max_dt is None else min(max_dt, pot.default_dt)
    n = int(np.ceil(t / h))
    return n + (n % 2)


def solve_trajectory(state: ClassicalState, pot: PotentialSpec, t_end: float,
                     dt: float | None = None) -> Trajectory:
    """Integrate ``m x'' = -V'(x)`` with RK4 on ``t_k = k dt``, ending exactly at ``t_end``.

    With ``dt=None`` the step is the largest ``t_end / N`` not exceeding
    ``pot.default_dt``.  Free and linear kinds have constant acceleration,
    for which RK4 is exact, so the polynomial is evaluated directly instead
    of accumulating rounding over the steps.
    """
    if dt is None:
        if t_end <= 0:
            raise ValueError(f"t_end must be positive, got {t_end}")
        n = int(np.ceil(t_end / pot.default_dt))
        dt = t_end / n
    else:
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if t_end < dt * (1 - 1e-12):
            raise ValueError(f"t_end={t_end} must be >= dt={dt}")
        n = _step_count(t_end, dt)
    times = np.arange(n + 1) * dt
    if pot.kind == "harmonic":
        xs, vs = _rk4(float(state.x0), float(state.v0), pot, dt, n)
    else:
        a = pot.force_constant / pot.m
        xs = state.x0 + state.v0 * times + 0.5 * a * times**2
        vs = state.v0 + a * times
    return Trajectory(times, xs, vs)


def _check_time(t):
    if not np.all(np.asarray(t) > 0):
        raise ValueError(f"time must be positive, got {t}")


def _check_caustic(t, pot):
    if pot.kind == "harmonic":
        s = np.sin(pot.omega * np.asarray(t, dtype=float))
        if np.any(np.abs(s) < 1e-10):
            raise CausticError(
                f"omega*t is a multiple of pi at t={t}: the extremal path is not unique"
            )


def action_closed_form(x, t, x0, pot: PotentialSpec):
    """Euler-Lagrange action ``S_cl(x, t; x0)`` in closed form.

    Free and linear kinds use
    ``m (x - x0)**2 / 2t + K (x + x0) t / 2 - K**2 t**3 / 24m``;
    the harmonic kind uses the Mehler-kernel phase
    ``m w / (2 sin wt) * ((x**2 + x0**2) cos wt - 2 x x0)``.
    Broadcasts over ``x``, ``t`` and ``x0``.
    """
    _check_time(t)
    _check_caustic(t, pot)
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    m = pot.m
    if pot.kind == "harmonic":
        w = pot.omega
        t = np.asarray(t, dtype=float)
        return m * w / (2 * np.sin(w * t)) * ((x**2 + x0**2) * np.cos(w * t) - 2 * x * x0)
    K = pot.force_constant
    t = np.asarray(t, dtype=float)
    return m * (x - x0) ** 2 / (2 * t) + K * (x + x0) * t / 2 - K**2 * t**3 / (24 * m)


def _shoot(x, t, x0, pot, n_steps, tol=1e-12, max_iter=50):
    """Newton iteration on ``v0`` so that ``xi(t; v0) = x``; elementwise over arrays."""
    x, t, x0 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, t, x0)))
    dt = t / n_steps
    v = (x - x0) / t
    resid = np.full(x.shape, np.inf)
    for _ in range(max_iter):
        xs, _, dxdv = _rk4(x0, v, pot, dt, n_steps, tangent=True)
        resid = xs[-1] - x
        if np.all(np.abs(resid) <= tol * np.maximum(1.0, np.abs(x))):
            return v
        if np.any(dxdv == 0):
            break
        v = v - resid / dxdv
    worst = float(np.max(np.abs(resid)))
    raise ShootingError(f"shooting did not converge in {max_iter} iterations; last residual {worst:.3e}")


def action_numeric(x, t, x0, pot: PotentialSpec, n_steps: int = 2000):
    """Euler-Lagrange action by shooting on the initial velocity plus Simpson quadrature.

    Broadcasts over ``x``, ``t`` and ``x0``; every problem uses ``n_steps``
    RK4 steps (rounded up to even).
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError(f"time must be positive, got {t}")
    n_steps += n_steps % 2
    v0 = _shoot(x, t, x0, pot, n_steps)
    x0b, tb = np.broadcast_arrays(np.asarray(x0, dtype=float), t_arr)
    xs, vs = _rk4(x0b.copy(), v0, pot, tb / n_steps, n_steps)
    lagrangian = 0.5 * pot.m * vs**2 - pot.V(xs)
    out = simpson(lagrangian, dx=1.0, axis=0) * (tb / n_steps)
    return float(out) if out.ndim == 0 else out


def initial_velocity_from_endpoints(x, t, x0, pot: PotentialSpec, n_steps: int = 2000) -> float:
    """Initial velocity of the extremal joining ``x0`` at time 0 to ``x`` at time ``t``."""
    _check_time(t)
    _check_caustic(t, pot)
    if pot.kind == "harmonic":
        v = _shoot(x, t, x0, pot, n_steps + n_steps % 2)
        return float(v) if v.ndim == 0 else v
    return (x - x0) / t - pot.force_constant * t / (2 * pot.m)


def deterministic_g(traj: Trajectory, pot: PotentialSpec, upto: int | None = None) -> float:
    """``g(t_upto) = -int_0^t m xi'^2/2 + V(xi) + m xi'' xi ds`` by Simpson.

    ``xi''`` comes from the equation of motion, not from differencing.
    ``upto`` (an even sample index) defaults to the last sample.
    """
    n = len(traj.times) - 1 if upto is None else upto
    if n == 0:
        return 0.0
    if n % 2:
        raise ValueError("Simpson quadrature for g(t) needs an even number of intervals")
    xi, xd = traj.xi[: n + 1], traj.xi_dot[: n + 1]
    m = pot.m
    integrand = 0.5 * m * xd**2 + pot.V(xi) + m * pot.acceleration(xi) * xi
    return -float(simpson(integrand, dx=traj.dt))


def deterministic_action(x, t, state: ClassicalState, pot: PotentialSpec, max_dt: float | None = None):
    """Deterministic action ``m xi'(t) x + g(t)`` attached to the trajectory from ``state``."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    x = np.asarray(x, dtype=float)
    if t == 0:
        return pot.m * state.v0 * x
    n = _even_steps(t, pot, max_dt)
    traj = solve_trajectory(state, pot, t, t / n)
    return pot.m * traj.xi_dot[-1] * x + deterministic_g(traj, pot)


def deterministic_hj_residual(state: ClassicalState, pot: PotentialSpec, t: float,
                              dt: float = 1e-4, x: float | None = None) -> float:
    """``|dS/dt + (dS/dx)**2 / 2m + V|`` of the deterministic action at ``x`` (default ``xi(t)``).

    ``dS/dt`` is a central difference with step ``dt`` (rounded so that it
    divides ``t``); ``dS/dx = m xi'(t)`` is exact.  All three time levels
    share one trajectory sampled at ``dt / 2``, so their quadrature errors
    are correlated and cancel in the difference.
    """
    _check_time(t)
    k = max(1, int(round(t / dt)))
    dt = t / k
    traj = solve_trajectory(state, pot, t + dt, dt / 2)
    i_prev, i_now, i_next = 2 * (k - 1), 2 * k, 2 * (k + 1)
    g = [deterministic_g(traj, pot, i) for i in (i_prev, i_now, i_next)]
    xi, xi_dot = traj.xi[i_now], traj.xi_dot[i_now]
    if x is None:
        x = xi
    m = pot.m

    def S(i, gi):
        return m * traj.xi_dot[i] * x + gi

    dSdt = (S(i_next, g[2]) - S(i_prev, g[0])) / (2 * dt)
    grad = m * xi_dot
    # velocity law along the trajectory holds by construction
    assert abs(xi_dot - grad / m) <= 1e-12 * max(1.0, abs(xi_dot))
    return float(abs(dSdt + grad**2 / (2 * m) + pot.V(x)))
