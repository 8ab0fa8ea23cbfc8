"""
Classical action: closed form against shooting
==============================================

For free, constant-force and harmonic motion the extremal action between
two endpoints has a closed form.  ``action_numeric`` finds the same number
the slow way: Newton shooting on the initial velocity, then Simpson
quadrature of the Lagrangian.
"""
import numpy as np

from _common import plt, save
from semiclassical.classical import (
    ClassicalState,
    PotentialSpec,
    action_closed_form,
    action_numeric,
    deterministic_action,
    deterministic_hj_residual,
    initial_velocity_from_endpoints,
    solve_trajectory,
)

rng = np.random.default_rng(0)
x, x0 = rng.uniform(-3, 3, (2, 100))
t = rng.uniform(0.1, 2.0, 100)

for pot in (PotentialSpec.free(), PotentialSpec.linear(2.0), PotentialSpec.harmonic(1.0)):
    tt = t if pot.kind != "harmonic" else np.minimum(t, 0.9 * np.pi)
    exact = action_closed_form(x, tt, x0, pot)
    shot = action_numeric(x, tt, x0, pot)
    rel = np.max(np.abs(shot - exact) / np.maximum(np.abs(exact), 1e-3))
    print(f"{pot.kind:9s} worst relative gap over 100 endpoint pairs: {rel:.1e}")

# The harmonic extremal from 0 to 1/2 in time pi/6 leaves with unit speed
v0 = initial_velocity_from_endpoints(0.5, np.pi / 6, 0.0, PotentialSpec.harmonic(1.0))
print("harmonic shooting velocity:", v0)

# A single trajectory carries an action m xi'(t) x + g(t); it solves the
# Hamilton-Jacobi equation on the trajectory and nowhere else
state = ClassicalState(1.0, 0.5)
pot = PotentialSpec.harmonic(1.0)
traj = solve_trajectory(state, pot, 1.0)
on = deterministic_hj_residual(state, pot, 1.0)
off = deterministic_hj_residual(state, pot, 1.0, x=traj.xi[-1] + 1.0)
print(f"HJ residual on the trajectory {on:.1e}, one unit away {off:.2f}")

xs = np.linspace(-2, 3, 200)
fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
ax[0].plot(traj.times, traj.xi)
ax[0].set_xlabel("t")
ax[0].set_ylabel("xi(t)")
for tk in (0.25, 0.5, 1.0):
    ax[1].plot(xs, deterministic_action(xs, tk, state, pot), label=f"t={tk}")
ax[1].set_xlabel("x")
ax[1].legend()
save(fig, "02_classical.png")
