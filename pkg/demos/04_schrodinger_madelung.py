"""
Split-step Schrodinger evolution and the Madelung fields
========================================================

Writing psi = sqrt(rho) exp(i S / hbar) turns the Schrodinger equation into
a Hamilton-Jacobi equation with an extra quantum potential, plus a
continuity equation.  Here the wave function is evolved spectrally and
both equations are checked by finite differences.
"""
import numpy as np

from _common import plt, save
from semiclassical.classical import PotentialSpec
from semiclassical.minplus_core import Grid1D
from semiclassical.quantum import (
    CoherentStateParams,
    init_coherent_state,
    init_gaussian_packet,
    madelung_decompose,
    madelung_residual,
    quantum_potential,
    split_step_evolve,
    split_step_snapshots,
)

# A free Gaussian spreads as sigma^2 (1 + (hbar t / 2 m sigma^2)^2)
grid = Grid1D(-30.0, 30.0, 2048)
wf = split_step_evolve(init_gaussian_packet(grid, 0.0, 0.0, 1.0), PotentialSpec.free(), 1e-3, 1000)
print("variance at t=1:", wf.variance(), "(law: 1.25)")

# A coherent state returns to itself after a period, up to the phase exp(-i pi)
grid = Grid1D(-10.0, 10.0, 1024)
p = CoherentStateParams(x0=1.0, v0=0.5, omega=1.0)
psi0 = init_coherent_state(grid, p)
n = 20_000
back = split_step_evolve(psi0, p.potential, 2 * np.pi / n, n)
print("L2 distance after one period:", np.sqrt(np.sum(np.abs(back.psi + psi0.psi) ** 2) * grid.dx))


def residuals(n, dt, quantum=True):
    g = Grid1D(-10.0, 10.0, n)
    k = int(round(0.5 / dt))
    snaps = split_step_snapshots(init_coherent_state(g, p), p.potential, dt, k + 1)
    fields = [madelung_decompose(s) for s in snaps[k - 1 : k + 2]]
    return madelung_residual(fields, dt, p.potential, p.hbar, quantum=quantum), fields[1]


(coarse, _), (fine, f) = residuals(1024, 2e-4), residuals(2048, 1e-4)
(no_q, _), _ = residuals(2048, 1e-4, quantum=False)
print(f"phase residual {fine[0]:.2e}, continuity residual {fine[1]:.2e}")
print(f"halving dx and dt divides them by {coarse[0] / fine[0]:.2f} and {coarse[1] / fine[1]:.2f}")
print(f"dropping the quantum potential leaves a residual of {no_q:.2f}")

Q = quantum_potential(f.rho, p.hbar, p.m, grid=f.grid, mask=f.mask)
fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
ax[0].plot(f.grid.x, f.rho, label="rho")
ax[0].plot(f.grid.x, Q, label="Q")
ax[0].set_xlim(-4, 5)
ax[0].set_ylim(-1.5, 1.5)
ax[0].legend()
ax[1].plot(f.grid.x, f.S)
ax[1].set_title("phase S on the density mask")
save(fig, "04_madelung.png")
