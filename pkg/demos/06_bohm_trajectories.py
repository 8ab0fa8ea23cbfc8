"""
de Broglie-Bohm trajectories
============================

Particles follow the velocity field S'/m of the evolving wave function.
Started from |psi_0|^2, the ensemble stays distributed as |psi_t|^2.  For a
free Gaussian each path is a straight stretch of its starting offset:
x(t) = x0 sigma(t) / sigma0 + v0 t.
"""
import numpy as np

from _common import plt, save
from semiclassical.classical import PotentialSpec
from semiclassical.convergence import bohm_trajectories, equivariance_l1
from semiclassical.minplus_core import Grid1D
from semiclassical.quantum import init_gaussian_packet, madelung_decompose, split_step_snapshots

grid = Grid1D(-20.0, 20.0, 1024)
snaps = split_step_snapshots(init_gaussian_packet(grid, 0.0, 0.5, 1.0), PotentialSpec.free(), 0.01, 100)
fields = [madelung_decompose(s) for s in snaps]
times = np.linspace(0.0, 1.0, 101)

starts = np.linspace(-2, 2, 9)
few = bohm_trajectories(fields, times, starts=starts)
print("largest gap to the stretching law:", np.max(np.abs(few.paths[:, -1] - (starts * np.sqrt(1.25) + 0.5))))

ens = bohm_trajectories(fields, times, n_particles=100_000, seed=42)
print("L1(histogram, |psi|^2) at t=1:", equivariance_l1(ens.paths[:, -1], snaps[-1].rho, grid))
again = bohm_trajectories(fields, times, n_particles=100_000, seed=42)
print("same seed, same paths:", np.array_equal(ens.paths, again.paths))

fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
for path in ens.paths[:40]:
    ax[0].plot(times, path, lw=0.6)
ax[0].set_xlabel("t")
ax[1].hist(ens.paths[:, -1], bins=120, range=(-5, 6), density=True, alpha=0.5)
ax[1].plot(grid.x, snaps[-1].rho)
ax[1].set_xlim(-5, 6)
save(fig, "06_bohm.png")
