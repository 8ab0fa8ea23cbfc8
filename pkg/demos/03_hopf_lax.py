"""
Hamilton-Jacobi by Hopf-Lax, and the density it carries
=======================================================

The Hopf-Lax formula minimises the initial action plus the classical action
over all starting points.  Because it is an inf-convolution it is linear in
the min-plus sense: a min of initial data evolves into the min of the
evolved pieces, which is how crossing characteristics are handled.
"""
import numpy as np

from _common import plt, save
from semiclassical.classical import PotentialSpec, action_closed_form
from semiclassical.hj_solver import (
    combine_action_fields,
    hj_residual,
    hopf_lax_solve,
    min_switch_mask,
    statistical_hj_solve,
)
from semiclassical.minplus_core import Grid1D, SampledFunction, delta_min

grid = Grid1D(-10.0, 10.0, 4001)
x = grid.x
pot = PotentialSpec.linear(2.0)

# A plane-wave initial action under a constant force
S = hopf_lax_solve(SampledFunction(grid, x), pot, times=[0.5, 1.0])
y = x - 1.0 - 1.0  # foot of the characteristic reaching x at t = 1
exact = y + action_closed_form(x, 1.0, y, pot)
mid = np.abs(x) <= 5
print("S(2, 1) =", S.S[1][2400], "  sup error on |x| <= 5:", np.max(np.abs(S.S[1] - exact)[mid]))

# A point source evolves into the classical action itself
point = hopf_lax_solve(delta_min(grid, 0.0), pot, times=[1.0])
print("delta_min evolves to the closed form:", np.array_equal(point.S[0], action_closed_form(x, 1.0, 0.0, pot)))

# Two plane waves moving apart: the minimum switches branch at x = 0
free = PotentialSpec.free()
coarse = Grid1D(-6.0, 6.0, 481)
times = np.linspace(0.5, 1.0, 11)
pairs = [(0.0, hopf_lax_solve(SampledFunction(coarse, s * coarse.x), free, times=times)) for s in (1, -1)]
both = combine_action_fields(pairs)
kink = min_switch_mask(pairs)
edge = np.zeros_like(kink)
edge[:, np.abs(coarse.x) > 3] = True
print(f"HJ residual away from the kink {hj_residual(both, free, exclude=kink | edge):.1e}, "
      f"at the kink {hj_residual(both, free, exclude=edge):.2f}")

# Density transported by the classical flow: a unit Gaussian drifting at v0 = 1
rho0 = SampledFunction(grid, np.exp(-0.5 * x**2) / np.sqrt(2 * np.pi))
S_f, rho_kde = statistical_hj_solve(rho0, SampledFunction(grid, x), free, times=[1.0], n_particles=100_000)
_, rho_pf = statistical_hj_solve(rho0, SampledFunction(grid, x), free, times=[1.0], density="pushforward")
print(f"particles + KDE: mean {rho_kde.mean()[0]:.4f} std {rho_kde.std()[0]:.4f}")
print(f"push-forward   : mean {rho_pf.mean()[0]:.4f} std {rho_pf.std()[0]:.4f}")

fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
ax[0].plot(coarse.x, both.S[-1])
ax[0].set_title("min of two evolved plane waves")
ax[1].plot(x, rho0.values, label="t = 0")
ax[1].plot(x, rho_kde.rho[0], label="KDE, t = 1")
ax[1].plot(x, rho_pf.rho[0], "--", label="push-forward, t = 1")
ax[1].set_xlim(-4, 5)
ax[1].legend()
save(fig, "03_hopf_lax.png")
