"""
The semiclassical limit, two ways
=================================

Statistical case: fixed smooth initial density and action, hbar shrinking.
The quantum phase and density approach the classical Hamilton-Jacobi
solution.  Deterministic case: coherent states whose width shrinks with
hbar stay centred on one classical trajectory, with a phase equal to that
trajectory's action less the zero-point term hbar omega t / 2.
"""
import numpy as np

from _common import plt, save
from semiclassical.classical import PotentialSpec
from semiclassical.convergence import convergence_order_estimate, deterministic_sweep, statistical_sweep
from semiclassical.minplus_core import Grid1D


def rho0(x):
    return np.exp(-0.5 * x**2) / np.sqrt(2 * np.pi)


def S0(x):
    return x  # unit mass moving at unit speed


hbars = [1.0, 0.5, 0.25, 0.125, 0.0625]
stat = statistical_sweep(rho0, S0, PotentialSpec.free(), Grid1D(-15.0, 15.0, 513), [1.0], hbars)
print("hbar      err_S      err_rho")
for h, es, er in zip(stat.hbars, stat.err_S, stat.err_rho):
    print(f"{h:<8g}  {es:.3e}  {er:.3e}")
print("fitted orders:", convergence_order_estimate(stat, "err_S"), convergence_order_estimate(stat, "err_rho"))

t = np.pi / 4
det = deterministic_sweep(1.0, 0.5, 1.0, t, [1.0, 0.25, 0.0625], Grid1D(-8.0, 8.0, 2048), dt=t / 1000)
print("\nhbar      |<x> - xi|   Var ratio    action gap")
for h, me, vr, es in zip(det.hbars, det.mean_err, det.var_ratio, det.err_S):
    print(f"{h:<8g}  {me:.2e}     {vr:.8f}  {es:.2e}")

fig, ax = plt.subplots(figsize=(5, 3.5))
ax.loglog(stat.hbars, stat.err_S, "o-", label="err_S")
ax.loglog(stat.hbars, stat.err_rho, "s-", label="err_rho")
ax.set_xlabel("hbar")
ax.legend()
save(fig, "05_limits.png")
