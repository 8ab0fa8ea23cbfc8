"""
Min-plus algebra on a grid
==========================

In the min-plus semiring "addition" is ``min`` and "multiplication" is
``+``.  Inf-convolution plays the role of ordinary convolution, the shifted
indicator ``delta_min`` is its unit, and the Legendre-Fenchel transform
turns inf-convolution into a plain sum.
"""
import numpy as np

from _common import plt, save
from semiclassical.minplus_core import (
    Grid1D,
    SampledFunction,
    delta_min,
    inf_convolution,
    legendre_fenchel,
    minplus_dot,
)

grid = Grid1D(-4.0, 4.0, 801)
x = grid.x

# The min-plus "scalar product" of two parabolas is the minimum of their sum
f = SampledFunction(grid, x**2)
g = SampledFunction(grid, (x - 2) ** 2)
print("min_x x^2 + (x-2)^2 =", minplus_dot(f, g), "(exact: 2)")

# delta_min is 0 at one node and +inf elsewhere; convolving with it changes nothing
wiggly = SampledFunction(grid, np.cos(3 * x) + 0.1 * x**2)
same = inf_convolution(wiggly, delta_min(grid, 0.0))
print("delta_min is neutral:", np.array_equal(same.values, wiggly.values))

# Inf-convolution of two half-parabolas x^2/2 is x^2/4
q = SampledFunction(grid, 0.5 * x**2)
qq = inf_convolution(q, q)
inner = np.abs(x) <= 2
print("max |(q # q) - x^2/4| on |x| <= 2:", np.max(np.abs(qq.values - x**2 / 4)[inner]))

# Legendre-Fenchel: x^2/2 is self-dual, |x| maps to the indicator of [-1, 1]
p_grid = Grid1D(-3.0, 3.0, 301)
q_star = legendre_fenchel(q, p_grid)
abs_star = legendre_fenchel(SampledFunction(grid, np.abs(x)), p_grid)
print("max |q* - p^2/2|:", np.max(np.abs(q_star.values - p_grid.x**2 / 2)))

# Convolution theorem: (f # g)* = f* + g*
a = SampledFunction(grid, np.abs(x - 1))
b = SampledFunction(grid, 0.5 * (x + 1) ** 2)
lhs = legendre_fenchel(inf_convolution(a, b), Grid1D(-0.9, 0.9, 181))
rhs = legendre_fenchel(a, lhs.grid).values + legendre_fenchel(b, lhs.grid).values
print("max |(a # b)* - (a* + b*)|:", np.max(np.abs(lhs.values - rhs)))

fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
ax[0].plot(x, q.values, label="x^2/2")
ax[0].plot(x, qq.values, label="inf-convolution with itself")
ax[0].legend()
ax[1].plot(p_grid.x, q_star.values, label="(x^2/2)*")
ax[1].plot(p_grid.x, abs_star.values, label="|x|*")
ax[1].set_ylim(-0.5, 5)
ax[1].legend()
save(fig, "01_minplus.png")
