"""Min-plus (tropical) algebra on functions sampled over a uniform 1-D grid.

The carrier is R ∪ {+inf} with ``min`` as addition and ``+`` as
multiplication.  +inf is the float infinity; -inf and NaN are rejected at
construction so that the only arithmetic ever performed is finite + finite,
finite + inf or inf + inf, none of which can produce NaN.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IncompatibleGridError

__all__ = [
    "Grid1D",
    "SampledFunction",
    "otimes",
    "nearest_index",
    "minplus_dot",
    "delta_min",
    "inf_convolution",
    "legendre_fenchel",
    "minplus_combination",
]

INF = np.inf

# rows of the (n, n) work matrix processed at once
_CHUNK = 256


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``x_i = x_min + i * dx`` for ``i = 0 .. n-1``."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min={self.x_min} must be < x_max={self.x_max}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs an integer n >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + np.arange(self.n) * self.dx

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def contains(self, x) -> bool:
        return bool(np.all((x >= self.x_min) & (x <= self.x_max)))


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Extended-real values (finite or +inf) on a :class:`Grid1D`."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if np.isnan(v).any():
            raise ValueError("min-plus values may not be NaN")
        if np.isneginf(v).any():
            raise ValueError("min-plus values may not be -inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: Grid1D, fun) -> "SampledFunction":
        return cls(grid, np.asarray(fun(grid.x), dtype=float) * np.ones(grid.n))

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)


def otimes(a, b):
    """Min-plus product ``a + b`` with +inf absorbing.

    Inputs are never -inf (enforced by :class:`SampledFunction`), so plain
    float addition already satisfies ``inf + a = inf``; this is the one place
    where that is checked.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.isneginf(a).any() or np.isneginf(b).any():
        raise ValueError("-inf is not an element of the min-plus semiring")
    return a + b


def _check_same_grid(*fs: SampledFunction) -> Grid1D:
    grid = fs[0].grid
    for f in fs[1:]:
        if f.grid != grid:
            raise IncompatibleGridError(f"grids differ: {grid} vs {f.grid}")
    return grid


def nearest_index(grid: Grid1D, x) -> np.ndarray:
    """Index of the nearest grid sample; exact half-way ties go to the lower index.

    Not clipped: callers decide what an out-of-range index means.
    """
    u = (np.asarray(x, dtype=float) - grid.x_min) / grid.dx
    return np.ceil(u - 0.5).astype(np.int64)


def minplus_dot(f: SampledFunction, g: SampledFunction) -> float:
    """Min-plus scalar product ``min_i f(x_i) + g(x_i)``."""
    _check_same_grid(f, g)
    return float(np.min(otimes(f.values, g.values)))


def delta_min(grid: Grid1D, x0: float) -> SampledFunction:
    """Min-plus Dirac mass: 0 at the sample nearest ``x0`` and +inf elsewhere."""
    if not grid.x_min <= x0 <= grid.x_max:
        raise ValueError(f"x0={x0} lies outside [{grid.x_min}, {grid.x_max}]")
    k = int(np.clip(nearest_index(grid, x0), 0, grid.n - 1))
    v = np.full(grid.n, INF)
    v[k] = 0.0
    return SampledFunction(grid, v)


def _shifted_lookup(g: SampledFunction) -> np.ndarray:
    """``g(d * dx)`` for ``d = -(n-1) .. n-1`` by nearest-sample lookup, +inf off-grid."""
    grid = g.grid
    d = np.arange(-(grid.n - 1), grid.n)
    k = np.ceil(d - grid.x_min / grid.dx - 0.5).astype(np.int64)
    inside = (k >= 0) & (k < grid.n)
    out = np.full(d.shape, INF)
    out[inside] = g.values[k[inside]]
    return out


def inf_convolution(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """Min-plus convolution ``h(x_i) = min_j f(x_j) + g(x_i - x_j)``.

    ``g`` is read at the differences ``x_i - x_j`` by nearest-sample lookup,
    with +inf outside its grid.  When 0 is a grid node the lookup is an exact
    index shift, so ``delta_min(grid, 0)`` is an exact neutral element and
    the operation is exactly commutative.
    """
    grid = _check_same_grid(f, g)
    n = grid.n
    g_shift = _shifted_lookup(g)
    j = np.arange(n)
    h = np.empty(n)
    for start in range(0, n, _CHUNK):
        i = np.arange(start, min(start + _CHUNK, n))
        table = otimes(f.values[None, :], g_shift[i[:, None] - j[None, :] + (n - 1)])
        h[i] = table.min(axis=1)
    return SampledFunction(grid, h)


def legendre_fenchel(f: SampledFunction, p_grid: Grid1D) -> SampledFunction:
    """Discrete convex conjugate ``f*(p_k) = max_i p_k x_i - f(x_i)`` on ``p_grid``.

    Samples where ``f`` is +inf drop out of the maximum.  Brute force,
    O(n * m).
    """
    ok = f.finite
    if not ok.any():
        raise ValueError("Legendre-Fenchel transform of an everywhere-infinite function")
    x = f.x[ok]
    fv = f.values[ok]
    p = p_grid.x
    out = np.empty(p_grid.n)
    for start in range(0, p_grid.n, _CHUNK):
        sl = slice(start, min(start + _CHUNK, p_grid.n))
        out[sl] = np.max(p[sl, None] * x[None, :] - fv[None, :], axis=1)
    return SampledFunction(p_grid, out)


def minplus_combination(pairs: Sequence[tuple[float, SampledFunction]]) -> SampledFunction:
    """Pointwise ``min_k (offset_k + S_k)``, the min-plus linear combination."""
    if len(pairs) == 0:
        raise ValueError("minplus_combination needs at least one (offset, function) pair")
    grid = _check_same_grid(*[s for _, s in pairs])
    out = np.full(grid.n, INF)
    for offset, s in pairs:
        if np.isnan(offset) or offset == -INF:
            raise ValueError(f"invalid min-plus offset {offset}")
        out = np.minimum(out, otimes(offset, s.values))
    return SampledFunction(grid, out)
