"""Exception types raised by the numerical modules."""


class IncompatibleGridError(ValueError):
    """Two sampled objects live on different grids."""


class CausticError(ValueError):
    """The harmonic extremal is not unique (omega * t is a multiple of pi)."""


class ResolutionError(ValueError):
    """The grid is too small or too coarse for the requested state."""


class ShootingError(RuntimeError):
    """Newton iteration on the initial velocity did not converge."""


class ParticleEscapeError(RuntimeError):
    """Too many particles left the grid or the density mask."""
