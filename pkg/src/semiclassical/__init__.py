"""Classical actions, min-plus analysis and the semiclassical limit of the Schrödinger equation."""

__version__ = "0.1.0"
