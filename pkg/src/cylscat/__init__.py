"""Discrete zero-energy scattering on manifolds with cylindrical ends."""
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
