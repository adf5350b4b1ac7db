"""Extreme value laws, recurrence statistics and rare event point processes
for one-dimensional maps with uniform additive noise."""

__version__ = "0.1.0"

from ._core import BACKEND
from .dynamics import MapSpec, PhaseSpace, apply_map, doubling, gauss, lorenz, parse_map, quadratic
from .noise import NoiseSpec, parse_noise, simulate_trajectory
from .stream import RandomStream

__all__ = [
    "BACKEND", "MapSpec", "PhaseSpace", "apply_map", "doubling", "gauss", "lorenz", "parse_map",
    "quadratic", "NoiseSpec", "parse_noise", "simulate_trajectory", "RandomStream",
]
