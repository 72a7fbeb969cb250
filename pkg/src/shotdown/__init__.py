"""Stable processes killed or shot down on leaving a domain.

The shot-down process is killed at the first jump whose chord
[X(t-), X(t)] meets the complement of D, which can happen before the
process actually leaves D when D is not convex.
"""

from .estimate import Estimate
from .geometry import Domain, annulus, ball, harnack7, parse_domain
from .sim import SimScheme, simulate, simulate_batch
from .stable import StableLaw

__version__ = "0.1.0"

__all__ = [
    "Domain",
    "Estimate",
    "SimScheme",
    "StableLaw",
    "annulus",
    "ball",
    "harnack7",
    "parse_domain",
    "simulate",
    "simulate_batch",
]
