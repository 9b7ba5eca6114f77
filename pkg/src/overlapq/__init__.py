"""Overlap times in the single-server FIFO queue.

Closed forms for M/M/1 (:mod:`overlapq.mm1`), a seeded G/G/1 Lindley
simulator (:mod:`overlapq.sim`), estimators (:mod:`overlapq.stats`) and a
quadrature route to the same tails (:mod:`overlapq.semi_analytic`).
"""

from .dist_core import Deterministic, DistributionSpec, Erlang, Exponential, RngStream, Uniform, parse_spec
from .mm1 import QueueParams, StabilityError

__all__ = [
    "Deterministic",
    "DistributionSpec",
    "Erlang",
    "Exponential",
    "QueueParams",
    "RngStream",
    "StabilityError",
    "Uniform",
    "parse_spec",
]
__version__ = "0.1.0"
