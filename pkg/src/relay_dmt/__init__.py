"""Diversity-multiplexing tradeoff tools for multi-antenna relay networks.

Analytic tradeoff curves, antenna-subset selection over amplify-and-forward
paths, distributed compress-and-forward rates, and a seeded Monte Carlo engine
for outage probabilities and diversity-exponent fits.
"""

from .channel import ChannelSet, RateSpec, SnrPoint
from .errors import (DimensionMismatch, InvalidSubsetSize, NoFeasibleNoise, RelayDmtError,
                     RequiresMtGeMr, SingularMatrix, TooManyPaths)
from .numerics import RngStream
from .topology import Path, PathFamily, RelayTopology

__version__ = "0.1.0"

__all__ = [
    "ChannelSet", "DimensionMismatch", "InvalidSubsetSize", "NoFeasibleNoise", "Path",
    "PathFamily", "RateSpec", "RelayDmtError", "RelayTopology", "RequiresMtGeMr", "RngStream",
    "SingularMatrix", "SnrPoint", "TooManyPaths",
]
