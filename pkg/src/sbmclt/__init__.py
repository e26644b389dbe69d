"""Giant component fluctuations in supercritical stochastic block models.

Deterministic limit quantities live in :mod:`sbmclt.spectral`, the graph
sampler in :mod:`sbmclt.graph`, the exploration walk in :mod:`sbmclt.walk`
and the Monte Carlo drivers in :mod:`sbmclt.experiments`.
"""

from __future__ import annotations

from .errors import SBMError
from .graph import GraphSample, giant_statistic, sample_sbm
from .spectral import Frame, Kernel, LimitLaw, RhoSolution, TypeProfile, limit_law, reduce_d1_check, solve_rho
from .walk import ClockSet, hitting_path, hitting_time, sample_clocks

__version__ = "0.1.0"

__all__ = [
    "ClockSet",
    "Frame",
    "GraphSample",
    "Kernel",
    "LimitLaw",
    "RhoSolution",
    "SBMError",
    "TypeProfile",
    "giant_statistic",
    "hitting_path",
    "hitting_time",
    "limit_law",
    "reduce_d1_check",
    "sample_clocks",
    "sample_sbm",
    "solve_rho",
]
