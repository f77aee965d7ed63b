"""Simulation and exact analysis of the reinforced elephant random walk."""

from .analytic import (
    RegimeLimits,
    a_n,
    com_variance,
    critical_constants,
    diffusive_kernel,
    diffusive_variance,
    lc_moments,
    log_gamma_ratio,
    regime_limits,
)
from .martingale import ConsistencyError, decompose, increments, quadratic_variations
from .model import Regime, RegimeError, Trajectory, WalkParams, classify_regime, make_rng, run
from .moments import joint_moments, moment_table, second_moment_Y_closed, second_moment_Y_recursive
from .montecarlo import EnsembleSpec, EnsembleSummary, run_ensemble, verify

__all__ = [
    "ConsistencyError",
    "EnsembleSpec",
    "EnsembleSummary",
    "Regime",
    "RegimeError",
    "RegimeLimits",
    "Trajectory",
    "WalkParams",
    "a_n",
    "classify_regime",
    "com_variance",
    "critical_constants",
    "decompose",
    "diffusive_kernel",
    "diffusive_variance",
    "increments",
    "joint_moments",
    "lc_moments",
    "log_gamma_ratio",
    "make_rng",
    "moment_table",
    "quadratic_variations",
    "regime_limits",
    "run",
    "run_ensemble",
    "second_moment_Y_closed",
    "second_moment_Y_recursive",
    "verify",
]
