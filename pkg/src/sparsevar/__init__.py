"""Sparse causal structure discovery in multivariate time series.

Fits vector autoregressive models four ways (complete Granger scoring, Ridge
with simultaneous max-t testing, Lasso, Group Lasso) and benchmarks them on
randomly generated stable VAR systems using ROC/AUC.
"""

from .var_core import (
    CompanionMatrix,
    DesignPair,
    TimeSeriesMatrix,
    VarCoefficients,
    build_design,
    companion,
    simulate_var,
    spectral_radius,
)

__all__ = [
    "CompanionMatrix",
    "DesignPair",
    "TimeSeriesMatrix",
    "VarCoefficients",
    "build_design",
    "companion",
    "simulate_var",
    "spectral_radius",
]

__version__ = "0.1.0"
