"""Adaptive Krylov-shadow quantum Fisher information estimation.

A numpy/scipy library pairing a fixed-resource Krylov-shadow QFI
estimator with reliability-aware stopping rules, plus a seeded benchmark
harness that measures false-stop rates for those rules.
"""

__version__ = "0.1.0"

from .benchmark import BenchmarkInstance, NoiseConfig, build_instance
from .controller import RunResult, run, run_sample_schedule
from .errors import (
    ConfigError,
    DegenerateInputError,
    DegenerateProjectionError,
    FitError,
    ShadowQfiError,
    ValidationError,
)
from .estimator import BootstrapConfig, EstimateBundle, KrylovShadowEstimator
from .harness import GridSpec, GridSummary, RunRecord, run_grid, summarize
from .shadows import ShadowBatch, draw_snapshots, mean_estimate
from .stopping import CalibrationTable, StopConfig, StopDecision, wilson_interval

__all__ = [
    "BenchmarkInstance",
    "BootstrapConfig",
    "CalibrationTable",
    "ConfigError",
    "DegenerateInputError",
    "DegenerateProjectionError",
    "EstimateBundle",
    "FitError",
    "GridSpec",
    "GridSummary",
    "KrylovShadowEstimator",
    "NoiseConfig",
    "RunRecord",
    "RunResult",
    "ShadowBatch",
    "ShadowQfiError",
    "StopConfig",
    "StopDecision",
    "ValidationError",
    "build_instance",
    "draw_snapshots",
    "mean_estimate",
    "run",
    "run_grid",
    "run_sample_schedule",
    "summarize",
    "wilson_interval",
    "__version__",
]
