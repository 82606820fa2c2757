from .experiment import (
    DEFAULT_METHODS,
    ExperimentConfig,
    MethodSpec,
    RunRecord,
    aggregate_coverage,
    aggregate_pit_histograms,
    aggregate_scores,
    run_experiment,
    run_repetition,
)
from .functions import TestFunction, available_functions, eval_function, get_function, sample_design

__all__ = [
    "DEFAULT_METHODS",
    "ExperimentConfig",
    "MethodSpec",
    "RunRecord",
    "TestFunction",
    "aggregate_coverage",
    "aggregate_pit_histograms",
    "aggregate_scores",
    "available_functions",
    "eval_function",
    "get_function",
    "run_experiment",
    "run_repetition",
    "sample_design",
]
