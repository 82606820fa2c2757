"""Calibrated predictive distributions for Gaussian-process interpolation."""

from .bcr import BcrPredictive, GNPosterior, bcr_predictive, posterior_sample, select_rule1, select_rule2
from .cps import PredictionInterval, StepwiseCPD, ThresholdSet, compute_thresholds, cps_predictive
from .gn import GNParams
from .gp_core import Dataset, FittedGP, KernelParams, build_gp, fit_ml, predict
from .metrics import DiracPredictive, EmpiricalPredictive, GaussianPredictive, MetricsReport

__version__ = "0.1.0"

__all__ = [
    "BcrPredictive",
    "Dataset",
    "DiracPredictive",
    "EmpiricalPredictive",
    "FittedGP",
    "GNParams",
    "GNPosterior",
    "GaussianPredictive",
    "KernelParams",
    "MetricsReport",
    "PredictionInterval",
    "StepwiseCPD",
    "ThresholdSet",
    "bcr_predictive",
    "build_gp",
    "compute_thresholds",
    "cps_predictive",
    "fit_ml",
    "posterior_sample",
    "predict",
    "select_rule1",
    "select_rule2",
]
