"""Differentially private synthetic tabular data by multi-level clustering.

Features are grouped into independent feature sets, rows are microaggregated
within each set, and every cluster is released as a Laplace-perturbed
Gaussian from which synthetic rows are drawn.
"""

from .accountant import NoiseReport, monte_carlo_noise_check, noise_report
from .data import ScaledTable, SplitSpec, Table, UnitScaler, load_csv, one_hot_encode, scale_to_unit
from .evaluation import EvalReport, LogisticRegressionGD, f1_score, run_scenario, weighted_f1
from .exceptions import InvariantError, MCGenWarning, ValidationError
from .feature_clustering import FeatureClusterer, FeaturePartition, select_partition
from .generator import MCGen, SyntheticTable, generate, synthesize
from .microaggregation import MDAV, mdav
from .sanitizer import PrivacyConfig, sanitize

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "FeatureClusterer",
    "FeaturePartition",
    "InvariantError",
    "LogisticRegressionGD",
    "MCGen",
    "MCGenWarning",
    "MDAV",
    "NoiseReport",
    "PrivacyConfig",
    "ScaledTable",
    "SplitSpec",
    "SyntheticTable",
    "Table",
    "UnitScaler",
    "ValidationError",
    "f1_score",
    "generate",
    "load_csv",
    "mdav",
    "monte_carlo_noise_check",
    "noise_report",
    "one_hot_encode",
    "run_scenario",
    "sanitize",
    "scale_to_unit",
    "select_partition",
    "synthesize",
    "weighted_f1",
]
