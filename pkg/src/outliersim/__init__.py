"""Monte Carlo study of outlier screening and statistical inference.

The package simulates a practice common in experimental work: screening
samples for outliers, keeping the samples where something was found,
correcting them, and running significance tests on the result. It
measures what that does to false positive rates, false negative rates,
and parameter estimates, across seven correction methods and three
tests.
"""
from .distributions import (
    LOGNORMAL,
    NORMAL,
    PopulationSpec,
    lognormal,
    normal,
    true_params,
)
from .engine import (
    EXPERIMENTS,
    ConfigError,
    ErrorSummary,
    ExperimentConfig,
    IncompleteRunError,
    InjectionSpec,
    RateEstimate,
    RunResult,
    inject_outliers,
    run_all,
    run_experiment,
    verify_power,
)
from .methods import (
    ALL_METHOD_IDS,
    CorrectionOutcome,
    MethodSpec,
    default_methods,
    detect_and_correct,
    detection_mask,
    grubbs_critical,
)
from .reporting import ResultRow, sorted_rows, write_csv, write_manifest
from .stat_tests import (
    ALL_TEST_IDS,
    DegenerateSampleError,
    TestSpec,
    mann_whitney,
    permutation_test,
    permutation_test_exhaustive,
    run_test,
    t_test,
)
from .streams import RngStream
from .power_table import POWER_TARGETS, SAMPLE_SIZES, lookup_mu2

__version__ = "0.1.0"

__all__ = [
    "ALL_METHOD_IDS",
    "ALL_TEST_IDS",
    "ConfigError",
    "CorrectionOutcome",
    "DegenerateSampleError",
    "ErrorSummary",
    "EXPERIMENTS",
    "ExperimentConfig",
    "IncompleteRunError",
    "InjectionSpec",
    "LOGNORMAL",
    "MethodSpec",
    "NORMAL",
    "POWER_TARGETS",
    "PopulationSpec",
    "RateEstimate",
    "ResultRow",
    "RngStream",
    "RunResult",
    "SAMPLE_SIZES",
    "TestSpec",
    "default_methods",
    "detect_and_correct",
    "detection_mask",
    "grubbs_critical",
    "inject_outliers",
    "lognormal",
    "lookup_mu2",
    "mann_whitney",
    "normal",
    "permutation_test",
    "permutation_test_exhaustive",
    "run_all",
    "run_experiment",
    "run_test",
    "sorted_rows",
    "t_test",
    "true_params",
    "verify_power",
    "write_csv",
    "write_manifest",
]
