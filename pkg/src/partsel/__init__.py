"""Differentially private partition selection.

Release the set of group-by keys present in user data while keeping the
release (epsilon, delta)-differentially private. Provides the optimal
keep-probability primitive, the equivalent truncated-geometric noisy
thresholding with publishable counts, Laplace and Gaussian baselines, and a
deterministic streaming pipeline over (user, partition) rows.
"""

from .baselines import (
    GaussianPrimitive,
    LaplacePrimitive,
    calibrate_gaussian_sigma,
    gaussian_primitive,
    keep_laplace,
    midpoint,
    percentile_n,
    pi_gaussian,
    pi_laplace,
)
from .params import Neighboring, PrivacyParams
from .pipeline import (
    ConfigurationError,
    IngestMode,
    InputFormatError,
    PartitionHistogram,
    ReleaseRecord,
    StrictViolationError,
    dual_threshold_release,
    ingest,
    read_rows,
    select_partitions,
    thresholded_release,
    write_release,
    write_selection,
)
from .primitive import (
    OptPrimitive,
    compute_n1,
    compute_n2,
    expected_output_size,
    keep_many,
    pi_opt,
    pi_opt_many,
    pi_opt_recursive,
    pi_opt_recursive_sequence,
    should_keep,
)
from .truncated_geometric import (
    TsgdParams,
    delta_for_exact_threshold,
    selection_prob_via_threshold,
    tsgd_params,
    tsgd_pmf,
    tsgd_sample,
    tsgd_sample_many,
    tsgd_tail,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "GaussianPrimitive",
    "IngestMode",
    "InputFormatError",
    "LaplacePrimitive",
    "Neighboring",
    "OptPrimitive",
    "PartitionHistogram",
    "PrivacyParams",
    "ReleaseRecord",
    "StrictViolationError",
    "TsgdParams",
    "calibrate_gaussian_sigma",
    "compute_n1",
    "compute_n2",
    "delta_for_exact_threshold",
    "dual_threshold_release",
    "expected_output_size",
    "gaussian_primitive",
    "ingest",
    "keep_laplace",
    "keep_many",
    "midpoint",
    "percentile_n",
    "pi_gaussian",
    "pi_laplace",
    "pi_opt",
    "pi_opt_many",
    "pi_opt_recursive",
    "pi_opt_recursive_sequence",
    "read_rows",
    "select_partitions",
    "selection_prob_via_threshold",
    "should_keep",
    "thresholded_release",
    "tsgd_params",
    "tsgd_pmf",
    "tsgd_sample",
    "tsgd_sample_many",
    "tsgd_tail",
    "write_release",
    "write_selection",
]
