"""Tests for split-plot designs whose group dimensions may exceed the
sample sizes.

The statistic is a standardized quadratic form of the pooled group
means; its null moments are estimated by dimension-free U-statistics,
and three interchangeable calibrations (normal, chi-square(1), and
estimated-degrees-of-freedom chi-square) turn it into a test.
"""

from .errors import (
    DataFormatError,
    DegenerateVarianceError,
    EnumerationCapError,
    FactorizationError,
    HypothesisValidationError,
)
from .model import (
    CovarianceModel,
    GroupedSample,
    StudyDesign,
    ar,
    compound_symmetry,
    explicit,
    materialize_covariance,
    pooled_mean,
    replication_streams,
    sample,
    sample_batch,
    scaled_ar,
)
from .hypothesis import (
    BlockMatrix,
    ScenarioSpec,
    ValidationReport,
    canned_scenario,
    projection_from_h,
    scenario_a_matrix,
    scenario_b_matrix,
    validate_hypothesis,
)
from .moments import (
    SpectralSummary,
    build_vn,
    exact_moments,
    q_statistic,
    spectral_summary,
    standardized_statistic,
)
from .estimators import (
    IndexSource,
    IndexTuple,
    PermutationSet,
    TraceEstimates,
    a1_full,
    a2_full,
    a3_full,
    a_star,
    b_estimators,
    b_star,
    draw_permutations,
    fhat_pearson,
    identity_permutations,
    z_vector,
)
from .dists import (
    chisq_cdf,
    chisq_quantile,
    kf_quantile,
    normal_cdf,
    normal_quantile,
    weighted_chisq_sample,
)
from .inference import (
    EstimatorConfig,
    TestReport,
    critical_value,
    fp_regime_diagnostic,
    run_test,
    w_statistic,
)
from .harness import (
    ExperimentConfig,
    ResultRow,
    analyze,
    binomial_interval,
    ingest_data,
    parse_config,
    run_experiment,
    write_group_csv,
    write_rows,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
