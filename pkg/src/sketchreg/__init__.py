"""Sketched least-squares regression: random compressions, estimators and inference."""

from .dataset import Dataset, FitSummary, fit_full, leverage_profile, leverage_scores, load_csv
from .errors import ConfigError, DataError, RankDeficientError, SketchRegError, SketchSizeError
from .estimators import (
    Estimate,
    FullMoments,
    SketchedGram,
    all_estimates,
    beta_combined,
    beta_complete,
    beta_full,
    beta_onestep,
    beta_partial,
    beta_partial_unbiased,
    phi_opt,
)
from .inference import (
    ConfidenceIntervals,
    PopulationModel,
    VarianceReport,
    assumption_diagnostics,
    check_worst_case_bounds,
    ci_complete,
    ci_partial,
    embedding_epsilon,
    mahalanobis_normality_test,
    unconditional_variance,
    var_complete,
    var_complete_moment,
    var_complete_plugin,
    var_partial,
    var_partial_plugin,
)
from .montecarlo import (
    ExperimentConfig,
    ExperimentReport,
    run_coverage_experiment,
    run_mse_experiment,
    run_normality_experiment,
    run_timing_experiment,
    synthetic_dataset,
)
from .sketches import (
    KINDS,
    SketchedData,
    SketchSpec,
    apply_sketch,
    fwht,
    materialize_sketch,
    recommend_sketch_size,
    sketch_dataset,
)

__version__ = "0.1.0"
