"""Bayesian dynamic linear models with dynamic fused lasso priors."""

from .cdlm import (
    CdlmSpec,
    FilterResult,
    backward_sample,
    ffbs_draw,
    forward_filter,
    sample_scale,
    scale_quadratic,
    smoother_moments,
)
from .errors import ConfigError, NumericalError
from .geweke import GewekeReport, GewekeRunner, default_check_model, run_geweke
from .gibbs import (
    VARIANTS,
    ChainConfig,
    ChainOutput,
    GibbsSampler,
    GibbsState,
    ModelConfig,
)
from .harness import (
    Dataset,
    DgpSpec,
    EvalReport,
    ForecastTable,
    StudyResult,
    activation_profile,
    comparison_table,
    evaluate_fit,
    expected_counts,
    run_study,
    sequential_forecast,
    simulate_dataset,
)
from .prior import (
    MixtureConstants,
    Weights,
    conditional_shrinkage_mean,
    log_geometric_weights,
    mixture_constants,
    normalizing_constant,
    prior_count_mean,
    prior_count_positive_prob,
    shrinkage_weight_cdf,
    shrinkage_weight_density,
    shrinkage_weight_pdf,
    stationary_density,
    transition_density,
)
from .samplers import (
    GigParams,
    RngStream,
    make_rng,
    sample_extended_gamma,
    sample_geometric,
    sample_gig,
    sample_grid,
    sample_log_geometric,
    sample_prior_transition,
    sample_stationary,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
