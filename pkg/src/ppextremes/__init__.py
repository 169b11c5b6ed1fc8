"""Bayesian inference for univariate extremes through the Poisson-process
model, built around the orthogonal (r, nu, xi) parameterization."""

from .core import (
    DomainError,
    GpdParams,
    ModelContext,
    OriginalParams,
    OrthogonalParams,
    fisher_information,
    gev_cdf,
    gpd_cdf,
    gpd_quantile,
    gpd_scale_at_threshold,
    rescale_blocks,
    to_original,
    to_orthogonal,
)
from .priors import (
    PcPriorConfig,
    PriorSpec,
    log_jeffreys_original,
    log_jeffreys_orthogonal,
    log_pc_composite,
    pc_distance,
    pc_equal_tailed_interval,
    pc_log_density,
)
from .model import (
    ConfigError,
    ExceedanceData,
    LogPosterior,
    Parameterization,
    build_log_posterior,
    gpd_loglik,
    posterior_predictive_draw,
    pp_loglik_original,
    pp_loglik_orthogonal,
)
from .sampler import ChainSet, InitializationError, SamplerConfig, run_chains, transform_chains
from .diagnostics import (
    DiagnosticsReport,
    autocorrelation,
    build_report,
    ess,
    local_rhat,
    rhat_infinity,
)
from .simulate import (
    FitError,
    GenerationResult,
    GeneratorSpec,
    SharkeyResult,
    acov_offdiag,
    generate,
    ml_fit,
    moment_init,
    tune_m,
    wadsworth_m,
)
from .analysis import (
    Estimator,
    MseReport,
    ReturnLevelCurve,
    mse_study,
    propriety_oracle_jeffreys,
    return_level,
    return_level_curve,
    run_inference,
    summarize,
)
from .ingest import DailySeries, DeclusterConfig, decluster, load_csv

__version__ = "0.1.0"
