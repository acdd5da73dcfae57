"""Signal detection among equicorrelated Gaussian channels.

An observation vector of ``n`` channels carries at most one signal in
equicorrelated Gaussian noise.  The package implements and cross-validates
the main approaches to deciding "which channel, if any":

* frequentist max-type tests (:mod:`equicorr.frequentist`),
* exact and asymptotic Bayesian model selection (:mod:`equicorr.bayes`),
* size-adaptive and empirical-Bayes prior variances (:mod:`equicorr.adaptive`),
* closed-form limit predictions (:mod:`equicorr.asymptotics`),
* dense linear-algebra oracle implementations (:mod:`equicorr.oracle`),
* a deterministic simulation harness and CSV writer (:mod:`equicorr.harness`),
* scikit-learn style estimator wrappers (:mod:`equicorr.estimators`),
* a command-line interface (:mod:`equicorr.cli`).
"""

from .errors import (
    BoundaryFitWarning,
    ConvergenceError,
    DomainWarning,
    EquicorrError,
    InvalidInputError,
)
from .model import (
    ModelSpec,
    PriorSpec,
    SigmaCoeffs,
    TruthScenario,
    equicorrelated_cov,
    sample,
    sigma_coeffs,
    substream,
    z_transform,
)
from .bayes import (
    Decision,
    PosteriorVector,
    channel_scores,
    decide,
    posterior,
    posterior_asymptotic,
    posterior_n2,
)
from .frequentist import (
    CriticalValue,
    RhoLimits,
    adhoc_alpha,
    adhoc_critical_value,
    adhoc_rho_limits,
    lr_from_statistic,
    lrt_channel_scores,
    lrt_critical_value,
    lrt_statistic,
)
from .adaptive import (
    KStarSolution,
    boundary_offset,
    fpp_adaptive_asymptotic,
    fpp_type2_asymptotic,
    k_of_c,
    marginal_likelihood,
    solve_kstar,
    tau2_max_fpp,
    threshold_for_fpp,
    type2_mle_tau2,
)
from .asymptotics import (
    InfoGrowthLimit,
    InfoGrowthSpec,
    TailBounds,
    detection_boundary,
    fpp_fixed_tau_asymptotic,
    info_growth_limit,
    normal_tail_bounds,
    null_posterior_limit,
    rho1_posterior_limit_n2,
)
from .harness import (
    CsvRow,
    ExperimentConfig,
    FppEstimate,
    config_from_file,
    config_from_text,
    rows_to_csv,
    run_experiment,
    run_fpp,
    write_csv,
)
from .estimators import (
    BayesSelector,
    LikelihoodRatioMaxTest,
    MaxAmplitudeTest,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryFitWarning",
    "ConvergenceError",
    "DomainWarning",
    "EquicorrError",
    "InvalidInputError",
    "ModelSpec",
    "PriorSpec",
    "SigmaCoeffs",
    "TruthScenario",
    "equicorrelated_cov",
    "sample",
    "sigma_coeffs",
    "substream",
    "z_transform",
    "Decision",
    "PosteriorVector",
    "channel_scores",
    "decide",
    "posterior",
    "posterior_asymptotic",
    "posterior_n2",
    "CriticalValue",
    "RhoLimits",
    "adhoc_alpha",
    "adhoc_critical_value",
    "adhoc_rho_limits",
    "lr_from_statistic",
    "lrt_channel_scores",
    "lrt_critical_value",
    "lrt_statistic",
    "KStarSolution",
    "boundary_offset",
    "fpp_adaptive_asymptotic",
    "fpp_type2_asymptotic",
    "k_of_c",
    "marginal_likelihood",
    "solve_kstar",
    "tau2_max_fpp",
    "threshold_for_fpp",
    "type2_mle_tau2",
    "InfoGrowthLimit",
    "InfoGrowthSpec",
    "TailBounds",
    "detection_boundary",
    "fpp_fixed_tau_asymptotic",
    "info_growth_limit",
    "normal_tail_bounds",
    "null_posterior_limit",
    "rho1_posterior_limit_n2",
    "CsvRow",
    "ExperimentConfig",
    "FppEstimate",
    "config_from_file",
    "config_from_text",
    "rows_to_csv",
    "run_experiment",
    "run_fpp",
    "write_csv",
    "BayesSelector",
    "LikelihoodRatioMaxTest",
    "MaxAmplitudeTest",
    "__version__",
]
