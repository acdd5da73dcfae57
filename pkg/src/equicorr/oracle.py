"""Brute-force reference implementations used to cross-check the fast paths.

Everything in this module works from dense ``n x n`` covariance matrices and
generic linear algebra (Cholesky factorisations, ``numpy.linalg``), with no
appeal to the closed-form precision coefficients, rank-one update identities,
or log-space shortcuts that the production code relies on.  That independence
is the point: the main routines and these references share only the model
definition, so agreement between the two is a real check rather than the same
algebra executed twice.

Costs are O(n^3) per evaluation, so callers are capped at a small ``n``.

The module also carries :func:`posterior_zform`, a second *analytic* route to
the exact posterior written in terms of the decorrelated statistics
``z_i = (x_i - xbar)/sqrt(1 - rho)`` and the channel mean.  It is algebra-
equivalent to the production formula but wired through entirely different
intermediate quantities, which makes it a sensitive regression net for sign
and coefficient mistakes.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky
from scipy.special import logsumexp

from .errors import InvalidInputError
from .model import ModelSpec, PriorSpec, TruthScenario, equicorrelated_cov

__all__ = [
    "MAX_DENSE_CHANNELS",
    "MAX_DENSE_SAMPLE_CHANNELS",
    "dense_model_cov",
    "dense_sample",
    "dense_log_marginals",
    "dense_posterior",
    "dense_lr",
    "posterior_zform",
    "zform_marginal_likelihood",
]

MAX_DENSE_CHANNELS = 50
MAX_DENSE_SAMPLE_CHANNELS = 1000


def _check_dense_n(n: int, cap: int = MAX_DENSE_CHANNELS) -> None:
    if n > cap:
        raise InvalidInputError(
            f"dense reference routines are capped at n <= {cap} "
            f"channels (got {n}); use the production routines for large n"
        )


def dense_model_cov(
    spec: ModelSpec, prior: PriorSpec, channel: int | None
) -> np.ndarray:
    """Marginal covariance of x under one candidate model.

    ``channel=None`` gives the null covariance ``Sigma0``; channel ``i``
    gives ``Sigma0 + tau2 * e_i e_i'`` (signal amplitude integrated out
    against its ``N(0, tau2)`` prior).
    """
    _check_dense_n(spec.n_channels)
    cov = equicorrelated_cov(spec)
    if channel is not None:
        if not 0 <= channel < spec.n_channels:
            raise InvalidInputError(
                f"channel {channel} out of range for n={spec.n_channels}"
            )
        cov[channel, channel] += prior.tau2
    return cov


def dense_sample(
    truth: TruthScenario, spec: ModelSpec, rng: np.random.Generator
) -> np.ndarray:
    """Draw one observation via a dense Cholesky factor of ``Sigma0``.

    Deliberately avoids the O(n) common-shock decomposition used by
    :func:`equicorr.model.sample`; the two samplers are compared
    distributionally in the test-suite.
    """
    _check_dense_n(spec.n_channels, cap=MAX_DENSE_SAMPLE_CHANNELS)
    n = spec.n_channels
    lower = cholesky(equicorrelated_cov(spec), lower=True)
    x = lower @ rng.standard_normal(n)
    if truth.model_index > n:
        raise InvalidInputError(
            f"model_index {truth.model_index} out of range for n={n}"
        )
    if truth.model_index >= 1:
        x[truth.model_index - 1] += truth.theta
    return x


def _dense_log_density(x: np.ndarray, cov: np.ndarray) -> float:
    """log N(x; 0, cov) via a Cholesky factorisation."""
    n = x.shape[0]
    factor = cho_factor(cov, lower=True)
    quad = float(x @ cho_solve(factor, x))
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return -0.5 * (n * np.log(2.0 * np.pi) + logdet + quad)


def dense_log_marginals(
    x: np.ndarray, spec: ModelSpec, prior: PriorSpec
) -> np.ndarray:
    """Log marginal densities ``(log m_0(x), log m_1(x), ..., log m_n(x))``.

    Entry 0 is the null model; entry i >= 1 is the model with the signal on
    channel i-1.  Each is evaluated from its dense marginal covariance.
    """
    x = np.asarray(x, dtype=float)
    n = spec.n_channels
    _check_dense_n(n)
    if x.shape != (n,):
        raise InvalidInputError(f"x must have shape ({n},), got {x.shape}")
    out = np.empty(n + 1)
    out[0] = _dense_log_density(x, dense_model_cov(spec, prior, None))
    for i in range(n):
        out[i + 1] = _dense_log_density(x, dense_model_cov(spec, prior, i))
    return out


def dense_posterior(x: np.ndarray, spec: ModelSpec, prior: PriorSpec) -> np.ndarray:
    """Exact posterior over (null, channel 1, ..., channel n), densely.

    Bayes' rule applied to the n+1 dense marginal densities with prior
    weights (r, (1-r)/n, ..., (1-r)/n).
    """
    n = spec.n_channels
    logm = dense_log_marginals(x, spec, prior)
    logw = logm + np.concatenate(
        ([np.log(prior.r)], np.full(n, np.log((1.0 - prior.r) / n)))
    )
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def dense_lr(x: np.ndarray, spec: ModelSpec) -> tuple[float, int]:
    """Likelihood-ratio statistic via dense generalised-least-squares fits.

    For each candidate channel the amplitude estimate maximising the
    single-signal likelihood is the GLS coefficient
    ``theta_hat_i = (e_i' Sigma0^{-1} x) / (e_i' Sigma0^{-1} e_i)``, and the
    corresponding log likelihood gain over the null is
    ``theta_hat_i^2 * (e_i' Sigma0^{-1} e_i) / 2``.  Returns the pair
    ``(lr, model_index)`` where ``lr = min_i exp(-gain_i)`` is the ratio of
    the null likelihood to the best single-signal likelihood and
    ``model_index`` is the fitted signal model (1-based, matching
    :class:`~equicorr.model.TruthScenario`; lowest index on ties).
    """
    x = np.asarray(x, dtype=float)
    n = spec.n_channels
    _check_dense_n(n)
    if x.shape != (n,):
        raise InvalidInputError(f"x must have shape ({n},), got {x.shape}")
    prec = np.linalg.inv(equicorrelated_cov(spec))
    score = prec @ x  # entry i is e_i' Sigma0^{-1} x
    curvature = np.diag(prec)  # entry i is e_i' Sigma0^{-1} e_i
    gain = 0.5 * score**2 / curvature
    best = int(np.argmax(gain))
    return float(np.exp(-gain[best])), best + 1


def posterior_zform(x: np.ndarray, spec: ModelSpec, prior: PriorSpec) -> np.ndarray:
    """Exact posterior written in decorrelated coordinates.

    Same distribution as :func:`equicorr.bayes.posterior`, derived instead
    from the statistics ``z_i = (x_i - xbar)/sqrt(1 - rho)`` and ``xbar``.
    With

        kappa = (1 - rho + tau2) (1 + (n-1) rho) - tau2 * rho
        c     = (1 + (n-1) rho) / kappa
        s_i   = sqrt(1 - rho) z_i + (1 - rho) xbar / (1 + (n-1) rho)

    the channel-i posterior weight relative to the null is

        ((1 - r)/n) * sqrt((1 + (n-1) rho) (1 - rho) / kappa)
                    * exp( tau2 * c * s_i^2 / (2 (1 - rho)) ).

    Evaluated in log space and normalised by direct summation.
    """
    x = np.asarray(x, dtype=float)
    n, rho, tau2, r = spec.n_channels, spec.rho, prior.tau2, prior.r
    if x.shape != (n,):
        raise InvalidInputError(f"x must have shape ({n},), got {x.shape}")
    xbar = x.mean()
    z = (x - xbar) / np.sqrt(1.0 - rho)
    kappa = (1.0 - rho + tau2) * (1.0 + (n - 1) * rho) - tau2 * rho
    c = (1.0 + (n - 1) * rho) / kappa
    s = np.sqrt(1.0 - rho) * z + (1.0 - rho) * xbar / (1.0 + (n - 1) * rho)
    log_null = np.log(r)
    log_channels = (
        np.log((1.0 - r) / n)
        + 0.5 * np.log((1.0 + (n - 1) * rho) * (1.0 - rho) / kappa)
        + tau2 * c * s**2 / (2.0 * (1.0 - rho))
    )
    logw = np.concatenate(([log_null], log_channels))
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def zform_marginal_likelihood(tau2: float, x: np.ndarray, spec: ModelSpec) -> float:
    """Simplified decorrelated form of the log marginal likelihood.

    Large-``n`` companion to :func:`equicorr.adaptive.marginal_likelihood`:
    the channel scores are replaced by the decorrelated statistics
    ``z_i = (x_i - xbar)/sqrt(1 - rho)`` and the precision coefficient by
    its ``n -> infinity`` limit ``1/(1 - rho)``, giving

        -log n - (1/2) log((1 - rho + tau2)/(1 - rho))
              + log sum_i exp{ tau2 z_i^2 / (2 (1 - rho + tau2)) }.

    Agrees with the full-coefficient form only up to a factor 1 + o(1)
    (almost surely, as n grows); the test-suite tracks the empirical gap.
    """
    if not (np.isfinite(tau2) and tau2 >= 0.0):
        raise InvalidInputError(f"tau2 must be finite and >= 0, got {tau2!r}")
    x = np.asarray(x, dtype=float)
    n, rho = spec.n_channels, spec.rho
    if x.shape != (n,):
        raise InvalidInputError(f"x must have shape ({n},), got {x.shape}")
    z2 = (x - x.mean()) ** 2 / (1.0 - rho)
    gains = tau2 * z2 / (2.0 * (1.0 - rho + tau2))
    return float(
        -np.log(n)
        - 0.5 * np.log((1.0 - rho + tau2) / (1.0 - rho))
        + logsumexp(gains)
    )
