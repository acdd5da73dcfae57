"""Exact and asymptotic Bayesian posteriors for single-signal channel selection.

The candidate models are ``M_0`` (no signal anywhere) and ``M_i`` (one
signal, on channel i, with amplitude integrated against a ``N(0, tau2)``
prior); the prior puts mass ``r`` on ``M_0`` and ``(1-r)/n`` on each
``M_i``.  Because each ``M_i`` perturbs the null covariance by the rank-one
term ``tau2 e_i e_i'``, the posterior admits an O(n) closed form: with
precision coefficients ``(a, b)`` of the noise (see
:func:`equicorr.model.sigma_coeffs`) and channel scores

    xi_i = (x_i - xbar) / (1 - rho) + xbar / (1 + (n - 1) rho),

the marginal-likelihood ratio of ``M_i`` to ``M_0`` is

    m_i(x) / m_0(x) = (1 + tau2 * a)^{-1/2}
                      * exp( tau2 * xi_i^2 / (2 (1 + tau2 * a)) ),

a rank-one (Sherman--Morrison) update of the null density.  All weights are
combined in log space, so the computation is overflow-safe for any ``n`` or
signal size.

:func:`posterior_n2` is an independent hand-reduction of the two-channel
case and :func:`posterior_asymptotic` is the large-``n`` approximation in
which channels decouple after the decorrelating z-transform.  The decision
rule :func:`decide` accepts the highest-posterior model among those
clearing a probability threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .errors import InvalidInputError
from .model import ModelSpec, PriorSpec, sigma_coeffs, z_transform

__all__ = [
    "PosteriorVector",
    "Decision",
    "channel_scores",
    "posterior",
    "posterior_n2",
    "posterior_asymptotic",
    "decide",
]


@dataclass(frozen=True)
class PosteriorVector:
    """Posterior mass over the n+1 candidate models.

    ``probs[0]`` is the null model; ``probs[i]`` for i >= 1 is the model
    with the signal on channel i-1 (0-based data indexing).
    """

    probs: np.ndarray

    @property
    def null_prob(self) -> float:
        return float(self.probs[0])

    @property
    def channel_probs(self) -> np.ndarray:
        return self.probs[1:]


@dataclass(frozen=True)
class Decision:
    """Outcome of thresholded model selection.

    ``accepted`` is 0 for the null model, ``i >= 1`` for channel ``i-1``,
    or ``None`` when no model reaches the threshold (no decision).
    """

    accepted: int | None
    threshold: float

    @property
    def is_signal_claim(self) -> bool:
        """True when some channel (not the null, not "no decision") won."""
        return self.accepted is not None and self.accepted >= 1


def channel_scores(x: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Per-channel score ``xi_i = e_i' Sigma0^{-1} x``.

    This single statistic drives both the Bayesian posterior (through
    ``xi_i^2``) and the likelihood-ratio test.  Computed in the numerically
    friendly centred form ``(x_i - xbar)/(1 - rho) + xbar/(1 + (n-1) rho)``,
    which avoids the cancellation in ``a x_i + b * n * xbar`` when the
    common shock is large.
    """
    x = np.asarray(x, dtype=float)
    n, rho = spec.n_channels, spec.rho
    if x.shape != (n,):
        raise InvalidInputError(f"x must have shape ({n},), got {x.shape}")
    xbar = x.mean()
    return (x - xbar) / (1.0 - rho) + xbar / (1.0 + (n - 1) * rho)


def _log_weights(x: np.ndarray, spec: ModelSpec, prior: PriorSpec) -> np.ndarray:
    """Unnormalised log posterior weights (null first)."""
    n = spec.n_channels
    if n < 2:
        raise InvalidInputError(
            "the model-selection posterior needs at least two channels"
        )
    a = sigma_coeffs(spec).diag
    xi = channel_scores(x, spec)
    shrink = 1.0 + prior.tau2 * a
    log_null = np.log(prior.r)
    log_chan = (
        np.log((1.0 - prior.r) / n)
        - 0.5 * np.log(shrink)
        + prior.tau2 * xi**2 / (2.0 * shrink)
    )
    return np.concatenate(([log_null], log_chan))


def posterior(x: np.ndarray, spec: ModelSpec, prior: PriorSpec) -> PosteriorVector:
    """Exact posterior over (null, channel 1, ..., channel n).

    O(n) time and memory; log-space weights normalised with log-sum-exp, so
    extreme channel scores saturate gracefully at 0/1 instead of
    overflowing.  With ``tau2 = 0`` every model explains the data equally
    well and the prior is returned exactly (short-circuit: no point pushing
    zeros through the update).
    """
    if prior.tau2 == 0.0:
        n = spec.n_channels
        if n < 2:
            raise InvalidInputError(
                "the model-selection posterior needs at least two channels"
            )
        np.asarray(x, dtype=float).reshape((n,))  # still validate the data
        return PosteriorVector(
            probs=np.concatenate(
                ([prior.r], np.full(n, (1.0 - prior.r) / n))
            )
        )
    logw = _log_weights(x, spec, prior)
    probs = np.exp(logw - logsumexp(logw))
    probs /= probs.sum()  # exact unit mass, not just up to n*eps
    return PosteriorVector(probs=probs)


def posterior_n2(x: np.ndarray, rho: float, prior: PriorSpec) -> PosteriorVector:
    """Two-channel posterior from the hand-reduced closed form.

    For ``n = 2`` the general expression collapses: with
    ``g = 1 - rho^2 + tau2`` and writing ``x_(-i)`` for the other channel,

        P(M_i | x)^{-1} = 1
          + exp( -tau2 (x_i^2 - x_(-i)^2) / (2 g) )
          + (2 r / (1 - r)) * sqrt(g / (1 - rho^2))
            * exp( -tau2 (x_i - rho x_(-i))^2 / (2 g (1 - rho^2)) )

    and ``P(M_0 | x)`` is the complementary mass.  Kept as a separate code
    path (reciprocal form, different groupings) so it can cross-check the
    general routine rather than restate it.
    """
    x = np.asarray(x, dtype=float)
    if not (np.isfinite(rho) and 0.0 <= rho < 1.0):
        raise InvalidInputError(f"rho must lie in [0, 1), got {rho!r}")
    if x.shape != (2,):
        raise InvalidInputError(f"x must have shape (2,), got {x.shape}")
    tau2, r = prior.tau2, prior.r
    g = 1.0 - rho**2 + tau2
    probs = np.empty(3)
    for i in (0, 1):
        other = 1 - i
        score = (x[i] - rho * x[other]) / (1.0 - rho**2)
        terms = np.array(
            [
                0.0,
                -tau2 * (x[i] ** 2 - x[other] ** 2) / (2.0 * g),
                np.log(2.0 * r / (1.0 - r))
                + 0.5 * np.log(g / (1.0 - rho**2))
                - tau2 * (1.0 - rho**2) * score**2 / (2.0 * g),
            ]
        )
        probs[i + 1] = np.exp(-logsumexp(terms))
    probs[0] = 1.0 - probs[1] - probs[2]
    return PosteriorVector(probs=probs)


def posterior_asymptotic(
    x: np.ndarray, spec: ModelSpec, prior: PriorSpec
) -> PosteriorVector:
    """Large-``n`` channelwise approximation to the posterior.

    After the decorrelating transform ``z = z_transform(x)`` the channel
    posteriors approximately decouple:

        P(M_i | x) ~ ( 1 + (n / (1 - r)) * sqrt((1 - rho + tau2)/(1 - rho))
                         * exp( -tau2 z_i^2 / (2 (1 - rho + tau2)) ) )^{-1}

    with the null entry reported as the leftover mass ``1 - sum_i``.  The
    approximation is only meaningful for large ``n``: at small ``n`` the
    channel entries can exceed unit total mass, in which case the reported
    null entry is negative.  It is returned as computed -- truncating it
    would hide exactly the finite-``n`` error this function is used to
    study.
    """
    if prior.tau2 <= 0.0:
        raise InvalidInputError("posterior_asymptotic requires tau2 > 0")
    n, rho = spec.n_channels, spec.rho
    z = z_transform(x, spec)
    width = 1.0 - rho + prior.tau2
    log_odds_against = (
        np.log(n / (1.0 - prior.r))
        + 0.5 * np.log(width / (1.0 - rho))
        - prior.tau2 * z**2 / (2.0 * width)
    )
    channel = expit(-log_odds_against)
    probs = np.concatenate(([1.0 - channel.sum()], channel))
    return PosteriorVector(probs=probs)


def decide(post: PosteriorVector | np.ndarray, threshold: float) -> Decision:
    """Accept the highest-posterior model among those with mass >= threshold.

    Ties go to the lowest index (so the null model wins a tie with any
    channel).  When nothing reaches the threshold the decision is withheld
    (``accepted=None``) -- in particular a withheld decision never counts
    as a signal claim.
    """
    if not (0.0 < threshold < 1.0):
        raise InvalidInputError(f"threshold must lie in (0, 1), got {threshold!r}")
    probs = post.probs if isinstance(post, PosteriorVector) else np.asarray(post)
    candidates = np.flatnonzero(probs >= threshold)
    if candidates.size == 0:
        return Decision(accepted=None, threshold=threshold)
    best = candidates[np.argmax(probs[candidates])]
    return Decision(accepted=int(best), threshold=threshold)
