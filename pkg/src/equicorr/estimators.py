"""Estimator-style facade over the functional core.

Thin adapters exposing the selection procedures through the familiar
``fit`` / ``predict`` protocol so they drop into pipelines and grid
searches.  Each row of ``X`` is one observation vector over the ``n``
channels; there is no ``y``.  All numerical work stays in the functional
modules -- these classes only hold configuration and fitted constants.

Label convention for predictions: ``0`` is the null model, ``i >= 1``
claims a signal on channel ``i-1``, and ``-1`` means no model reached
the acceptance threshold.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .adaptive import tau2_max_fpp, type2_mle_tau2
from .bayes import decide, posterior
from .errors import InvalidInputError
from .frequentist import adhoc_critical_value, lrt_critical_value, lrt_statistic
from .model import ModelSpec, PriorSpec

__all__ = ["BayesSelector", "MaxAmplitudeTest", "LikelihoodRatioMaxTest"]


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] < 2:
        raise InvalidInputError(
            f"X must be (n_samples, n_channels >= 2), got shape {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("X must be finite")
    return X


class BayesSelector(BaseEstimator):
    """Posterior model selection: which channel carries the signal, if any.

    Parameters
    ----------
    rho:
        Common noise correlation between channels.
    r:
        Prior mass on the null model.
    tau2:
        Slab variance of the signal prior.  Required for
        ``tau2_mode="fixed"``; ignored otherwise.
    threshold:
        Posterior mass a model needs to be accepted.
    tau2_mode:
        ``"fixed"`` uses ``tau2`` as given; ``"adaptive_max_fpp"`` uses the
        least-conservative calibrated variance for the channel count;
        ``"type2_mle"`` refits the variance per observation vector by
        marginal maximum likelihood.
    """

    def __init__(self, rho=0.0, r=0.5, tau2=1.0, threshold=0.5,
                 tau2_mode="fixed"):
        self.rho = rho
        self.r = r
        self.tau2 = tau2
        self.threshold = threshold
        self.tau2_mode = tau2_mode

    def fit(self, X, y=None):
        X = _as_matrix(X)
        if self.tau2_mode not in ("fixed", "adaptive_max_fpp", "type2_mle"):
            raise InvalidInputError(
                f"unknown tau2_mode {self.tau2_mode!r}"
            )
        self.n_channels_ = X.shape[1]
        self.spec_ = ModelSpec(n_channels=self.n_channels_, rho=self.rho)
        if self.tau2_mode == "adaptive_max_fpp":
            self.tau2_ = tau2_max_fpp(
                self.n_channels_, self.rho, self.threshold, self.r
            )
        elif self.tau2_mode == "fixed":
            self.tau2_ = float(self.tau2)
        else:
            self.tau2_ = None  # refit per row in predict_proba
        return self

    def _prior_for(self, x: np.ndarray) -> PriorSpec:
        if self.tau2_ is not None:
            return PriorSpec(tau2=self.tau2_, r=self.r)
        return PriorSpec(tau2=type2_mle_tau2(x, self.spec_), r=self.r)

    def predict_proba(self, X) -> np.ndarray:
        """Posterior over the n+1 models, one row per sample."""
        check_is_fitted(self, "spec_")
        X = _as_matrix(X)
        if X.shape[1] != self.n_channels_:
            raise InvalidInputError(
                f"X has {X.shape[1]} channels, fitted for {self.n_channels_}"
            )
        out = np.empty((X.shape[0], self.n_channels_ + 1))
        for i, x in enumerate(X):
            out[i] = posterior(x, self.spec_, self._prior_for(x)).probs
        return out

    def predict(self, X) -> np.ndarray:
        """Accepted model per sample (0 null, i>=1 channel i-1, -1 none)."""
        proba = self.predict_proba(X)
        labels = np.empty(proba.shape[0], dtype=int)
        for i, row in enumerate(proba):
            dec = decide(row, self.threshold)
            labels[i] = -1 if dec.accepted is None else dec.accepted
        return labels


class MaxAmplitudeTest(BaseEstimator):
    """Global null test rejecting when ``max_i |x_i|`` exceeds a calibrated
    critical value.

    ``fit`` infers the channel count from ``X`` and solves for the
    critical value at level ``alpha``; ``predict`` returns 1 where the
    null is rejected.
    """

    def __init__(self, alpha=0.05, rho=0.0):
        self.alpha = alpha
        self.rho = rho

    def fit(self, X, y=None):
        X = _as_matrix(X)
        self.n_channels_ = X.shape[1]
        self.spec_ = ModelSpec(n_channels=self.n_channels_, rho=self.rho)
        cv = adhoc_critical_value(self.alpha, self.spec_)
        self.critical_value_ = cv.value
        self.alpha_attained_ = cv.alpha
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "critical_value_")
        X = _as_matrix(X)
        if X.shape[1] != self.n_channels_:
            raise InvalidInputError(
                f"X has {X.shape[1]} channels, fitted for {self.n_channels_}"
            )
        return np.abs(X).max(axis=1) - self.critical_value_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0.0).astype(int)


class LikelihoodRatioMaxTest(BaseEstimator):
    """Likelihood-ratio test of the global null against the best
    single-signal alternative, calibrated by Monte Carlo.

    The statistic is the max over channels of a squared decorrelated
    score; its null quantile at level ``alpha`` is estimated from
    ``reps`` simulated null draws with a fixed seed, making ``fit``
    deterministic.
    """

    def __init__(self, alpha=0.05, rho=0.0, reps=100_000, seed=0):
        self.alpha = alpha
        self.rho = rho
        self.reps = reps
        self.seed = seed

    def fit(self, X, y=None):
        X = _as_matrix(X)
        self.n_channels_ = X.shape[1]
        self.spec_ = ModelSpec(n_channels=self.n_channels_, rho=self.rho)
        cv = lrt_critical_value(
            self.alpha, self.spec_, reps=self.reps, master_seed=self.seed
        )
        self.critical_value_ = cv.value
        self.alpha_attained_ = cv.alpha
        self.mc_stderr_ = cv.stderr
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "critical_value_")
        X = _as_matrix(X)
        if X.shape[1] != self.n_channels_:
            raise InvalidInputError(
                f"X has {X.shape[1]} channels, fitted for {self.n_channels_}"
            )
        return np.array(
            [lrt_statistic(x, self.spec_) for x in X]
        ) - self.critical_value_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0.0).astype(int)
