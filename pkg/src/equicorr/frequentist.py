"""Frequentist max-type tests for one signal among equicorrelated channels.

Two tests are implemented.

**Max-amplitude test.**  Reject the null when ``max_i |x_i| > c``.  Under
the null, conditioning on the common shock ``Z`` makes the channels
independent, so the size of the test is the one-dimensional integral

    alpha(c) = 1 - E_Z[ ( Phi((c - sqrt(rho) Z)/sqrt(1-rho))
                        - Phi((-c - sqrt(rho) Z)/sqrt(1-rho)) )^n ],

evaluated here by Gauss--Hermite quadrature with adaptive order doubling
(and an automatic switch to adaptive Gaussian quadrature for the nearly
degenerate regime rho -> 1, where the integrand approaches a step function
that fixed Hermite nodes cannot resolve).  Inner probabilities are handled
in log space, so the ``n``-th power neither under- nor overflows even for
hundreds of thousands of channels.  :func:`adhoc_critical_value` inverts
``alpha(c)`` by bracketed root-finding; the closed-form endpoints of the
correlation range are exposed by :func:`adhoc_rho_limits`:

    rho = 0:   Phi(c) = (1 + (1 - alpha)^{1/n}) / 2
    rho -> 1:  Phi(c) -> 1 - alpha / 2     (one effective channel left).

**Likelihood-ratio test.**  The statistic is

    T = max_j ( sqrt(1 - rho) x_j + n rho (x_j - xbar) / sqrt(1 - rho) )^2,

a scaled square of the per-channel GLS score; the likelihood ratio itself
is the exact monotone transform

    LR = exp( -T / (2 (1 + (n-1) rho)(1 + (n-2) rho)) ),

so rejecting for small LR and rejecting for large T are the same test.  At
``rho = 0`` the statistic reduces to ``max_j x_j^2`` and the test coincides
with the max-amplitude test at the matching threshold.  The null law of
``T`` is not available in closed form for general rho, so critical values
are estimated by Monte Carlo with a bootstrap standard error.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri, roots_hermite

from .errors import ConvergenceError, InvalidInputError
from .model import ModelSpec, TruthScenario, sample, substream

__all__ = [
    "CriticalValue",
    "RhoLimits",
    "adhoc_alpha",
    "adhoc_critical_value",
    "adhoc_rho_limits",
    "lrt_channel_scores",
    "lrt_statistic",
    "lr_from_statistic",
    "lrt_critical_value",
]

_QUADRATURE_TOL = 1e-12
_MIN_HERMITE_ORDER = 64
_MAX_HERMITE_ORDER = 1024
_ALPHA_SOLVE_TOL = 1e-9
# Below this expected count of null exceedances a Monte Carlo quantile is
# too noisy to trust; the estimate is still returned, with a warning.
_MIN_EXPECTED_EXCEEDANCES = 100


@dataclass(frozen=True)
class CriticalValue:
    """A test threshold, with sampling error when Monte-Carlo derived.

    ``stderr`` is None for deterministically computed thresholds.
    """

    value: float
    alpha: float
    stderr: float | None = None
    reps: int | None = None
    method: str = "quadrature"


@dataclass(frozen=True)
class RhoLimits:
    """Closed-form limits of the max-amplitude threshold in rho.

    Expressed on the probability scale: ``phi_at_rho0 = Phi(c)`` for
    independent channels and ``phi_at_rho1 = lim_{rho->1} Phi(c)``.
    """

    alpha: float
    n_channels: int
    phi_at_rho0: float
    phi_at_rho1: float

    @property
    def c_at_rho0(self) -> float:
        return float(ndtri(self.phi_at_rho0))

    @property
    def c_at_rho1(self) -> float:
        return float(ndtri(self.phi_at_rho1))


@lru_cache(maxsize=8)
def _hermite_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached Gauss-Hermite nodes/weights (scipy's high-order-stable rule)."""
    return roots_hermite(order)


def _log_inner_prob(c: float, z: np.ndarray, rho: float) -> np.ndarray:
    """log P(|x_1| <= c | Z = z) for one channel, stable in both tails."""
    s = np.sqrt(1.0 - rho)
    hi = (c - np.sqrt(rho) * z) / s
    lo = (-c - np.sqrt(rho) * z) / s
    # Probability of escaping the band, computed from the two tails; this
    # is accurate when the band holds nearly all mass (p_out small), which
    # is the regime where the n-th power is delicate.
    p_out = ndtr(-hi) + ndtr(lo)
    with np.errstate(divide="ignore"):  # log(0) -> -inf is the right answer
        return np.where(
            p_out < 0.5, np.log1p(-p_out), np.log(np.maximum(ndtr(hi) - ndtr(lo), 0.0))
        )


def adhoc_alpha(c: float, spec: ModelSpec) -> float:
    """Null rejection probability of ``max_i |x_i| > c``.

    Gauss-Hermite order starts at 64 and doubles until two consecutive
    orders agree to 1e-12 (or the 1024-node cap is hit, after which the
    integral is re-done with adaptive quadrature on the shock scale --
    needed only for rho within about 1e-4 of 1, where the conditional
    band probability is a near step function in the shock).
    """
    if not np.isfinite(c) or c < 0.0:
        raise InvalidInputError(f"c must be a nonnegative float, got {c!r}")
    n, rho = spec.n_channels, spec.rho
    if rho == 0.0:
        # Channels already independent; the shock integral is a no-op.
        p_out = 2.0 * ndtr(-c)
        return float(-np.expm1(n * np.log1p(-p_out))) if p_out < 1.0 else 1.0

    prev = None
    order = _MIN_HERMITE_ORDER
    while order <= _MAX_HERMITE_ORDER:
        nodes, weights = _hermite_rule(order)
        z = np.sqrt(2.0) * nodes  # E g(Z) = sum w_k g(sqrt(2) t_k) / sqrt(pi)
        keep = n * _log_inner_prob(c, z, rho)
        alpha = float(np.sum(weights * -np.expm1(keep)) / np.sqrt(np.pi))
        if prev is not None and abs(alpha - prev) < _QUADRATURE_TOL:
            return min(max(alpha, 0.0), 1.0)
        prev = alpha
        order *= 2

    # Hermite nodes are ~0.07 apart near the origin; once the conditional
    # band probability transitions over a shock scale narrower than that
    # (rho extremely close to 1), fall back to adaptive quadrature with
    # breakpoints at the transition shocks +-c/sqrt(rho).
    def integrand(z: float) -> float:
        zz = np.asarray([z])
        return float(
            -np.expm1(n * _log_inner_prob(c, zz, rho)[0])
            * np.exp(-0.5 * z * z)
            / np.sqrt(2.0 * np.pi)
        )

    cut = c / np.sqrt(rho)
    points = sorted({-cut, cut}) if cut < 40.0 else None
    with warnings.catch_warnings():
        # Roundoff chatter is expected at the near-step integrand; accuracy
        # is policed by the explicit error estimate below instead.
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        alpha, err = integrate.quad(
            integrand, -40.0, 40.0, points=points, limit=200,
            epsabs=1e-13, epsrel=1e-11,
        )
    if err > 1e-9:
        raise ConvergenceError(
            f"size integral did not converge (estimated error {err:.2e})"
        )
    return min(max(float(alpha), 0.0), 1.0)


def adhoc_critical_value(alpha: float, spec: ModelSpec) -> CriticalValue:
    """Threshold c with ``P(max_i |x_i| > c) = alpha`` under the null.

    Solved by bracketed root-finding on the monotone size function; the
    achieved size is verified to match ``alpha`` within 1e-9.
    """
    if not (0.0 < alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha!r}")

    def f(c: float) -> float:
        return adhoc_alpha(c, spec) - alpha

    hi = 10.0
    while f(hi) > 0.0:
        hi += 10.0
        if hi > 200.0:  # pragma: no cover - alpha in (0,1) always brackets
            raise ConvergenceError("failed to bracket the critical value")
    c = brentq(f, 0.0, hi, xtol=1e-13, rtol=8.9e-16)
    achieved = adhoc_alpha(c, spec)
    if abs(achieved - alpha) > _ALPHA_SOLVE_TOL:
        raise ConvergenceError(
            f"critical value solve achieved size {achieved!r}, "
            f"target {alpha!r} (tolerance {_ALPHA_SOLVE_TOL})"
        )
    return CriticalValue(value=float(c), alpha=alpha, method="quadrature")


def adhoc_rho_limits(alpha: float, n_channels: int) -> RhoLimits:
    """Endpoints of the max-amplitude threshold over the correlation range.

    At ``rho = 0`` channels are independent and
    ``Phi(c) = (1 + (1-alpha)^{1/n}) / 2``; as ``rho -> 1`` the channels
    merge into a single effective one and ``Phi(c) -> 1 - alpha/2``.  For
    large ``n`` the independent endpoint behaves like
    ``Phi(c) = 1 + log(1-alpha)/(2n) + O(1/n^2)``.
    """
    if not (0.0 < alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha!r}")
    if n_channels < 1:
        raise InvalidInputError(f"n_channels must be >= 1, got {n_channels!r}")
    phi0 = 0.5 * (1.0 + (1.0 - alpha) ** (1.0 / n_channels))
    phi1 = 1.0 - alpha / 2.0
    return RhoLimits(
        alpha=alpha, n_channels=n_channels, phi_at_rho0=phi0, phi_at_rho1=phi1
    )


def lrt_channel_scores(x: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Squared per-channel contributions to the likelihood-ratio statistic.

    Entry j is ``(sqrt(1-rho) x_j + n rho (x_j - xbar)/sqrt(1-rho))^2``;
    the statistic is the maximum and the fitted channel its argmax.
    """
    x = np.asarray(x, dtype=float)
    n, rho = spec.n_channels, spec.rho
    if x.shape != (n,):
        raise InvalidInputError(f"x must have shape ({n},), got {x.shape}")
    s = np.sqrt(1.0 - rho)
    bracket = s * x + n * rho * (x - x.mean()) / s
    return bracket**2


def lrt_statistic(x: np.ndarray, spec: ModelSpec) -> float:
    """Likelihood-ratio test statistic ``T`` (reject for large values)."""
    return float(lrt_channel_scores(x, spec).max())


def lr_from_statistic(t: float, spec: ModelSpec) -> float:
    """Likelihood ratio ``sup_null L / sup_alt L`` as a function of ``T``.

    The exact relation ``LR = exp(-T / (2 (1+(n-1)rho)(1+(n-2)rho)))``
    shows the two orderings are equivalent.
    """
    n, rho = spec.n_channels, spec.rho
    scale = 2.0 * (1.0 + (n - 1) * rho) * (1.0 + (n - 2) * rho)
    return float(np.exp(-t / scale))


def lrt_critical_value(
    alpha: float,
    spec: ModelSpec,
    reps: int = 100_000,
    master_seed: int = 0,
) -> CriticalValue:
    """Monte Carlo (1 - alpha) null quantile of the statistic ``T``.

    Simulates ``reps`` null replicates (one substream per replicate, so the
    estimate is reproducible and independent of batching), takes the
    empirical quantile, and attaches a bootstrap standard error from 200
    resamples.  Warns when ``reps * min(alpha, 1-alpha)`` is below 100,
    i.e. when too few replicates land beyond the quantile for the estimate
    to be reliable.
    """
    if not (0.0 < alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha!r}")
    if reps < 2:
        raise InvalidInputError(f"reps must be >= 2, got {reps!r}")
    expected_tail = reps * min(alpha, 1.0 - alpha)
    if expected_tail < _MIN_EXPECTED_EXCEEDANCES:
        warnings.warn(
            f"only ~{expected_tail:.0f} replicates expected beyond the "
            f"{1 - alpha:.4g} quantile; increase reps for a stable "
            f"critical value",
            stacklevel=2,
        )
    null = TruthScenario()
    t = np.empty(reps)
    for i in range(reps):
        rng = substream(master_seed, i)
        t[i] = lrt_statistic(sample(null, spec, rng), spec)
    value = float(np.quantile(t, 1.0 - alpha))
    boot_rng = substream(master_seed, reps)  # after all replicate streams
    boots = np.empty(200)
    for b in range(200):
        idx = boot_rng.integers(0, reps, size=reps)
        boots[b] = np.quantile(t[idx], 1.0 - alpha)
    return CriticalValue(
        value=value,
        alpha=alpha,
        stderr=float(boots.std(ddof=1)),
        reps=reps,
        method="monte-carlo",
    )
