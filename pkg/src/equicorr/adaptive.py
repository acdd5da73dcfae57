"""Data- and size-adaptive choices of the signal prior variance.

With a fixed prior variance ``tau2`` the Bayesian selection rule becomes
extremely conservative as the channel count grows: its false-positive
probability (the chance of accepting some signal model under the global
null) decays polynomially in ``n``.  This module implements two ways of
letting ``tau2`` grow with ``n``, plus the asymptotic false-positive
formulas used to calibrate and cross-check them.

**Least favourable scaling.**  :func:`tau2_max_fpp` returns the prior
variance that asymptotically maximises the false-positive probability of
the threshold-``p`` rule,

    tau2_n = (1 - rho) * ( 2 log n + log log n
                           + 2 log( p / ((1-p)(1-r)) ) + log 2 ),

under which the false-positive probability tends to 0 at rate ``1/log n``
with the explicit constant implemented in :func:`fpp_adaptive_asymptotic`.

**Marginal-likelihood (empirical Bayes) fit.**  :func:`type2_mle_tau2`
maximises the integrated likelihood ratio of the signal mixture to the
null over ``tau2 >= 0``.  On data whose largest decorrelated amplitude
sits at the detection boundary ``z_1^2 = 2 log n + log log n + c``, the
fitted variance scales as ``(1 - rho) * k(c) * log n`` with

    k(c) = 1 / (1/2 + exp(-c/2) / sqrt(pi)),

see :func:`k_of_c`.  Self-consistency of the fit (the boundary implied by
the fitted variance reproducing the fit) pins ``k* = k(c*)`` as the root
of a one-dimensional fixed-point equation, solved by :func:`solve_kstar`;
the resulting rule has false-positive probability
``(1/k* - 1/2) / log n`` (:func:`fpp_type2_asymptotic`).

Finally :func:`threshold_for_fpp` inverts the least-favourable formula in
the acceptance threshold ``p``, giving the threshold that meets a target
false-positive probability at a given ``n``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import (
    BoundaryFitWarning,
    ConvergenceError,
    DomainWarning,
    InvalidInputError,
)
from .model import ModelSpec, sigma_coeffs
from .bayes import channel_scores

__all__ = [
    "KStarSolution",
    "tau2_max_fpp",
    "boundary_offset",
    "fpp_adaptive_asymptotic",
    "marginal_likelihood",
    "type2_mle_tau2",
    "k_of_c",
    "solve_kstar",
    "fpp_type2_asymptotic",
    "threshold_for_fpp",
]


def _check_prob(name: str, value: float) -> None:
    if not (np.isfinite(value) and 0.0 < value < 1.0):
        raise InvalidInputError(f"{name} must lie in (0, 1), got {value!r}")


def _check_n(n: int, minimum: int = 2) -> None:
    if not (isinstance(n, (int, np.integer)) and n >= minimum):
        raise InvalidInputError(f"n must be an integer >= {minimum}, got {n!r}")


def _log_prior_odds(p: float, r: float) -> float:
    """log( p / ((1-p)(1-r)) ), the tilt entering every boundary formula."""
    return float(np.log(p) - np.log1p(-p) - np.log1p(-r))


def tau2_max_fpp(n: int, rho: float, p: float, r: float) -> float:
    """Prior variance maximising the asymptotic false-positive probability.

    The value is positive for every sensible configuration.  At sizes too
    small for the expansion to mean anything (``log log n <= 0``, i.e.
    ``n = 2``, or an extreme threshold/prior tilt driving the bracket
    negative) a :class:`~equicorr.errors.DomainWarning` is emitted and the
    formula value is returned anyway rather than clamped or refused.
    """
    _check_n(n)
    if not (0.0 <= rho < 1.0):
        raise InvalidInputError(f"rho must lie in [0, 1), got {rho!r}")
    _check_prob("p", p)
    _check_prob("r", r)
    bracket = (
        2.0 * np.log(n)
        + np.log(np.log(n))
        + 2.0 * _log_prior_odds(p, r)
        + np.log(2.0)
    )
    if n <= 2 or bracket <= 0.0:
        warnings.warn(
            f"least-favourable variance evaluated outside its asymptotic "
            f"regime (n={n}, p={p}, r={r}); returning the raw formula value",
            DomainWarning,
            stacklevel=2,
        )
    return (1.0 - rho) * bracket


def boundary_offset(p: float, r: float) -> float:
    """Constant term of the acceptance boundary under the least favourable
    variance: ``2 log(p/((1-p)(1-r))) + log 2 + 1``.

    With tau2 from :func:`tau2_max_fpp`, the squared decorrelated amplitude
    at which the threshold-``p`` rule starts accepting sits at
    ``2 log n + log log n + boundary_offset(p, r) + o(1)``.
    """
    _check_prob("p", p)
    _check_prob("r", r)
    return float(2.0 * _log_prior_odds(p, r) + np.log(2.0) + 1.0)


def fpp_adaptive_asymptotic(n: int, p: float, r: float) -> float:
    """Asymptotic false-positive probability under the least favourable
    prior variance :func:`tau2_max_fpp`.

        e^{-1/2} sqrt(2/pi) * ((1-p)(1-r)/p)
            / ( 2 log n + log log n + 2 log(p/((1-p)(1-r))) + log 2 + 1 )

    Identical for every correlation level: the decorrelating transform
    removes rho from the leading-order behaviour.
    """
    _check_n(n, minimum=3)
    _check_prob("p", p)
    _check_prob("r", r)
    denom = (
        2.0 * np.log(n)
        + np.log(np.log(n))
        + 2.0 * _log_prior_odds(p, r)
        + np.log(2.0)
        + 1.0
    )
    if denom <= 0.0:
        raise InvalidInputError(
            f"asymptotic formula undefined at n={n}, p={p}, r={r}"
        )
    return float(
        np.exp(-0.5) * np.sqrt(2.0 / np.pi) * np.exp(-_log_prior_odds(p, r)) / denom
    )


def marginal_likelihood(tau2: float, x: np.ndarray, spec: ModelSpec) -> float:
    """Log marginal likelihood of ``tau2`` given the data (log scale).

    Computes ``log L_n(tau2)`` with the null density divided out:

        -log n - (1/2) log(1 + tau2 a)
              + log sum_i exp{ tau2 xi_i^2 / (2 (1 + tau2 a)) },

    where ``xi`` are the precision-weighted channel scores and ``a`` the
    diagonal precision coefficient.  Equals 0 at ``tau2 = 0`` by
    construction, and shares its argmax with the full r-weighted mixture
    likelihood (the null component does not depend on ``tau2``).  This is
    the objective maximised by :func:`type2_mle_tau2`.
    """
    if not (np.isfinite(tau2) and tau2 >= 0.0):
        raise InvalidInputError(f"tau2 must be finite and >= 0, got {tau2!r}")
    n = spec.n_channels
    a = sigma_coeffs(spec).diag
    xi = channel_scores(x, spec)
    shrink = 1.0 + tau2 * a
    gains = tau2 * xi**2 / (2.0 * shrink)
    return float(-np.log(n) - 0.5 * np.log(shrink) + logsumexp(gains))


def type2_mle_tau2(
    x: np.ndarray,
    spec: ModelSpec,
    *,
    grid_points: int = 64,
    tol: float = 1e-10,
) -> float:
    """Marginal-likelihood (type II) estimate of the prior variance.

    Maximises :func:`marginal_likelihood` over
    ``tau2 in [0, 10 (1-rho) (2 log n + log log n + 20)]``.  The search
    runs on the compactifying scale ``u = log(1 + tau2)``: a coarse
    ``grid_points``-point scan first (the objective has at most one
    interior mode in the regime of interest, but finite data can be
    boundary-dominated, so the scan picks the bracket), then
    golden-section refinement of the winning bracket down to width ``tol``
    in ``u`` -- comfortably below relative 1e-6 in ``tau2`` over the whole
    bracket.  Returns 0.0, with a :class:`~equicorr.errors.BoundaryFitWarning`,
    when no positive variance beats the null fit (flat likelihood).
    """
    x = np.asarray(x, dtype=float)
    n = spec.n_channels
    if n < 2:
        raise InvalidInputError(f"need at least 2 channels, got n={n}")
    if x.shape != (n,):
        raise InvalidInputError(f"x must have shape ({n},), got {x.shape}")
    if grid_points < 8:
        raise InvalidInputError(f"grid_points must be >= 8, got {grid_points!r}")

    tau2_hi = 10.0 * (1.0 - spec.rho) * (
        2.0 * np.log(n) + np.log(np.log(n)) + 20.0
    )

    def objective(u: float) -> float:
        return marginal_likelihood(np.expm1(u), x, spec)

    u_grid = np.linspace(0.0, np.log1p(tau2_hi), grid_points)
    values = np.array([objective(u) for u in u_grid])
    best = int(np.argmax(values))
    if best == 0 and values[0] >= values[1]:
        # Objective already decreasing at the origin: boundary solution.
        warnings.warn(
            "marginal likelihood is maximised at tau2 = 0 (no signal "
            "variance supported by the data)",
            BoundaryFitWarning,
            stacklevel=2,
        )
        return 0.0

    lo = u_grid[max(best - 1, 0)]
    hi = u_grid[min(best + 1, grid_points - 1)]
    # Golden-section refinement on [lo, hi].
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    u1 = hi - invphi * (hi - lo)
    u2 = lo + invphi * (hi - lo)
    f1, f2 = objective(u1), objective(u2)
    while hi - lo > tol:
        if f1 < f2:
            lo, u1, f1 = u1, u2, f2
            u2 = lo + invphi * (hi - lo)
            f2 = objective(u2)
        else:
            hi, u2, f2 = u2, u1, f1
            u1 = hi - invphi * (hi - lo)
            f1 = objective(u1)
    u_hat = 0.5 * (lo + hi)
    tau2_hat = float(np.expm1(u_hat))
    # A maximiser indistinguishable from the origin is a boundary solution.
    if objective(u_hat) <= 0.0:
        warnings.warn(
            "marginal likelihood is maximised at tau2 = 0 (no signal "
            "variance supported by the data)",
            BoundaryFitWarning,
            stacklevel=2,
        )
        return 0.0
    return min(tau2_hat, tau2_hi)


def k_of_c(c: float, variant: Literal["primary", "alternate"] = "primary") -> float:
    """Normalised scale of the fitted variance on boundary data.

    On data whose top decorrelated amplitude satisfies
    ``z_1^2 = 2 log n + log log n + c``, the type II fit converges to
    ``(1 - rho) * k(c) * log n`` with

        primary:    k(c) = ( 1/2 + exp(-c/2)/sqrt(pi) )^{-1}
        alternate:  k(c) = ( 1 + 2 exp(-c/2)/sqrt(pi) )^{-1}

    The two expressions differ by a factor of 2 on the leading ``1/2``;
    the primary form is the one consistent with the stationarity condition
    of the limiting fit objective (d/dv of ``v e^{c/2 - v^2} + 2 Phi(sqrt 2 v)``
    vanishing at ``v^2 = 1/2 + e^{-c/2}/sqrt(pi)``) and is what the
    self-consistent solution :func:`solve_kstar` uses.  The alternate form
    is retained purely as a diagnostic.
    """
    if not np.isfinite(c):
        raise InvalidInputError(f"c must be finite, got {c!r}")
    if variant == "primary":
        return float(1.0 / (0.5 + np.exp(-0.5 * c) / np.sqrt(np.pi)))
    if variant == "alternate":
        return float(1.0 / (1.0 + 2.0 * np.exp(-0.5 * c) / np.sqrt(np.pi)))
    raise InvalidInputError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class KStarSolution:
    """Self-consistent boundary solution for the type II rule.

    ``k_star`` is the normalised fitted-variance scale, ``c_star`` the
    matching boundary offset (``k_star = k(c_star)``), and ``residual`` the
    absolute value of the fixed-point equation at the returned root.
    """

    k_star: float
    c_star: float
    residual: float
    p: float
    r: float


def solve_kstar(p: float, r: float) -> KStarSolution:
    """Solve the self-consistency equation of the type II boundary.

    ``k* in (0, 2)`` is the root of

        -2 log( sqrt(pi) (1/k - 1/2) )
            = log k + 2 log( p / ((1-p)(1-r)) ) + 2/k,

    where the left side is the boundary offset ``c`` implied by a scale
    ``k`` (inverting ``k = k(c)``) and the right side the offset at which
    the threshold-``p`` rule accepts.  Bracketed on ``[1e-6, 2 - 1e-9]``;
    the residual of the returned root is checked against 1e-10.
    """
    _check_prob("p", p)
    _check_prob("r", r)
    tilt = _log_prior_odds(p, r)

    def f(k: float) -> float:
        return (
            -2.0 * np.log(np.sqrt(np.pi) * (1.0 / k - 0.5))
            - np.log(k)
            - 2.0 * tilt
            - 2.0 / k
        )

    lo, hi = 1e-6, 2.0 - 1e-9
    if f(lo) >= 0.0 or f(hi) <= 0.0:  # pragma: no cover - f spans -inf..+inf
        raise ConvergenceError(
            f"fixed-point equation not bracketed on [{lo}, {hi}] at p={p}, r={r}"
        )
    k_star = brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16)
    residual = abs(f(k_star))
    if residual > 1e-10:
        raise ConvergenceError(
            f"fixed-point residual {residual:.2e} exceeds 1e-10 at p={p}, r={r}"
        )
    c_star = -2.0 * np.log(np.sqrt(np.pi) * (1.0 / k_star - 0.5))
    return KStarSolution(
        k_star=float(k_star), c_star=float(c_star), residual=float(residual),
        p=p, r=r,
    )


def fpp_type2_asymptotic(p: float, r: float, n: int) -> float:
    """Asymptotic false-positive probability of the type II rule:
    ``(1/k* - 1/2) / log n``."""
    _check_n(n, minimum=3)
    sol = solve_kstar(p, r)
    return float((1.0 / sol.k_star - 0.5) / np.log(n))


def threshold_for_fpp(target: float, r: float, n: int) -> float:
    """Acceptance threshold ``p`` whose least-favourable false-positive
    probability equals ``target`` at channel count ``n``.

    Inverts :func:`fpp_adaptive_asymptotic` in ``p``.  On the admissible
    branch (where the least-favourable variance is positive) the map is
    strictly decreasing in ``p``, so the inverse is found by bracketed
    root-finding on the log-odds scale.  Raises when the target is outside
    the attainable range.
    """
    if not (np.isfinite(target) and target > 0.0):
        raise InvalidInputError(f"target must be positive, got {target!r}")
    _check_n(n, minimum=3)  # log log n + ... must be able to go positive
    _check_prob("r", r)

    base = 2.0 * np.log(n) + np.log(np.log(n)) + np.log(2.0) + 1.0 - 2.0 * np.log1p(-r)
    front = np.exp(-0.5) * np.sqrt(2.0 / np.pi) * (1.0 - r)

    def g(u: float) -> float:
        # u = log(p/(1-p)); fpp(u) = front * e^{-u} / (base + 2u)
        return front * np.exp(-u) / (base + 2.0 * u) - target

    # Admissible u range: base + 2u > 0 with some slack so tau2_n > 0.
    u_lo = -0.5 * base + 1e-6
    u_hi = 60.0
    if g(u_lo) < 0.0:
        raise InvalidInputError(
            f"target {target} exceeds the attainable false-positive range "
            f"at n={n}, r={r}"
        )
    if g(u_hi) > 0.0:
        raise InvalidInputError(
            f"target {target} is below the attainable false-positive range "
            f"at n={n}, r={r}"
        )
    u = brentq(g, u_lo, u_hi, xtol=1e-13, rtol=8.9e-16)
    p = float(1.0 / (1.0 + np.exp(-u)))
    _check_prob("p", p)
    return p
