"""Core model: one candidate signal among ``n`` equicorrelated Gaussian channels.

The observation is a vector ``x = (x_1, ..., x_n)`` distributed as
``N(theta, Sigma0)`` where the noise covariance is the equicorrelation
matrix

    Sigma0 = (1 - rho) * I + rho * 1 1',      0 <= rho < 1,

and the mean vector ``theta`` is either identically zero (the global null)
or carries a single nonzero entry ``theta_j`` on one channel ``j`` (exactly
one signal).  Everything else in the package -- the max-amplitude test, the
likelihood-ratio test, the Bayesian posterior over "which channel, if any"
-- is built on top of this module.

Useful exact facts implemented here:

* **Sampling decomposition.**  With ``Z, Z_1, ..., Z_n`` iid standard
  normal,

      x_i = theta_i + sqrt(rho) * Z + sqrt(1 - rho) * Z_i

  has exactly the ``N(theta, Sigma0)`` law.  Sampling is therefore O(n)
  per draw with no matrix factorisation; ``Z`` is a common shock shared by
  every channel and ``Z_i`` is the idiosyncratic part.

* **Precision coefficients.**  ``Sigma0^{-1}`` has constant diagonal ``a``
  and constant off-diagonal ``b`` with

      a = (1 + (n - 2) rho) / ((1 + (n - 1) rho)(1 - rho))
      b = -rho / ((1 + (n - 1) rho)(1 - rho))

  and the two handy contractions ``a - b = 1/(1 - rho)`` and
  ``a + (n - 1) b = 1/(1 + (n - 1) rho)``.

* **Decorrelation ("z") transform.**  ``z_i = (x_i - xbar) / sqrt(1 - rho)``
  removes the common shock exactly: under the null, ``z_i = Z_i - Zbar``
  whatever the value of ``Z``, so each ``z_i`` is ``N(0, 1 - 1/n)``.

Randomness is addressed through :func:`substream`, which gives every
(seed, index) pair its own counter-based generator so that simulation
results do not depend on how work is scheduled across processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "ModelSpec",
    "PriorSpec",
    "TruthScenario",
    "SigmaCoeffs",
    "sigma_coeffs",
    "equicorrelated_cov",
    "sample",
    "z_transform",
    "substream",
]


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidInputError(message)


@dataclass(frozen=True)
class ModelSpec:
    """Dimensions of the noise model: channel count and equicorrelation.

    Parameters
    ----------
    n_channels:
        Number of channels ``n >= 1``.
    rho:
        Common correlation between distinct channels, ``0 <= rho < 1``.
        ``rho = 1`` is excluded: the covariance is singular there and the
        relevant behaviour is exposed through explicit limit formulas
        (see :mod:`equicorr.asymptotics`) rather than through sampling.
    """

    n_channels: int
    rho: float

    def __post_init__(self) -> None:
        _require(
            isinstance(self.n_channels, (int, np.integer)) and self.n_channels >= 1,
            f"n_channels must be an integer >= 1, got {self.n_channels!r}",
        )
        _require(
            np.isfinite(self.rho) and 0.0 <= self.rho < 1.0,
            f"rho must lie in [0, 1), got {self.rho!r}",
        )


@dataclass(frozen=True)
class PriorSpec:
    """Prior for the Bayesian channel-selection posterior.

    The null model (no signal anywhere) gets mass ``r``; the remaining
    ``1 - r`` is split evenly over the ``n`` single-signal models.  Under
    a single-signal model the signal amplitude has a ``N(0, tau2)`` prior.
    """

    tau2: float
    r: float

    def __post_init__(self) -> None:
        _require(
            np.isfinite(self.tau2) and self.tau2 >= 0.0,
            f"tau2 must be finite and >= 0, got {self.tau2!r}",
        )
        _require(
            np.isfinite(self.r) and 0.0 < self.r < 1.0,
            f"r must lie in (0, 1), got {self.r!r}",
        )


@dataclass(frozen=True)
class TruthScenario:
    """Data-generating truth: either the global null or one active channel.

    ``model_index`` follows the same indexing as posterior vectors and
    decisions: 0 is the global null, ``j >= 1`` puts the signal on channel
    ``j`` (data coordinate ``j - 1``).  ``theta`` is the signal amplitude
    and is ignored under the null.
    """

    model_index: int = 0
    theta: float = 0.0

    def __post_init__(self) -> None:
        _require(
            isinstance(self.model_index, (int, np.integer)) and self.model_index >= 0,
            f"model_index must be an integer >= 0, got {self.model_index!r}",
        )
        _require(np.isfinite(self.theta), f"theta must be finite, got {self.theta!r}")

    @property
    def is_null(self) -> bool:
        return self.model_index == 0


@dataclass(frozen=True)
class SigmaCoeffs:
    """Diagonal and off-diagonal entries of the noise precision matrix."""

    diag: float
    off: float


def sigma_coeffs(spec: ModelSpec) -> SigmaCoeffs:
    """Entries of ``Sigma0^{-1}`` for the equicorrelation model.

    Returns the pair ``(a, b)`` such that ``Sigma0^{-1} = (a - b) I + b 1 1'``.
    For ``n = 1`` this degenerates to ``a = 1`` (and ``b`` is vacuous but
    returned as 0 for convenience).
    """
    n, rho = spec.n_channels, spec.rho
    if n == 1:
        return SigmaCoeffs(diag=1.0, off=0.0)
    denom = (1.0 + (n - 1) * rho) * (1.0 - rho)
    a = (1.0 + (n - 2) * rho) / denom
    b = -rho / denom
    return SigmaCoeffs(diag=a, off=b)


def equicorrelated_cov(spec: ModelSpec) -> np.ndarray:
    """Dense ``n x n`` noise covariance ``(1 - rho) I + rho 1 1'``."""
    n, rho = spec.n_channels, spec.rho
    cov = np.full((n, n), rho)
    np.fill_diagonal(cov, 1.0)
    return cov


def sample(
    truth: TruthScenario, spec: ModelSpec, rng: np.random.Generator
) -> np.ndarray:
    """Draw one observation vector from ``N(theta, Sigma0)``.

    Uses the common-shock decomposition, consuming exactly ``n + 1``
    standard-normal variates from ``rng`` in a fixed order (the shared
    shock first, then the n idiosyncratic terms), so a given generator
    state always yields the same vector.
    """
    n, rho = spec.n_channels, spec.rho
    _require(
        truth.model_index <= n,
        f"model_index {truth.model_index} out of range for n_channels={n}",
    )
    common = rng.standard_normal()
    idio = rng.standard_normal(n)
    x = np.sqrt(rho) * common + np.sqrt(1.0 - rho) * idio
    if truth.model_index >= 1:
        x[truth.model_index - 1] += truth.theta
    return x


def z_transform(x: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Centre and rescale: ``z_i = (x_i - xbar) / sqrt(1 - rho)``.

    Under the null this cancels the common shock exactly, leaving
    ``z_i = Z_i - Zbar`` with marginal law ``N(0, 1 - 1/n)``; the transform
    is what makes large-``n`` behaviour effectively independent across
    channels even for strongly correlated noise.
    """
    x = np.asarray(x, dtype=float)
    _require(x.shape == (spec.n_channels,), "x must be a length-n vector")
    return (x - x.mean()) / np.sqrt(1.0 - spec.rho)


# Streams are addressed by packing the index into the second 64-bit word of
# a Philox key (the seed fills the first).  Philox is counter-based, so two
# distinct keys give statistically independent streams and the draw sequence
# depends only on (seed, index) -- never on which worker ran the replicate.
_MAX_UINT64 = 2**64 - 1


def substream(master_seed: int, index: int = 0) -> np.random.Generator:
    """Independent random stream addressed by ``(master_seed, index)``.

    Both arguments must fit in 64 bits.  Identical addresses reproduce
    identical draws on every run, process count, and platform; distinct
    addresses give independent streams.  Simulation code derives one stream
    per replicate from the experiment's master seed.
    """
    _require(
        isinstance(master_seed, (int, np.integer)) and 0 <= master_seed <= _MAX_UINT64,
        f"master_seed must be a 64-bit unsigned integer, got {master_seed!r}",
    )
    _require(
        isinstance(index, (int, np.integer)) and 0 <= index <= _MAX_UINT64,
        f"index must be a 64-bit unsigned integer, got {index!r}",
    )
    key = np.array([master_seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
