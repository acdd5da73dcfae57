import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import ks_2samp

from equicorr.adaptive import marginal_likelihood
from equicorr.bayes import posterior
from equicorr.errors import InvalidInputError
from equicorr.frequentist import lr_from_statistic, lrt_statistic
from equicorr.model import (
    ModelSpec,
    PriorSpec,
    TruthScenario,
    equicorrelated_cov,
    sample,
    sigma_coeffs,
    substream,
)
from equicorr.oracle import (
    MAX_DENSE_CHANNELS,
    MAX_DENSE_SAMPLE_CHANNELS,
    dense_lr,
    dense_model_cov,
    dense_posterior,
    dense_sample,
    posterior_zform,
    zform_marginal_likelihood,
)


def _random_case(rng, n_max=12):
    n = int(rng.integers(2, n_max + 1))
    rho = float(rng.uniform(0.0, 0.95))
    tau2 = float(rng.uniform(0.01, 25.0))
    r = float(rng.uniform(0.05, 0.95))
    spec = ModelSpec(n_channels=n, rho=rho)
    prior = PriorSpec(tau2=tau2, r=r)
    j = int(rng.integers(0, n + 1))
    theta = float(rng.normal(0.0, np.sqrt(tau2))) if j else 0.0
    x = sample(TruthScenario(model_index=j, theta=theta), spec, rng)
    return x, spec, prior


class TestDenseCovariance:
    def test_woodbury_identity(self):
        """Dense inverse agrees with the two-coefficient closed form."""
        for n in (2, 5, 20, 50):
            for rho in (0.0, 0.3, 0.7, 0.95):
                spec = ModelSpec(n_channels=n, rho=rho)
                co = sigma_coeffs(spec)
                inv = np.linalg.inv(equicorrelated_cov(spec))
                expected = co.off * np.ones((n, n)) + (co.diag - co.off) * np.eye(n)
                assert np.max(np.abs(inv - expected)) < 1e-9

    def test_model_cov_adds_slab_on_signal_channel(self):
        spec = ModelSpec(n_channels=3, rho=0.2)
        prior = PriorSpec(tau2=4.0, r=0.5)
        base = equicorrelated_cov(spec)
        assert_allclose(dense_model_cov(spec, prior, None), base)
        cov = dense_model_cov(spec, prior, 1)
        assert_allclose(cov - base, 4.0 * np.outer([0, 1, 0], [0, 1, 0]))
        with pytest.raises(InvalidInputError):
            dense_model_cov(spec, prior, 3)

    def test_dense_caps(self):
        big = ModelSpec(n_channels=MAX_DENSE_CHANNELS + 1, rho=0.1)
        with pytest.raises(InvalidInputError):
            dense_posterior(np.zeros(big.n_channels), big, PriorSpec(1.0, 0.5))
        too_big = ModelSpec(n_channels=MAX_DENSE_SAMPLE_CHANNELS + 1, rho=0.1)
        with pytest.raises(InvalidInputError):
            dense_sample(TruthScenario(), too_big, substream(0))


class TestDenseSample:
    def test_ks_against_fast_sampler(self):
        """Cholesky route and O(n) shock route draw from the same law."""
        spec = ModelSpec(n_channels=8, rho=0.6)
        null = TruthScenario()
        a = np.array([dense_sample(null, spec, substream(1, i)) for i in range(4000)])
        b = np.array([sample(null, spec, substream(2, i)) for i in range(4000)])
        # Marginal of one channel and law of the maximum: both must agree.
        assert ks_2samp(a[:, 0], b[:, 0]).pvalue > 0.01
        assert ks_2samp(a.max(axis=1), b.max(axis=1)).pvalue > 0.01


class TestPosteriorRoutes:
    def test_zform_matches_fast_posterior(self, rng):
        worst = 0.0
        for _ in range(200):
            x, spec, prior = _random_case(rng)
            gap = np.max(
                np.abs(posterior_zform(x, spec, prior) - posterior(x, spec, prior).probs)
            )
            worst = max(worst, gap)
        assert worst < 1e-12

    def test_dense_matches_fast_posterior_smoke(self, rng):
        for _ in range(50):
            x, spec, prior = _random_case(rng)
            assert_allclose(
                dense_posterior(x, spec, prior),
                posterior(x, spec, prior).probs,
                atol=1e-10,
            )


class TestDenseLr:
    def test_matches_closed_form_lr(self, rng):
        for _ in range(100):
            x, spec, _ = _random_case(rng)
            lr_dense, idx = dense_lr(x, spec)
            t = lrt_statistic(x, spec)
            assert_allclose(lr_dense, lr_from_statistic(t, spec), rtol=1e-9)
            assert 1 <= idx <= spec.n_channels


class TestZformMarginalLikelihood:
    def test_gap_shrinks_with_n(self):
        """The z-form drops the shock term; the log-likelihood gap to the
        exact objective must shrink as n grows (both under the null)."""
        gaps = {}
        for n in (100, 1_000, 10_000):
            worst = 0.0
            for rho in (0.0, 0.5):
                spec = ModelSpec(n_channels=n, rho=rho)
                for rep in range(20):
                    x = sample(TruthScenario(), spec, substream(12000 + rep, n))
                    for tau2 in (0.5, 2.0, 2.0 * np.log(n)):
                        gap = abs(
                            zform_marginal_likelihood(tau2, x, spec)
                            - marginal_likelihood(tau2, x, spec)
                        )
                        worst = max(worst, gap)
            gaps[n] = worst
        assert gaps[1_000] < gaps[100]
        assert gaps[10_000] < gaps[1_000]
        assert gaps[10_000] < 0.05
