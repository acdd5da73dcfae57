import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from equicorr.bayes import (
    Decision,
    channel_scores,
    decide,
    posterior,
    posterior_asymptotic,
    posterior_n2,
)
from equicorr.errors import InvalidInputError
from equicorr.model import (
    ModelSpec,
    PriorSpec,
    TruthScenario,
    equicorrelated_cov,
    sample,
    substream,
)
from equicorr.oracle import dense_posterior

# One strategy for a full posterior problem: dimensions, correlation,
# prior, and a bounded observation vector drawn together.
posterior_cases = st.integers(min_value=2, max_value=30).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.floats(min_value=0.0, max_value=0.97),
        st.floats(min_value=0.0, max_value=30.0),
        st.floats(min_value=0.02, max_value=0.98),
        st.lists(
            st.floats(min_value=-50.0, max_value=50.0),
            min_size=n,
            max_size=n,
        ),
    )
)


class TestPosteriorBasics:
    @given(case=posterior_cases)
    @settings(max_examples=150, deadline=None)
    def test_normalised_probability_vector(self, case):
        n, rho, tau2, r, xs = case
        post = posterior(
            np.array(xs),
            ModelSpec(n_channels=n, rho=rho),
            PriorSpec(tau2=tau2, r=r),
        )
        assert post.probs.shape == (n + 1,)
        assert np.all(post.probs >= 0.0)
        assert abs(post.probs.sum() - 1.0) < 1e-12

    @given(
        rho=st.floats(min_value=0.0, max_value=0.9),
        r=st.floats(min_value=0.05, max_value=0.95),
    )
    @settings(max_examples=30)
    def test_zero_slab_variance_returns_prior(self, rho, r):
        """tau2 = 0 makes every model identical: posterior == prior."""
        x = np.array([1.0, -2.0, 0.5, 3.0])
        post = posterior(
            x, ModelSpec(n_channels=4, rho=rho), PriorSpec(tau2=0.0, r=r)
        )
        expected = np.full(5, (1 - r) / 4)
        expected[0] = r
        assert_allclose(post.probs, expected, atol=1e-15)

    def test_needs_two_channels(self):
        with pytest.raises(InvalidInputError):
            posterior(
                np.array([1.0]),
                ModelSpec(n_channels=1, rho=0.0),
                PriorSpec(tau2=1.0, r=0.5),
            )

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            posterior(
                np.zeros(3),
                ModelSpec(n_channels=4, rho=0.0),
                PriorSpec(tau2=1.0, r=0.5),
            )


class TestAgainstOracle:
    def test_matches_dense_posterior(self, rng):
        for _ in range(60):
            n = int(rng.integers(2, 13))
            spec = ModelSpec(n_channels=n, rho=float(rng.uniform(0, 0.95)))
            prior = PriorSpec(
                tau2=float(rng.uniform(0.01, 25.0)),
                r=float(rng.uniform(0.05, 0.95)),
            )
            x = sample(TruthScenario(), spec, rng)
            assert_allclose(
                posterior(x, spec, prior).probs,
                dense_posterior(x, spec, prior),
                atol=1e-10,
            )

    def test_matches_two_channel_closed_form(self, rng):
        for _ in range(60):
            rho = float(rng.uniform(0, 0.99))
            prior = PriorSpec(
                tau2=float(rng.uniform(0.01, 10.0)),
                r=float(rng.uniform(0.05, 0.95)),
            )
            x = rng.normal(size=2) * 3.0
            spec = ModelSpec(n_channels=2, rho=rho)
            assert_allclose(
                posterior_n2(x, rho, prior).probs,
                posterior(x, spec, prior).probs,
                atol=1e-12,
            )


class TestChannelScores:
    @given(
        n=st.integers(min_value=2, max_value=15),
        rho=st.floats(min_value=0.0, max_value=0.95),
    )
    @settings(max_examples=40, deadline=None)
    def test_scores_solve_the_precision_system(self, n, rho):
        """xi = Sigma0^{-1} x, checked against a dense solve."""
        spec = ModelSpec(n_channels=n, rho=rho)
        x = np.linspace(-2.0, 3.0, n)
        assert_allclose(
            channel_scores(x, spec),
            np.linalg.solve(equicorrelated_cov(spec), x),
            atol=1e-9,
        )

    def test_growing_score_wins_the_posterior(self):
        """Scaling up one channel's score moves posterior mass onto it."""
        spec = ModelSpec(n_channels=5, rho=0.4)
        prior = PriorSpec(tau2=4.0, r=0.5)
        cov = equicorrelated_cov(spec)
        xi = np.array([0.5, -0.3, 0.8, 0.1, -0.6])
        last = 0.0
        for scale in (1.0, 2.0, 4.0, 8.0):
            boosted = xi.copy()
            boosted[2] *= scale
            x = cov @ boosted  # invert xi = Sigma0^{-1} x
            p2 = posterior(x, spec, prior).probs[3]
            assert p2 > last
            last = p2
        assert last > 0.99


class TestAsymptoticPosterior:
    def test_channel_probs_bounded(self, rng):
        spec = ModelSpec(n_channels=100, rho=0.5)
        prior = PriorSpec(tau2=2.0, r=0.5)
        for _ in range(20):
            x = sample(TruthScenario(), spec, rng)
            probs = posterior_asymptotic(x, spec, prior).probs
            assert np.all(probs[1:] >= 0.0)
            assert np.all(probs[1:] <= 1.0)

    def test_no_overflow_at_huge_amplitudes(self):
        spec = ModelSpec(n_channels=10, rho=0.0)
        prior = PriorSpec(tau2=1.0, r=0.5)
        x = np.zeros(10)
        x[4] = 300.0
        probs = posterior_asymptotic(x, spec, prior).probs
        assert np.isfinite(probs).all()
        assert probs[5] > 0.999

    def test_approaches_exact_posterior_as_n_grows(self):
        prior = PriorSpec(tau2=1.0, r=0.5)
        for rho in (0.0, 0.5):
            worst = {}
            for n in (2_000, 10_000, 100_000):
                spec = ModelSpec(n_channels=n, rho=rho)
                worst[n] = max(
                    np.max(
                        np.abs(
                            posterior_asymptotic(x, spec, prior).probs
                            - posterior(x, spec, prior).probs
                        )
                    )
                    for x in (
                        sample(TruthScenario(), spec, substream(31, rep))
                        for rep in range(20)
                    )
                )
            assert worst[10_000] < worst[2_000]
            assert worst[100_000] < worst[10_000]
            assert worst[100_000] < 0.02


class TestDecide:
    def test_threshold_semantics(self):
        probs = np.array([0.2, 0.7, 0.1])
        assert decide(probs, 0.5).accepted == 1
        assert decide(probs, 0.7).accepted == 1
        assert decide(probs, 0.71).accepted is None
        null_heavy = np.array([0.9, 0.05, 0.05])
        assert decide(null_heavy, 0.5).accepted == 0
        assert not decide(null_heavy, 0.5).is_signal_claim
        assert decide(probs, 0.5).is_signal_claim

    def test_accepts_posterior_vector(self):
        spec = ModelSpec(n_channels=3, rho=0.0)
        prior = PriorSpec(tau2=9.0, r=0.5)
        x = np.array([8.0, 0.1, -0.2])
        dec = decide(posterior(x, spec, prior), 0.5)
        assert dec.accepted == 1
        assert isinstance(dec, Decision)

    def test_threshold_validation(self):
        with pytest.raises(InvalidInputError):
            decide(np.array([0.5, 0.5]), 0.0)
        with pytest.raises(InvalidInputError):
            decide(np.array([0.5, 0.5]), 1.0)
