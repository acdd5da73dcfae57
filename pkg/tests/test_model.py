import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from equicorr.errors import InvalidInputError
from equicorr.model import (
    ModelSpec,
    PriorSpec,
    TruthScenario,
    equicorrelated_cov,
    sample,
    sigma_coeffs,
    substream,
    z_transform,
)

ns = st.integers(min_value=2, max_value=60)
rhos = st.floats(min_value=0.0, max_value=0.97)


class TestSpecs:
    def test_model_spec_validation(self):
        with pytest.raises(InvalidInputError):
            ModelSpec(n_channels=0, rho=0.5)
        with pytest.raises(InvalidInputError):
            ModelSpec(n_channels=4, rho=1.0)
        with pytest.raises(InvalidInputError):
            ModelSpec(n_channels=4, rho=-0.1)

    def test_prior_spec_validation(self):
        with pytest.raises(InvalidInputError):
            PriorSpec(tau2=-1.0, r=0.5)
        with pytest.raises(InvalidInputError):
            PriorSpec(tau2=1.0, r=0.0)
        with pytest.raises(InvalidInputError):
            PriorSpec(tau2=1.0, r=1.0)

    def test_truth_scenario(self):
        assert TruthScenario().is_null
        assert not TruthScenario(model_index=2, theta=1.0).is_null
        with pytest.raises(InvalidInputError):
            TruthScenario(model_index=-1)


class TestSigmaCoeffs:
    @given(n=ns, rho=rhos)
    def test_precision_contractions(self, n, rho):
        """The two exact contractions of the equicorrelation precision."""
        co = sigma_coeffs(ModelSpec(n_channels=n, rho=rho))
        assert_allclose((co.diag - co.off) * (1.0 - rho), 1.0, rtol=1e-12)
        assert_allclose(
            (co.diag + (n - 1) * co.off) * (1.0 + (n - 1) * rho),
            1.0,
            rtol=1e-12,
        )

    @given(n=st.integers(min_value=2, max_value=25), rho=rhos)
    @settings(max_examples=40)
    def test_coeffs_invert_covariance(self, n, rho):
        spec = ModelSpec(n_channels=n, rho=rho)
        co = sigma_coeffs(spec)
        prec = co.off * np.ones((n, n)) + (co.diag - co.off) * np.eye(n)
        assert_allclose(prec @ equicorrelated_cov(spec), np.eye(n), atol=1e-9)

    def test_cov_structure(self):
        cov = equicorrelated_cov(ModelSpec(n_channels=3, rho=0.4))
        assert_allclose(cov, 0.6 * np.eye(3) + 0.4 * np.ones((3, 3)))


class TestSample:
    def test_reproducible_and_stream_separated(self):
        spec = ModelSpec(n_channels=7, rho=0.3)
        null = TruthScenario()
        a = sample(null, spec, substream(5, 1))
        b = sample(null, spec, substream(5, 1))
        c = sample(null, spec, substream(5, 2))
        assert_allclose(a, b)
        assert np.any(a != c)

    def test_signal_lands_on_declared_channel(self):
        spec = ModelSpec(n_channels=6, rho=0.5)
        truth = TruthScenario(model_index=4, theta=100.0)
        x = np.mean(
            [sample(truth, spec, substream(0, i)) for i in range(100)], axis=0
        )
        expected = np.zeros(6)
        expected[3] = 100.0
        assert_allclose(x, expected, atol=1.0)

    def test_covariance_moments(self):
        spec = ModelSpec(n_channels=6, rho=0.35)
        null = TruthScenario()
        draws = np.array(
            [sample(null, spec, substream(99, i)) for i in range(30_000)]
        )
        emp = np.cov(draws.T)
        assert np.max(np.abs(emp - equicorrelated_cov(spec))) < 0.04

    def test_signal_index_validation(self):
        spec = ModelSpec(n_channels=3, rho=0.0)
        with pytest.raises(InvalidInputError):
            sample(TruthScenario(model_index=4, theta=1.0), spec, substream(0))


class TestZTransform:
    @given(
        rho=st.floats(min_value=0.0, max_value=0.97),
        shift=st.floats(min_value=-100, max_value=100),
    )
    @settings(max_examples=50)
    def test_common_shift_invariance(self, rho, shift):
        """Adding any multiple of the all-ones vector cannot move z."""
        spec = ModelSpec(n_channels=5, rho=rho)
        x = np.array([0.3, -1.2, 2.0, 0.0, -0.4])
        assert_allclose(
            z_transform(x + shift, spec), z_transform(x, spec), atol=1e-9
        )

    def test_null_marginal_variance(self):
        # Var z_i = 1 - 1/n under the null, independent of rho.
        spec = ModelSpec(n_channels=4, rho=0.6)
        null = TruthScenario()
        zs = np.array(
            [z_transform(sample(null, spec, substream(7, i)), spec)
             for i in range(20_000)]
        )
        assert_allclose(zs.var(axis=0), 1 - 1 / 4, atol=0.03)


class TestSubstream:
    def test_key_pair_addressing(self):
        assert_allclose(
            substream(123, 45).standard_normal(4),
            substream(123, 45).standard_normal(4),
        )
        a = substream(123, 45).standard_normal(4)
        assert np.all(a != substream(123, 46).standard_normal(4))
        assert np.all(a != substream(124, 45).standard_normal(4))

    def test_default_index(self):
        assert_allclose(
            substream(9).standard_normal(3),
            substream(9, 0).standard_normal(3),
        )
