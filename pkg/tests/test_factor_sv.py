"""Common-factor and stochastic-volatility conditionals."""

import numpy as np
import pytest
from scipy import stats

from qpanel.errors import DomainError
from qpanel.factor_sv import (
    SVParams,
    SVPriors,
    _ffbs,
    propagate_log_variance,
    sample_factor,
    sample_loadings,
    sample_volatility,
)


class TestFactorDraw:
    def test_matches_closed_form_posterior(self):
        rng = np.random.default_rng(0)
        n, t = 4, 3
        lam = np.array([0.8, -0.5, 1.2, 0.3])
        psi = rng.uniform(0.5, 2.0, (n, t))
        ybar = rng.standard_normal((n, t))
        h = np.array([-0.5, 0.0, 0.4])
        prec = (lam[:, None] ** 2 / psi).sum(axis=0) + np.exp(-h)
        mean = (lam[:, None] * ybar / psi).sum(axis=0) / prec
        draws = np.array([sample_factor(ybar, lam, psi, h, rng) for _ in range(20000)])
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.02)
        np.testing.assert_allclose(draws.var(axis=0), 1.0 / prec, rtol=0.05)

    def test_rejects_nonpositive_variances(self):
        rng = np.random.default_rng(0)
        with pytest.raises(DomainError):
            sample_factor(np.ones((2, 3)), np.ones(2), np.zeros((2, 3)), np.zeros(3), rng)

    def test_zero_loadings_give_prior(self):
        rng = np.random.default_rng(1)
        h = np.array([0.3, -0.2])
        draws = np.array(
            [
                sample_factor(np.ones((2, 2)), np.zeros(2), np.ones((2, 2)), h, rng)
                for _ in range(20000)
            ]
        )
        np.testing.assert_allclose(draws.mean(axis=0), 0.0, atol=0.02)
        np.testing.assert_allclose(draws.var(axis=0), np.exp(h), rtol=0.05)


class TestLoadingDraw:
    def test_matches_closed_form_posterior(self):
        rng = np.random.default_rng(2)
        fhat = rng.standard_normal(40)
        yhat = 0.7 * fhat + 0.3 * rng.standard_normal(40)
        lbar = 1.0 / (fhat @ fhat + 1.0)
        mean = lbar * (fhat @ yhat)
        draws = np.array([sample_loadings(yhat, fhat, rng) for _ in range(20000)])
        assert draws.mean() == pytest.approx(mean, abs=0.01)
        assert draws.var() == pytest.approx(lbar, rel=0.05)


class TestFfbs:
    def test_matches_joint_gaussian_posterior(self):
        # brute-force oracle: AR(1) prior precision is tridiagonal; combine
        # with the diagonal observation precision and compare moments
        rng = np.random.default_rng(3)
        t = 5
        params = SVParams(mu=0.4, rho=0.7, sigma=0.5)
        obs = np.array([1.0, -0.3, 0.2, 0.8, -1.1])
        obs_var = np.array([0.6, 1.2, 0.5, 0.9, 0.7])
        s2 = params.sigma**2
        prior_prec = np.zeros((t, t))
        prior_prec[0, 0] = (1.0 - params.rho**2) / s2
        for i in range(1, t):
            prior_prec[i, i] += 1.0 / s2
            prior_prec[i - 1, i - 1] += params.rho**2 / s2
            prior_prec[i - 1, i] -= params.rho / s2
            prior_prec[i, i - 1] -= params.rho / s2
        prec = prior_prec + np.diag(1.0 / obs_var)
        lin = prior_prec @ np.full(t, params.mu) + obs / obs_var
        cov = np.linalg.inv(prec)
        mean = cov @ lin
        draws = np.array([_ffbs(obs, obs_var, params, rng) for _ in range(30000)])
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.02)
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)


class TestVolatilityBlock:
    def test_recovers_volatility_level(self):
        # long series with known parameters: posterior h should track truth
        rng = np.random.default_rng(4)
        t = 600
        true = SVParams(mu=-1.0, rho=0.9, sigma=0.3)
        h = np.empty(t)
        h[0] = true.mu + true.sigma / np.sqrt(1 - true.rho**2) * rng.standard_normal()
        for i in range(1, t):
            h[i] = true.mu + true.rho * (h[i - 1] - true.mu) + true.sigma * rng.standard_normal()
        f = np.exp(0.5 * h) * rng.standard_normal(t)
        cur_h = np.zeros(t)
        params = SVParams(mu=0.0, rho=0.9, sigma=0.2)
        keep_mu, keep_h = [], []
        for s in range(600):
            cur_h, params = sample_volatility(f, cur_h, params, rng)
            if s >= 300:
                keep_mu.append(params.mu)
                keep_h.append(cur_h.copy())
        assert np.mean(keep_mu) == pytest.approx(true.mu, abs=0.4)
        corr = np.corrcoef(np.mean(keep_h, axis=0), h)[0, 1]
        assert corr > 0.5

    def test_stationarity_preserved(self):
        rng = np.random.default_rng(5)
        f = rng.standard_normal(100)
        params = SVParams()
        h = np.zeros(100)
        for _ in range(200):
            h, params = sample_volatility(f, h, params, rng)
            assert abs(params.rho) < 1.0
            assert params.sigma > 0.0
            assert np.all(np.isfinite(h))

    def test_priors_dataclass_defaults(self):
        pri = SVPriors()
        assert pri.mu_var == 10.0
        assert (pri.rho_a, pri.rho_b) == (5.0, 1.5)


class TestPropagation:
    def test_one_step_moments(self):
        rng = np.random.default_rng(6)
        params = SVParams(mu=-0.5, rho=0.8, sigma=0.4)
        draws = np.array(
            [propagate_log_variance(params, 1.0, rng) for _ in range(20000)]
        )
        assert draws.mean() == pytest.approx(-0.5 + 0.8 * 1.5, abs=0.02)
        assert draws.std() == pytest.approx(0.4, rel=0.05)
