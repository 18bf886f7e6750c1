"""Cross-country factor block: latent factor, loadings, and stochastic volatility.

Per quantile the panel shares one conditionally heteroskedastic factor
f_t ~ N(0, exp(h_t)) whose log-variance follows a stationary AR(1).  The
volatility path is sampled with the standard 10-component auxiliary-mixture
approximation to log chi^2_1 and a forward-filter backward-sampler, and the
level/scale parameters are re-drawn in the non-centered parameterization
(ancillarity-sufficiency interweaving) where they are conjugate.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as beta_dist

from .errors import DomainError

__all__ = [
    "SVParams",
    "SVPriors",
    "sample_factor",
    "sample_loadings",
    "sample_volatility",
    "propagate_log_variance",
]

# Omori, Chib, Shephard, Nakajima (2007) mixture for log chi^2_1
_MIX_PROB = np.array(
    [0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115]
)
_MIX_MEAN = np.array(
    [1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65000]
)
_MIX_VAR = np.array(
    [0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342]
)

LOG_VARIANCE_OFFSET = 1e-10


@dataclass
class SVParams:
    """AR(1) log-volatility parameters: level, persistence, innovation sd."""

    mu: float = 0.0
    rho: float = 0.9
    sigma: float = 0.2


@dataclass(frozen=True)
class SVPriors:
    """Priors: mu ~ N(0, mu_var), (rho+1)/2 ~ Beta(a, b), sigma ~ N(0, sigma_var) folded."""

    mu_var: float = 10.0
    rho_a: float = 5.0
    rho_b: float = 1.5
    sigma_var: float = 1.0


def sample_factor(ybar, loadings, psi, h, rng):
    """Draw the factor path, independently over time.

    Parameters
    ----------
    ybar : ndarray (N, T)
        Residuals with every component except the factor term removed.
    loadings : ndarray (N,)
    psi : ndarray (N, T)
        Per-observation mixture variances tau^2 * sigma_i * nu_it.
    h : ndarray (T,)
        Current log-variances of the factor.
    """
    psi = np.asarray(psi, dtype=float)
    if np.any(psi <= 0.0):
        raise DomainError("observation variances must be strictly positive")
    lam = np.asarray(loadings, dtype=float)[:, None]
    prec = (lam**2 / psi).sum(axis=0) + np.exp(-np.asarray(h, dtype=float))
    mean = (lam * np.asarray(ybar, dtype=float) / psi).sum(axis=0) / prec
    return mean + rng.standard_normal(mean.shape) / np.sqrt(prec)


def sample_loadings(yhat, fhat, rng):
    """Draw one country's loading given scaled residuals and scaled factor.

    Posterior N(lbar * fhat'yhat, lbar) with lbar = (fhat'fhat + 1)^-1 under
    the unit-variance Gaussian prior.
    """
    fhat = np.asarray(fhat, dtype=float)
    lbar = 1.0 / (fhat @ fhat + 1.0)
    mean = lbar * (fhat @ np.asarray(yhat, dtype=float))
    return mean + np.sqrt(lbar) * rng.standard_normal()


def _sample_indicators(ystar, h, rng):
    resid = ystar[:, None] - h[:, None] - _MIX_MEAN[None, :]
    logp = (
        np.log(_MIX_PROB)[None, :]
        - 0.5 * np.log(_MIX_VAR)[None, :]
        - 0.5 * resid**2 / _MIX_VAR[None, :]
    )
    logp -= logp.max(axis=1, keepdims=True)
    prob = np.exp(logp)
    prob /= prob.sum(axis=1, keepdims=True)
    u = rng.random(ystar.shape[0])
    return (prob.cumsum(axis=1) < u[:, None]).sum(axis=1)

def _ffbs(obs, obs_var, params, rng):
    """Forward filter, backward sample the AR(1) state given Gaussian obs."""
    t_len = obs.shape[0]
    mu, rho, s2 = params.mu, params.rho, params.sigma**2
    filt_mean = np.empty(t_len)
    filt_var = np.empty(t_len)
    a = mu
    p = s2 / max(1.0 - rho**2, 1e-12)
    for t in range(t_len):
        if t > 0:
            a = mu + rho * (filt_mean[t - 1] - mu)
            p = rho**2 * filt_var[t - 1] + s2
        gain = p / (p + obs_var[t])
        filt_mean[t] = a + gain * (obs[t] - a)
        filt_var[t] = (1.0 - gain) * p
    h = np.empty(t_len)
    h[-1] = filt_mean[-1] + np.sqrt(filt_var[-1]) * rng.standard_normal()
    z = rng.standard_normal(t_len - 1)
    for t in range(t_len - 2, -1, -1):
        denom = rho**2 * filt_var[t] + s2
        gain = rho * filt_var[t] / denom
        mean = filt_mean[t] + gain * (h[t + 1] - (mu + rho * (filt_mean[t] - mu)))
        var = filt_var[t] - gain * rho * filt_var[t]
        h[t] = mean + np.sqrt(max(var, 0.0)) * z[t]
    return h


def _log_prior_c_rho(c, rho, priors):
    """Log prior density over the (intercept, slope) parameterization."""
    if abs(rho) >= 1.0:
        return -np.inf
    mu = c / (1.0 - rho)
    lp = -0.5 * mu**2 / priors.mu_var - 0.5 * np.log(2.0 * np.pi * priors.mu_var)
    lp += beta_dist.logpdf((rho + 1.0) / 2.0, priors.rho_a, priors.rho_b) - np.log(2.0)
    lp -= np.log(1.0 - rho)  # Jacobian of mu = c / (1 - rho)
    return lp


def _log_initial(h0, mu, rho, s2):
    var0 = s2 / (1.0 - rho**2)
    return -0.5 * np.log(2.0 * np.pi * var0) - 0.5 * (h0 - mu) ** 2 / var0


def _update_persistence(h, params, priors, rng):
    """MH draw of (mu, rho) via the conditional least-squares proposal."""
    s2 = params.sigma**2
    z = np.column_stack([np.ones(h.size - 1), h[:-1]])
    resp = h[1:]
    ztz = z.T @ z
    try:
        cov = s2 * np.linalg.inv(ztz)
        ols = np.linalg.solve(ztz, z.T @ resp)
    except np.linalg.LinAlgError:
        return params
    prop = rng.multivariate_normal(ols, cov, method="cholesky")
    c_new, rho_new = float(prop[0]), float(prop[1])
    if abs(rho_new) >= 1.0:
        return params
    c_old = params.mu * (1.0 - params.rho)
    log_acc = (
        _log_prior_c_rho(c_new, rho_new, priors)
        - _log_prior_c_rho(c_old, params.rho, priors)
        + _log_initial(h[0], c_new / (1.0 - rho_new), rho_new, s2)
        - _log_initial(h[0], params.mu, params.rho, s2)
    )
    if np.log(rng.random()) < log_acc:
        return SVParams(mu=c_new / (1.0 - rho_new), rho=rho_new, sigma=params.sigma)
    return params


def _update_innovation_var(h, params, rng):
    """Independence-MH draw of sigma^2; acceptance reduces to exp(-(new-old)/2)."""
    mu, rho = params.mu, params.rho
    sse = np.sum((h[1:] - mu - rho * (h[:-1] - mu)) ** 2)
    q = (1.0 - rho**2) * (h[0] - mu) ** 2 + sse
    s2_new = (q / 2.0) / rng.gamma((h.size - 1) / 2.0)
    if np.log(rng.random()) < -(s2_new - params.sigma**2) / 2.0:
        return SVParams(mu=mu, rho=rho, sigma=float(np.sqrt(s2_new)))
    return params


def _interweave(ystar, indicators, h, params, priors, rng):
    """Redraw (mu, sigma) where they are conjugate, then map h back."""
    h_nc = (h - params.mu) / params.sigma
    obs = ystar - _MIX_MEAN[indicators]
    w = 1.0 / _MIX_VAR[indicators]
    design = np.column_stack([np.ones_like(h_nc), h_nc])
    prec = (design * w[:, None]).T @ design + np.diag(
        [1.0 / priors.mu_var, 1.0 / priors.sigma_var]
    )
    lin = (design * w[:, None]).T @ obs
    cov = np.linalg.inv(prec)
    draw = rng.multivariate_normal(cov @ lin, cov, method="cholesky")
    mu_new, sig_new = float(draw[0]), float(draw[1])
    if sig_new < 0.0:
        sig_new = -sig_new
        h_nc = -h_nc
    sig_new = max(sig_new, 1e-8)
    h_new = mu_new + sig_new * h_nc
    return h_new, SVParams(mu=mu_new, rho=params.rho, sigma=sig_new)


def sample_volatility(f, h, params, rng, priors=SVPriors(), offset=LOG_VARIANCE_OFFSET):
    """Update the log-volatility path and its AR(1) parameters.

    Returns the new path and parameters.  The factor observations enter as
    log(f^2 + offset) with a small offset guarding exact zeros.
    """
    f = np.asarray(f, dtype=float)
    ystar = np.log(f**2 + offset)
    indicators = _sample_indicators(ystar, np.asarray(h, dtype=float), rng)
    obs = ystar - _MIX_MEAN[indicators]
    h_new = _ffbs(obs, _MIX_VAR[indicators], params, rng)
    params = _update_persistence(h_new, params, priors, rng)
    params = _update_innovation_var(h_new, params, rng)
    h_new, params = _interweave(ystar, indicators, h_new, params, priors, rng)
    return h_new, params


def propagate_log_variance(params, h_last, rng):
    """One-step-ahead draw of the log-variance from its AR(1) law."""
    return params.mu + params.rho * (h_last - params.mu) + params.sigma * rng.standard_normal()
