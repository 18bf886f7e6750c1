"""Asymmetric-Laplace machinery for Bayesian quantile regression.

The error term of every quantile equation follows an asymmetric Laplace
distribution (ALD) whose p-th quantile is pinned at zero.  Everything here
relies on the Gaussian scale-location mixture representation

    eps = theta * nu + tau * sqrt(sigma * nu) * e,
    nu = sigma * z,  z ~ Exp(1),  e ~ N(0, 1),

which turns the quantile likelihood into a conditionally Gaussian one.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError

__all__ = [
    "QuantileConstants",
    "quantile_constants",
    "check_loss",
    "ald_log_density",
    "ald_cdf",
    "ald_variance",
    "sample_ald",
    "sample_gig_half",
    "sample_nu",
    "sample_sigma",
    "sample_inverse_gamma",
]


@dataclass(frozen=True)
class QuantileConstants:
    """Mixture constants attached to one quantile level."""

    p: float
    theta: float
    tau2: float

    @property
    def tau(self):
        return np.sqrt(self.tau2)


def quantile_constants(p):
    """Return the mixture constants theta_p and tau_p^2 for quantile level p."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {p}")
    pq = p * (1.0 - p)
    return QuantileConstants(p=p, theta=(1.0 - 2.0 * p) / pq, tau2=2.0 / pq)


def check_loss(x, p):
    """Check (pinball) loss rho_p(x) = x * (p - 1{x < 0})."""
    x = np.asarray(x, dtype=float)
    return x * (p - (x < 0.0))


def ald_log_density(eps, p, sigma):
    """Log density of the ALD with p-th quantile at zero and scale sigma."""
    if sigma <= 0.0:
        raise DomainError("sigma must be positive")
    return np.log(p * (1.0 - p) / sigma) - check_loss(eps, p) / sigma


def ald_cdf(x, p, sigma):
    """CDF of the ALD; equals p at x = 0."""
    if sigma <= 0.0:
        raise DomainError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    lower = p * np.exp(np.minimum((1.0 - p) * x / sigma, 0.0))
    upper = 1.0 - (1.0 - p) * np.exp(np.minimum(-p * x / sigma, 0.0))
    return np.where(x < 0.0, lower, upper)


def ald_variance(p, sigma):
    """Variance of the ALD error, sigma^2 * (theta_p^2 + tau_p^2)."""
    if np.any(np.asarray(sigma) <= 0.0):
        raise DomainError("sigma must be positive")
    qc = quantile_constants(p)
    return np.asarray(sigma) ** 2 * (qc.theta**2 + qc.tau2)


def sample_ald(p, sigma, size, rng):
    """Draw ALD variates through the exponential-normal mixture."""
    qc = quantile_constants(p)
    nu = sigma * rng.exponential(1.0, size=size)
    return qc.theta * nu + qc.tau * np.sqrt(sigma * nu) * rng.standard_normal(size)


def sample_gig_half(chi, psi, rng):
    """Sample from GIG(1/2, chi, psi).

    Parameterization: density proportional to
    x^(lambda - 1) * exp(-(chi / x + psi * x) / 2) with lambda = 1/2.

    Uses the inverse-Gaussian reduction: if X ~ GIG(1/2, chi, psi) then
    1/X ~ GIG(-1/2, psi, chi), which is inverse Gaussian with mean
    sqrt(psi / chi) and shape psi.  The chi -> 0 boundary collapses to a
    Gamma(1/2, rate psi/2) draw.

    Parameters
    ----------
    chi : array_like, nonnegative
    psi : float or array_like, positive
    rng : numpy Generator
    """
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    psi = np.broadcast_to(np.asarray(psi, dtype=float), chi.shape)
    if np.any(psi <= 0.0):
        raise DomainError("psi must be positive")
    if np.any(chi < 0.0):
        raise DomainError("chi must be nonnegative")
    out = np.empty_like(chi)
    tiny = chi <= 1e-300
    if np.any(tiny):
        out[tiny] = rng.gamma(0.5, 2.0 / psi[tiny])
    if np.any(~tiny):
        c, s = chi[~tiny], psi[~tiny]
        inv = rng.wald(np.sqrt(s / c), s)
        out[~tiny] = 1.0 / np.maximum(inv, 1e-300)
    return out


def sample_nu(w, p, sigma, rng):
    """Draw the latent mixing values nu_t given residuals w_t.

    nu_t ~ GIG(1/2, w_t^2 / (tau^2 sigma), 2/sigma + theta^2 / (tau^2 sigma)).
    """
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise NumericalError("non-finite residual entering the mixing-value update")
    if sigma <= 0.0:
        raise DomainError("sigma must be positive")
    qc = quantile_constants(p)
    chi = w**2 / (qc.tau2 * sigma)
    psi = 2.0 / sigma + qc.theta**2 / (qc.tau2 * sigma)
    return sample_gig_half(chi, psi, rng)


def sample_inverse_gamma(shape, rate, rng):
    """Draw from an inverse-Gamma with the given shape and rate."""
    return rate / rng.gamma(shape)


def sample_sigma(w, nu, p, a_sigma=1.0, b_sigma=1.0, rng=None):
    """Draw the ALD scale sigma from its inverse-Gamma conditional.

    Shape (a_sigma + 3T)/2 and rate b_tilde/2 with
    b_tilde = b_sigma + 2 * sum(nu) + sum((w - theta*nu)^2 / (tau^2 * nu)).
    """
    w = np.asarray(w, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0.0):
        raise DomainError("all mixing values must be strictly positive")
    qc = quantile_constants(p)
    n = w.size
    a_tilde = a_sigma + 3.0 * n
    b_tilde = b_sigma + 2.0 * nu.sum() + np.sum((w - qc.theta * nu) ** 2 / (qc.tau2 * nu))
    return sample_inverse_gamma(a_tilde / 2.0, b_tilde / 2.0, rng)
