"""Linear-coefficient block: Gaussian draws with global-local shrinkage.

Coefficients carry independent half-Cauchy local scales and a single global
scale shared across every equation and quantile.  Optionally the first J
(domestic) coefficients are centered on a cross-country common mean that is
itself estimated ("pooled" mode); the plain mode pins that mean at zero.
All half-Cauchy scales are handled through the auxiliary inverse-Gamma
decomposition of Makalic and Schmidt.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .ald import sample_inverse_gamma
from .errors import ContractError, NumericalError

__all__ = [
    "sample_beta",
    "sample_pooled_mean",
    "sample_local_scales",
    "sample_global_scale",
]

_JITTER = 1e-10
_COND_LIMIT = 1e12


def sample_beta(y_tilde, x_tilde, prior_mean, prior_var_diag, rng):
    """Draw regression coefficients from their Gaussian conditional.

    Inputs must be pre-scaled by the mixture standard deviations; the
    posterior is N(Vbar (Vprior^-1 b0 + X'y), Vbar) with
    Vbar = (X'X + Vprior^-1)^-1.  Uses a precision Cholesky solve with a
    diagonal jitter fallback for near-singular precisions (omega near one
    makes the scaled design nearly zero).
    """
    x_tilde = np.asarray(x_tilde, dtype=float)
    prior_prec = 1.0 / np.asarray(prior_var_diag, dtype=float)
    prec = x_tilde.T @ x_tilde + np.diag(prior_prec)
    lin = prior_prec * np.asarray(prior_mean, dtype=float) + x_tilde.T @ np.asarray(
        y_tilde, dtype=float
    )
    if not np.all(np.isfinite(prec)):
        raise NumericalError("non-finite posterior precision for beta")
    diag = np.diag(prec)
    if diag.max() / max(diag.min(), 1e-300) > _COND_LIMIT:
        prec = prec + _JITTER * np.eye(prec.shape[0])
    try:
        chol = cho_factor(prec, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"posterior precision not SPD: {exc}") from None
    mean = cho_solve(chol, lin)
    z = rng.standard_normal(prec.shape[0])
    # solve L' u = z gives a draw with covariance prec^-1
    lower = np.tril(chol[0])
    draw = np.linalg.solve(lower.T, z)
    return mean + draw


def sample_pooled_mean(betas, local_vars, pool_var, rng, pooled=True):
    """Draw the cross-country common mean for one domestic coefficient.

    Parameters
    ----------
    betas : ndarray (N,)
        Current coefficient draws for this (coefficient, quantile) slot.
    local_vars : ndarray (N,)
        Per-country prior variances phi^2 * psi^2.
    pool_var : float
        Prior variance of the common mean.
    pooled : bool
        Must be True; the plain (zero-centered) prior never calls this.
    """
    if not pooled:
        raise ContractError("common mean is fixed at zero outside pooled mode")
    betas = np.asarray(betas, dtype=float)
    local_vars = np.asarray(local_vars, dtype=float)
    var = 1.0 / ((1.0 / local_vars).sum() + 1.0 / pool_var)
    mean = var * (betas / local_vars).sum()
    return mean + np.sqrt(var) * rng.standard_normal()


def sample_local_scales(beta, pooled_mean, phi2, eta, rng):
    """Draw (psi^2, eta) for a coefficient vector.

    psi^2 ~ InvGamma(1, 1/eta + (beta - mean)^2 / (2 phi^2)),
    eta   ~ InvGamma(1, 1 + 1/psi^2).
    """
    dev2 = (np.asarray(beta, dtype=float) - np.asarray(pooled_mean, dtype=float)) ** 2
    rate = 1.0 / np.asarray(eta, dtype=float) + dev2 / (2.0 * phi2)
    psi2 = rate / rng.gamma(1.0, size=dev2.shape)
    eta_new = (1.0 + 1.0 / psi2) / rng.gamma(1.0, size=dev2.shape)
    return psi2, eta_new


def sample_global_scale(sq_dev_over_psi2_sum, n_coefficients, xi, rng):
    """Draw (phi^2, xi) pooling over all equations and quantiles.

    phi^2 ~ InvGamma((n_coefficients + 1)/2, 1/xi + sum/2), where the sum runs
    over (beta - mean)^2 / psi^2 across every coefficient, country and
    quantile, and n_coefficients = N * K * P.
    """
    shape = (n_coefficients + 1.0) / 2.0
    rate = 1.0 / xi + 0.5 * sq_dev_over_psi2_sum
    phi2 = sample_inverse_gamma(shape, rate, rng)
    xi_new = sample_inverse_gamma(1.0, 1.0 + 1.0 / phi2, rng)
    return phi2, xi_new
