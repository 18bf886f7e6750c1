"""Synthetic panel generators used by the CLI and the test oracles.

Growth follows an AR(1)-with-covariate law whose noise scale may depend on
financial conditions linearly (location-scale) and/or through a threshold
term, so the conditional quantiles are known in closed form.  Financial
conditions are an exogenous stationary AR(1).
"""

import json
from dataclasses import dataclass, asdict

import numpy as np
import pandas as pd
from scipy.stats import norm

from .panel import PanelDataset

__all__ = ["SyntheticDgpSpec", "simulate_panel", "write_panel_csv", "true_quantile"]

_NAME_POOL = ["US", "DE", "FR", "IT", "ES", "UK", "NL", "AT", "SE", "DK", "FI"]


@dataclass(frozen=True)
class SyntheticDgpSpec:
    """Parameters of the synthetic panel law.

    Growth (demeaned internally):
        y_t = mean + by * (y_{t-1} - mean) + bf * fci_{t-1}
              + loading * f_t + s(fci_{t-1}) * u_t,  u ~ N(0, 1),
        s(x) = max(scale_base + scale_slope * x + tail_step * 1{x > tail_threshold}, 0.1).
    The common factor f_t, when loading != 0, carries stochastic volatility
    with the given AR(1) log-variance parameters.
    """

    n_countries: int = 3
    n_quarters: int = 120
    mean_level: float = 2.0
    by: float = 0.3
    bf: float = -0.5
    scale_base: float = 1.0
    scale_slope: float = 0.0
    tail_step: float = 0.0
    tail_threshold: float = 0.5
    loading: float = 0.0
    sv_mu: float = -1.0
    sv_rho: float = 0.95
    sv_sigma: float = 0.2
    fci_rho: float = 0.8
    fci_sd: float = 0.5
    start: str = "1975Q1"

    @classmethod
    def linear(cls, **kw):
        return cls(**kw)

    @classmethod
    def nonlinear_tail(cls, tail_step=1.5, **kw):
        return cls(tail_step=tail_step, **kw)


def _country_names(n):
    names = list(_NAME_POOL[:n])
    names += [f"C{i:02d}" for i in range(len(names), n)]
    return names


def _noise_scale(spec, fci_lag):
    s = spec.scale_base + spec.scale_slope * fci_lag
    s = s + spec.tail_step * (fci_lag > spec.tail_threshold)
    return np.maximum(s, 0.1)


def true_quantile(spec, p, y_lag, fci_lag):
    """Conditional p-quantile of growth given last quarter's state.

    Marginalizes nothing: valid for the no-factor laws (loading == 0).
    """
    mean = (
        spec.mean_level
        + spec.by * (np.asarray(y_lag) - spec.mean_level)
        + spec.bf * np.asarray(fci_lag)
    )
    return mean + _noise_scale(spec, np.asarray(fci_lag)) * norm.ppf(p)


def simulate_panel(spec, seed):
    """Simulate the panel; returns (PanelDataset, truth dict)."""
    rng = np.random.default_rng(seed)
    n, t_len = spec.n_countries, spec.n_quarters
    burn = 50
    total = t_len + burn
    fci = np.zeros((total, n))
    innov = rng.standard_normal((total, n)) * spec.fci_sd
    for t in range(1, total):
        fci[t] = spec.fci_rho * fci[t - 1] + innov[t]
    f = np.zeros(total)
    if spec.loading != 0.0:
        h = spec.sv_mu
        for t in range(total):
            h = spec.sv_mu + spec.sv_rho * (h - spec.sv_mu) + spec.sv_sigma * rng.standard_normal()
            f[t] = np.exp(0.5 * h) * rng.standard_normal()
    y = np.full((total, n), spec.mean_level)
    u = rng.standard_normal((total, n))
    for t in range(1, total):
        scale = _noise_scale(spec, fci[t - 1])
        y[t] = (
            spec.mean_level
            + spec.by * (y[t - 1] - spec.mean_level)
            + spec.bf * fci[t - 1]
            + spec.loading * f[t]
            + scale * u[t]
        )
    dates = pd.period_range(spec.start, periods=t_len, freq="Q")
    data = PanelDataset(
        countries=tuple(_country_names(n)),
        dates=dates,
        gdp=y[burn:],
        fci=fci[burn:],
    )
    truth = {"dgp": asdict(spec), "seed": seed}
    return data, truth


def write_panel_csv(data, path):
    """Write a PanelDataset in the long CSV schema the loader expects."""
    rows = []
    for vi, (name, mat) in enumerate((("gdp", data.gdp), ("fci", data.fci))):
        for t, date in enumerate(data.dates):
            for i, country in enumerate(data.countries):
                rows.append((country, str(date), name, mat[t, i]))
    frame = pd.DataFrame(rows, columns=["country", "date", "variable", "value"])
    frame.to_csv(path, index=False)


def write_truth(truth, path):
    with open(path, "w") as fh:
        json.dump(truth, fh, sort_keys=True, indent=2)
