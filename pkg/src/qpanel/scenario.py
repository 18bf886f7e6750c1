"""Variance decompositions and generalized impulse responses.

Impulse responses are Monte Carlo: per retained draw and per in-sample
origin the panel is simulated forward twice, once with the shock and once
without, sharing every random number except the shock itself, then the
path difference is averaged over origins and summarized over draws.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .ald import quantile_constants
from .errors import ContractError, DomainError

__all__ = [
    "VarianceDecomposition",
    "GirfResult",
    "variance_decomposition",
    "girf_factor_shock",
    "girf_fci_shock",
    "DEFAULT_PERIOD_BREAKS",
]

# period grouping for the financial-shock heatmaps
DEFAULT_PERIOD_BREAKS = ("2000Q1", "2010Q1", "2020Q1")


@dataclass
class VarianceDecomposition:
    """Factor share of shock variance per (draw, quantile, country)."""

    time_avg: np.ndarray  # (D, P, N) time-averaged shares per draw
    summary: pd.DataFrame  # quantile x country posterior means
    quantiles: tuple
    countries: list

    def to_csv(self, path):
        self.summary.to_csv(path)


def variance_decomposition(store):
    """Share of shock variance explained by the common factor.

    Per draw and period the share is lam^2 exp(h) / (lam^2 exp(h) + Var(eps))
    with Var(eps) the ALD error variance; the summary averages over time and
    draws as usual for factor-commonality tables.
    """
    if not store.spec.factor_on:
        raise ContractError("variance decomposition requires a factor model")
    lam2 = store.arrays["lam"] ** 2  # (D, P, N)
    sigma = store.arrays["sigma"]
    h = store.arrays["h"]  # (D, P, T)
    theta_tau = np.asarray(
        [
            quantile_constants(p).theta ** 2 + quantile_constants(p).tau2
            for p in store.spec.quantiles
        ]
    )
    err_var = sigma**2 * theta_tau[None, :, None]  # (D, P, N)
    common = lam2[:, :, :, None] * np.exp(h)[:, :, None, :]  # (D, P, N, T)
    share = common / (common + err_var[:, :, :, None])
    time_avg = share.mean(axis=3)
    summary = pd.DataFrame(
        time_avg.mean(axis=0),
        index=pd.Index(list(store.spec.quantiles), name="quantile"),
        columns=pd.Index(store.countries, name="country"),
    )
    return VarianceDecomposition(
        time_avg=time_avg,
        summary=summary,
        quantiles=store.spec.quantiles,
        countries=store.countries,
    )


@dataclass
class GirfResult:
    """Impulse responses: posterior bands or period-grouped medians."""

    target: str  # "factor" or "fci"
    sizes: tuple
    horizons: int
    bands: np.ndarray | None  # factor shock: (3, P, N, H+1) 16/50/84 bands
    table: pd.DataFrame  # long format for CSV export
    quantiles: tuple
    countries: list

    def to_csv(self, path):
        self.table.to_csv(path, index=False)


class _PanelSimulator:
    """Forward simulation of the panel under one posterior draw and quantile.

    Maintains demeaned growth histories; financial conditions are frozen at
    their origin values once the simulation leaves the observed sample.
    """

    def __init__(self, store, data, draw, pi):
        self.kind = store.spec.covariates.kind
        self.n = len(store.countries)
        arr = store.arrays
        self.omega = arr["omega"][draw, pi]
        self.beta = arr["beta"][draw, pi]
        self.lam = arr["lam"][draw, pi]
        self.sigma = arr["sigma"][draw, pi]
        self.h_path = arr["h"][draw, pi]
        self.sv = arr["sv"][draw, pi]  # (mu, rho, sigma)
        self.qc = quantile_constants(store.spec.quantiles[pi])
        self.forests = None
        if store.forests is not None:
            self.forests = [store.forest(draw, pi, i) for i in range(self.n)]
        self.g_dem = data.gdp - data.gdp.mean(axis=0, keepdims=True)  # T0 x N
        self.fci = data.fci

    def covariates(self, growth_row, fci_row, i):
        own = np.array([growth_row[i], fci_row[i]])
        if self.kind == "ciss" or self.n == 1:
            return own
        rest = np.concatenate(
            [np.array([growth_row[j], fci_row[j]]) for j in range(self.n) if j != i]
        )
        return np.concatenate([own, rest])

    def step_mean(self, growth_row, fci_row):
        """Model-implied quantile location for each country, no factor/error."""
        out = np.empty(self.n)
        for i in range(self.n):
            x = self.covariates(growth_row, fci_row, i)
            lin = self.beta[i] @ x
            g = self.forests[i].predict(x) if self.forests is not None else 0.0
            out[i] = self.omega[i] * g + (1.0 - self.omega[i]) * lin
        return out

    def innovations(self, horizon, rng):
        """Pre-draw all shared random numbers for one origin simulation."""
        mu, rho, sig = self.sv
        return {
            "u": rng.standard_normal(horizon),
            "z": rng.standard_normal(horizon),
            "exp": rng.exponential(1.0, size=(horizon, self.n)),
            "e": rng.standard_normal((horizon, self.n)),
        }

    def simulate(self, origin, horizon, innov, impact_growth=None, fci_shift=None):
        """Simulate ``horizon`` quarters past ``origin``; returns (H, N) growth.

        impact_growth : optional (N,) additive perturbation of growth at the
            origin quarter itself (a factor shock realized at the origin).
        fci_shift : optional (N,) additive perturbation of the origin-dated
            financial-conditions row (a one-time covariate shock).
        """
        growth_prev = self.g_dem[origin].copy()
        if impact_growth is not None:
            growth_prev = growth_prev + impact_growth
        fci_origin = self.fci[origin].copy()
        fci_first = fci_origin + fci_shift if fci_shift is not None else fci_origin
        mu, rho, sig = self.sv
        h = self.h_path[origin] if origin < self.h_path.size else self.h_path[-1]
        out = np.empty((horizon, self.n))
        for j in range(horizon):
            fci_row = fci_first if j == 0 else fci_origin
            mean = self.step_mean(growth_prev, fci_row)
            h = mu + rho * (h - mu) + sig * innov["u"][j]
            f = np.exp(0.5 * h) * innov["z"][j]
            nu = self.sigma * innov["exp"][j]
            eps = self.qc.theta * nu + self.qc.tau * np.sqrt(self.sigma * nu) * innov["e"][j]
            growth_prev = mean + self.lam * f + eps
            out[j] = growth_prev
        return out


def _check_girf_inputs(store, data, horizon):
    if horizon < 1:
        raise DomainError("impulse-response horizon must be at least 1")
    if store.spec.covariates.horizon != 1:
        raise ContractError("impulse responses require a one-quarter-ahead model")
    if list(data.countries) != list(store.countries):
        raise ContractError("panel and draw store disagree on the country set")


def girf_factor_shock(
    store, data, shock_size, horizons=8, rng=None, max_draws=50, origin_stride=4
):
    """Responses of growth to a shock added to the common factor at impact.

    Per draw and origin both paths share every innovation; origins are
    averaged, draws summarized by 16/50/84 percentile bands.
    """
    _check_girf_inputs(store, data, horizons)
    if not store.spec.factor_on:
        raise ContractError("factor shock requires a factor model")
    rng = rng if rng is not None else np.random.default_rng(0)
    d_len = store.n_draws
    draws = np.linspace(0, d_len - 1, min(max_draws, d_len)).astype(int)
    draws = np.unique(draws)
    t0 = data.n_periods
    origins = np.arange(store.spec.covariates.horizon, t0, origin_stride)
    p_len = len(store.spec.quantiles)
    n = len(store.countries)
    resp = np.zeros((draws.size, p_len, n, horizons + 1))
    for di, d in enumerate(draws):
        for pi in range(p_len):
            sim = _PanelSimulator(store, data, d, pi)
            lam = sim.lam
            for origin in origins:
                innov = sim.innovations(horizons, rng)
                impact = lam * shock_size
                shocked = sim.simulate(origin, horizons, innov, impact_growth=impact)
                base = sim.simulate(origin, horizons, innov)
                resp[di, pi, :, 0] += impact
                resp[di, pi, :, 1:] += (shocked - base).T
    resp /= origins.size
    bands = np.percentile(resp, [16, 50, 84], axis=0)
    rows = []
    for bi, band in enumerate((16, 50, 84)):
        for pi, p in enumerate(store.spec.quantiles):
            for i, country in enumerate(store.countries):
                for hz in range(horizons + 1):
                    rows.append(
                        {
                            "country": country,
                            "quantile": p,
                            "horizon": hz,
                            "size": shock_size,
                            "band": band,
                            "value": bands[bi, pi, i, hz],
                        }
                    )
    return GirfResult(
        target="factor",
        sizes=(shock_size,),
        horizons=horizons,
        bands=bands,
        table=pd.DataFrame(rows),
        quantiles=store.spec.quantiles,
        countries=store.countries,
    )


def _period_group(date, breaks):
    period = pd.Period(date, freq="Q")
    label_start = "start"
    for b in breaks:
        if period < pd.Period(b, freq="Q"):
            return f"{label_start}-{b}"
        label_start = b
    return f"{breaks[-1]}-end"


def girf_fci_shock(
    store,
    data,
    sizes=(-3, -2, -1, 1, 2, 3),
    shock_country="US",
    horizons=4,
    rng=None,
    max_draws=50,
    origin_stride=4,
    period_breaks=DEFAULT_PERIOD_BREAKS,
):
    """Cumulative growth responses to a one-time financial-conditions shock.

    The designated country's financial-conditions value at the origin quarter
    is shifted by size * in-sample standard deviation; responses cumulate
    over the following year and are grouped by origin period (posterior
    medians per group).
    """
    _check_girf_inputs(store, data, horizons)
    if store.spec.covariates.kind != "ciss-cc":
        raise ContractError(
            "financial-conditions shocks require the cross-country covariate set"
        )
    if shock_country not in store.countries:
        raise ContractError(f"shock country {shock_country!r} not in the panel")
    rng = rng if rng is not None else np.random.default_rng(0)
    us = list(store.countries).index(shock_country)
    sd = float(data.fci[:, us].std())
    d_len = store.n_draws
    draws = np.unique(np.linspace(0, d_len - 1, min(max_draws, d_len)).astype(int))
    origins = np.arange(store.spec.covariates.horizon, data.n_periods, origin_stride)
    groups = [_period_group(data.dates[o], period_breaks) for o in origins]
    group_names = sorted(set(groups), key=groups.index)
    p_len = len(store.spec.quantiles)
    n = len(store.countries)
    cum = {g: np.zeros((draws.size, p_len, n, len(sizes))) for g in group_names}
    counts = {g: 0 for g in group_names}
    for g in groups:
        counts[g] += 1
    for di, d in enumerate(draws):
        for pi in range(p_len):
            sim = _PanelSimulator(store, data, d, pi)
            for origin, group in zip(origins, groups):
                innov = sim.innovations(horizons, rng)
                base = sim.simulate(origin, horizons, innov)
                for si, k in enumerate(sizes):
                    if k == 0:
                        continue
                    shift = np.zeros(n)
                    shift[us] = k * sd
                    shocked = sim.simulate(origin, horizons, innov, fci_shift=shift)
                    cum[group][di, pi, :, si] += (shocked - base).sum(axis=0)
    rows = []
    for group in group_names:
        med = np.median(cum[group] / max(counts[group], 1), axis=0)  # (P, N, sizes)
        for pi, p in enumerate(store.spec.quantiles):
            for i, country in enumerate(store.countries):
                for si, k in enumerate(sizes):
                    rows.append(
                        {
                            "country": country,
                            "quantile": p,
                            "period": group,
                            "size": k,
                            "band": 50,
                            "value": med[pi, i, si],
                        }
                    )
    return GirfResult(
        target="fci",
        sizes=tuple(sizes),
        horizons=horizons,
        bands=None,
        table=pd.DataFrame(rows),
        quantiles=store.spec.quantiles,
        countries=store.countries,
    )
