"""Direct h-step predictive distributions and quantile-based scoring.

The object forecast at level p is the conditional p-quantile of growth:
per retained draw the tree/linear combination evaluated at the origin's
covariates plus a simulated factor term (the error's p-quantile is zero by
construction).  Scores are pinball losses and quantile-weighted CRPS with
the standard weighting schemes.
"""

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .ald import check_loss
from .errors import ContractError, DomainError
from .factor_sv import SVParams, propagate_log_variance
from .gibbs import run_chain
from .panel import build_all_designs, forecast_covariates
from .errors import ChainError

__all__ = [
    "predict_quantiles",
    "quantile_score",
    "crps_weight",
    "qw_crps",
    "ScoreTable",
    "recursive_oos",
    "WEIGHT_SCHEMES",
    "QS_GRID",
]

WEIGHT_SCHEMES = ("none", "tails", "left", "right", "center")

# default per-quantile score reporting grid
QS_GRID = (0.1, 0.25, 0.5, 0.75, 0.9)


def predict_quantiles(store, x_new, rng):
    """Posterior draws of the conditional quantiles at new covariates.

    Parameters
    ----------
    store : DrawStore
    x_new : ndarray (N, K)
        Covariate vectors with horizon-h alignment, one per country.
    rng : numpy Generator
        Drives the one-step factor simulation.

    Returns
    -------
    ndarray (D, P, N) of quantile draws on the original (mean re-added) scale.
    """
    x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
    n = len(store.countries)
    if x_new.shape[0] != n:
        raise DomainError(f"expected {n} covariate rows, got {x_new.shape[0]}")
    arr = store.arrays
    omega = arr["omega"]
    beta = arr["beta"]
    lam = arr["lam"]
    d_len, p_len = omega.shape[:2]
    lin = np.einsum("dpnk,nk->dpn", beta, x_new)
    g = np.zeros((d_len, p_len, n))
    if store.forests is not None:
        for d in range(d_len):
            for pi in range(p_len):
                for i in range(n):
                    g[d, pi, i] = store.predict_g(d, pi, i, x_new[i])
    out = omega * g + (1.0 - omega) * lin
    if store.spec.factor_on:
        h_last = arr["h"][:, :, -1]
        sv = arr["sv"]
        u = rng.standard_normal((d_len, p_len))
        z = rng.standard_normal((d_len, p_len))
        h_new = sv[:, :, 0] + sv[:, :, 1] * (h_last - sv[:, :, 0]) + sv[:, :, 2] * u
        f_new = np.exp(0.5 * h_new) * z
        out = out + lam * f_new[:, :, None]
    return out + store.means[None, None, :]


def quantile_score(q, y, p):
    """Pinball loss of a quantile forecast: rho_p applied to the forecast error."""
    return check_loss(np.asarray(y, dtype=float) - np.asarray(q, dtype=float), p)


def crps_weight(u, scheme):
    """Quantile-weighting function for the CRPS approximation."""
    u = np.asarray(u, dtype=float)
    if scheme == "none":
        return np.ones_like(u)
    if scheme == "tails":
        return (2.0 * u - 1.0) ** 2
    if scheme == "left":
        return (1.0 - u) ** 2
    if scheme == "right":
        return u**2
    if scheme == "center":
        return u * (1.0 - u)
    raise ContractError(f"unknown weighting scheme {scheme!r}")


def _trapezoid_weights(grid):
    if grid.size == 1:
        return np.ones(1)
    delta = np.empty(grid.size)
    delta[0] = (grid[1] - grid[0]) / 2.0
    delta[-1] = (grid[-1] - grid[-2]) / 2.0
    delta[1:-1] = (grid[2:] - grid[:-2]) / 2.0
    return delta


def qw_crps(grid, forecasts, y, scheme):
    """Quantile-weighted CRPS over a grid of quantile forecasts.

    Forecasts are rearranged monotone (sorted) before scoring so that they
    form a valid quantile function.

    Parameters
    ----------
    grid : sequence of increasing quantile levels
    forecasts : sequence of quantile forecasts aligned with the grid
    y : realized value
    scheme : one of 'none', 'tails', 'left', 'right', 'center'
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0.0):
        raise ContractError("quantile grid must be strictly increasing")
    q = np.sort(np.asarray(forecasts, dtype=float))
    scores = quantile_score(q, y, grid)
    return float(np.sum(crps_weight(grid, scheme) * scores * _trapezoid_weights(grid)))


@dataclass
class ScoreTable:
    """Mean scores over the holdout and ratios versus the benchmark."""

    raw: pd.DataFrame  # index (horizon, country, model); crps_* and qs_* columns
    ratios: pd.DataFrame
    benchmark: str
    skipped: list

    def to_csv(self, raw_path, ratio_path):
        self.raw.to_csv(raw_path)
        self.ratios.to_csv(ratio_path)

    def to_json(self, path):
        payload = {
            "benchmark": self.benchmark,
            "skipped": self.skipped,
            "raw": json.loads(self.raw.reset_index().to_json(orient="records")),
            "ratios": json.loads(self.ratios.reset_index().to_json(orient="records")),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)


def _origin_seed(seed, horizon, origin_index):
    return np.random.SeedSequence((seed, horizon, origin_index)).generate_state(1)[0]


def recursive_oos(
    data,
    specs,
    first_holdout,
    horizons,
    seed,
    benchmark=None,
    qs_grid=QS_GRID,
    summary="mean",
    callback=None,
):
    """Pseudo out-of-sample forecast comparison over an expanding window.

    Parameters
    ----------
    data : PanelDataset
    specs : dict name -> ModelSpec
        The covariate horizon in each spec is replaced per requested horizon.
    first_holdout : str
        First quarter whose realization is scored.
    horizons : sequence of int
    seed : int
        Chains at one origin share a seed across models (common random numbers).
    benchmark : str, optional
        Model name used as the score-ratio denominator.  Defaults to the
        unique spec with omega pinned at zero, no factor and domestic
        covariates; missing benchmark raises ContractError.
    summary : 'mean' or 'median'
        Posterior point summary of the quantile draws entering the scores.

    Returns
    -------
    ScoreTable
    """
    if benchmark is None:
        candidates = [
            name
            for name, spec in specs.items()
            if spec.omega_mode == "zero" and not spec.factor_on and spec.covariates.kind == "ciss"
        ]
        if len(candidates) != 1:
            raise ContractError(
                "no unique benchmark (omega=0, no factor, domestic covariates); "
                "pass benchmark= explicitly"
            )
        benchmark = candidates[0]
    if benchmark not in specs:
        raise ContractError(f"benchmark {benchmark!r} not among the models")
    reduce_fn = {"mean": np.mean, "median": np.median}[summary]
    cut = pd.Period(first_holdout, freq="Q")
    if cut <= data.dates[0] or cut > data.dates[-1]:
        raise ContractError(f"first holdout {cut} outside the sample span")
    targets = [t for t, d in enumerate(data.dates) if d >= cut]
    records = []
    skipped = []
    for h in horizons:
        for oi, t_target in enumerate(targets):
            t_origin = t_target - h
            if t_origin < 0:
                continue
            window = data.window(data.dates <= data.dates[t_origin])
            chain_seed = int(_origin_seed(seed, h, oi))
            for name, base_spec in specs.items():
                spec = dataclasses.replace(
                    base_spec,
                    covariates=dataclasses.replace(base_spec.covariates, horizon=h),
                )
                try:
                    designs = build_all_designs(window, spec.covariates)
                    store = run_chain(designs, spec, chain_seed)
                except ChainError as exc:
                    skipped.append(
                        {"horizon": h, "target": str(data.dates[t_target]), "model": name,
                         "error": str(exc)}
                    )
                    continue
                x_new = np.stack(
                    [forecast_covariates(window, c, spec.covariates) for c in window.countries]
                )
                rng = np.random.default_rng(
                    np.random.SeedSequence((chain_seed, 997))
                )
                draws = predict_quantiles(store, x_new, rng)  # (D, P, N)
                points = reduce_fn(draws, axis=0)  # (P, N)
                grid = np.asarray(spec.quantiles)
                for i, country in enumerate(data.countries):
                    realized = float(data.gdp[t_target, i])
                    row = {
                        "horizon": h,
                        "target": str(data.dates[t_target]),
                        "country": country,
                        "model": name,
                    }
                    for scheme in WEIGHT_SCHEMES:
                        row[f"crps_{scheme}"] = qw_crps(grid, points[:, i], realized, scheme)
                    for p in qs_grid:
                        matches = np.where(np.isclose(grid, p))[0]
                        if matches.size:
                            row[f"qs_{p:g}"] = float(
                                quantile_score(points[matches[0], i], realized, p)
                            )
                    records.append(row)
            if callback is not None:
                callback(h, oi, len(targets))
    if not records:
        raise ContractError("no forecast origins produced scores")
    frame = pd.DataFrame.from_records(records)
    score_cols = [c for c in frame.columns if c.startswith(("crps_", "qs_"))]
    raw = frame.groupby(["horizon", "country", "model"])[score_cols].mean()
    bench = raw.xs(benchmark, level="model")
    ratios = raw.divide(bench, axis=0)
    return ScoreTable(raw=raw, ratios=ratios, benchmark=benchmark, skipped=skipped)
