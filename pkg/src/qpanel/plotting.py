"""Figure rendering for the command-line reports.

All functions write files (PNG) and never open interactive windows; the
Agg backend is forced at import time so the CLI works headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from matplotlib.colors import TwoSlopeNorm

__all__ = [
    "ratio_heatmap",
    "girf_fan_chart",
    "girf_size_heatmaps",
    "factor_path_plot",
    "omega_trace_plot",
    "vardecomp_heatmap",
]

_DPI = 120


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def _diverging_heatmap(ax, values, center, cmap):
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        finite = np.array([center])
    span = max(np.abs(finite - center).max(), 1e-6)
    norm = TwoSlopeNorm(vcenter=center, vmin=center - span, vmax=center + span)
    return ax.imshow(values, aspect="auto", cmap=cmap, norm=norm)


def ratio_heatmap(ratios, column, path, title=None):
    """Relative-score heatmap: one row per (horizon, country), one column per model.

    Ratios below one (improvement over the benchmark) render green, above
    one red.

    Parameters
    ----------
    ratios : DataFrame indexed by (horizon, country, model)
    column : score column to display, e.g. 'crps_left'
    path : output file
    """
    pivot = ratios[column].unstack("model")
    fig, ax = plt.subplots(
        figsize=(1.0 + 1.1 * pivot.shape[1], 0.8 + 0.35 * pivot.shape[0])
    )
    im = _diverging_heatmap(ax, pivot.to_numpy(), 1.0, "RdYlGn_r")
    ax.set_xticks(range(pivot.shape[1]), pivot.columns, rotation=30, ha="right")
    ax.set_yticks(range(pivot.shape[0]), [f"h={h} {c}" for h, c in pivot.index])
    for r in range(pivot.shape[0]):
        for c in range(pivot.shape[1]):
            v = pivot.iat[r, c]
            if np.isfinite(v):
                ax.text(c, r, f"{v:.3f}", ha="center", va="center", fontsize=7)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(title or column)
    _save(fig, path)


def girf_fan_chart(girf, path):
    """Grid of response fans (16/50/84 bands), countries by quantiles."""
    bands = girf.bands
    n = len(girf.countries)
    p_len = len(girf.quantiles)
    hz = np.arange(girf.horizons + 1)
    fig, axes = plt.subplots(
        n, p_len, figsize=(2.4 * p_len, 1.9 * n), sharex=True, squeeze=False
    )
    for i, country in enumerate(girf.countries):
        for pi, p in enumerate(girf.quantiles):
            ax = axes[i][pi]
            ax.fill_between(hz, bands[0, pi, i], bands[2, pi, i], alpha=0.3, color="tab:blue")
            ax.plot(hz, bands[1, pi, i], color="tab:blue", lw=1.2)
            ax.axhline(0.0, color="k", lw=0.5)
            if i == 0:
                ax.set_title(f"p={p:g}", fontsize=9)
            if pi == 0:
                ax.set_ylabel(country, fontsize=9)
    fig.suptitle(f"responses to a size-{girf.sizes[0]:g} factor shock")
    _save(fig, path)


def girf_size_heatmaps(girf, outdir, prefix="fci_girf"):
    """One heatmap per origin period: quantiles by shock sizes, per country.

    Returns the list of written paths.
    """
    table = girf.table
    paths = []
    for period, sub in table.groupby("period", sort=False):
        n = len(girf.countries)
        fig, axes = plt.subplots(1, n, figsize=(2.6 * n, 2.4), squeeze=False)
        for i, country in enumerate(girf.countries):
            piv = (
                sub[sub["country"] == country]
                .pivot(index="quantile", columns="size", values="value")
                .sort_index()
            )
            ax = axes[0][i]
            im = _diverging_heatmap(ax, piv.to_numpy(), 0.0, "RdBu")
            ax.set_xticks(range(piv.shape[1]), [f"{s:g}" for s in piv.columns])
            ax.set_yticks(range(piv.shape[0]), [f"{q:g}" for q in piv.index])
            ax.set_title(country, fontsize=9)
            ax.set_xlabel("shock size")
            if i == 0:
                ax.set_ylabel("quantile")
        fig.colorbar(im, ax=axes[0].tolist(), shrink=0.8)
        fig.suptitle(f"cumulative 1-year responses, origins {period}")
        slug = period.replace("/", "-")
        p = f"{outdir}/{prefix}_{slug}.png"
        _save(fig, p)
        paths.append(p)
    return paths


def factor_path_plot(dates, f_draws, h_draws, quantile, path):
    """Posterior median and 16/84 bands of the factor and its log-variance."""
    x = np.arange(len(dates))
    fig, axes = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    for ax, draws, label in ((axes[0], f_draws, "factor"), (axes[1], h_draws, "log-variance")):
        lo, med, hi = np.percentile(draws, [16, 50, 84], axis=0)
        ax.fill_between(x, lo, hi, alpha=0.3, color="tab:orange")
        ax.plot(x, med, color="tab:orange", lw=1.2)
        ax.set_ylabel(label)
    ticks = x[:: max(len(x) // 10, 1)]
    axes[1].set_xticks(ticks, [str(dates[t]) for t in ticks], rotation=45, ha="right")
    fig.suptitle(f"common factor at p={quantile:g}")
    _save(fig, path)


def omega_trace_plot(omega, quantiles, countries, path):
    """Retained-draw traces of the tree weight per quantile (lines per country)."""
    d_len, p_len, n = omega.shape
    fig, axes = plt.subplots(1, p_len, figsize=(2.4 * p_len, 2.4), sharey=True, squeeze=False)
    for pi, p in enumerate(quantiles):
        ax = axes[0][pi]
        for i, country in enumerate(countries):
            ax.plot(omega[:, pi, i], lw=0.7, label=country)
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(f"p={p:g}", fontsize=9)
    axes[0][0].set_ylabel("tree weight")
    axes[0][-1].legend(fontsize=7, loc="best")
    _save(fig, path)


def vardecomp_heatmap(vd, path):
    """Posterior-mean factor variance shares, quantiles by countries."""
    fig, ax = plt.subplots(figsize=(1.5 + 0.9 * len(vd.countries), 2.6))
    values = vd.summary.to_numpy()
    im = ax.imshow(values, aspect="auto", cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(vd.countries)), vd.countries)
    ax.set_yticks(range(len(vd.quantiles)), [f"{q:g}" for q in vd.quantiles])
    for r in range(values.shape[0]):
        for c in range(values.shape[1]):
            ax.text(c, r, f"{values[r, c]:.2f}", ha="center", va="center", fontsize=7,
                    color="w" if values[r, c] < 0.6 else "k")
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title("factor share of shock variance")
    _save(fig, path)
