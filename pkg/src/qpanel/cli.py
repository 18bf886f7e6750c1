"""Command-line interface.

Every subcommand reads a TOML config and writes delimited output plus
rendered figures into an output directory.  Exit codes: 0 success,
1 configuration problem, 2 data problem, 3 sampler failure, 4 contract
violation (an operation requested on an object that cannot support it).
"""

import argparse
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import pandas as pd

from . import dgp, plotting
from .errors import (
    ChainError,
    ConfigError,
    ContractError,
    DateRangeError,
    DomainError,
    InsufficientDataError,
    MissingDataError,
    SchemaError,
)
from .forecast import QS_GRID, WEIGHT_SCHEMES, predict_quantiles, recursive_oos
from .gibbs import DrawStore, Hyper, ModelSpec, run_chain
from .panel import CovariateSpec, build_all_designs, forecast_covariates, load_panel
from .scenario import (
    DEFAULT_PERIOD_BREAKS,
    girf_factor_shock,
    girf_fci_shock,
    variance_decomposition,
)

__all__ = ["main"]


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None


def _require(cfg, key, where="config"):
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r} in {where}")
    return cfg[key]


def _model_spec(table, where="model"):
    """Build a ModelSpec from a TOML table."""
    table = dict(table)
    kind = table.pop("covariates", "ciss")
    horizon = int(table.pop("horizon", 1))
    try:
        cov = CovariateSpec(kind=kind, horizon=horizon)
    except (SchemaError, DomainError) as exc:
        raise ConfigError(f"bad covariate settings in {where}: {exc}") from None
    hyper = Hyper(**table.pop("hyper", {}))
    if "quantiles" in table:
        table["quantiles"] = tuple(float(p) for p in table["quantiles"])
    known = {"prior", "omega_mode", "factor_on", "quantiles", "sweeps", "burn_in", "thin"}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return ModelSpec(covariates=cov, hyper=hyper, **table)


def _load_data(cfg):
    path = _require(cfg, "data")
    if not Path(path).exists():
        raise SchemaError(f"panel CSV not found: {path}")
    return load_panel(path, countries=cfg.get("countries"))


def _outdir(cfg):
    out = Path(_require(cfg, "outdir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------- subcommands


def cmd_simulate(cfg):
    out = _outdir(cfg)
    seed = int(cfg.get("seed", 0))
    table = dict(cfg.get("dgp", {}))
    kind = table.pop("kind", "linear")
    try:
        if kind == "linear":
            spec = dgp.SyntheticDgpSpec.linear(**table)
        elif kind == "nonlinear-tail":
            spec = dgp.SyntheticDgpSpec.nonlinear_tail(**table)
        else:
            raise ConfigError(f"unknown dgp kind {kind!r}")
    except TypeError as exc:
        raise ConfigError(f"bad dgp settings: {exc}") from None
    data, truth = dgp.simulate_panel(spec, seed)
    dgp.write_panel_csv(data, out / "panel.csv")
    dgp.write_truth(truth, out / "truth.json")
    print(f"wrote {out / 'panel.csv'} ({data.n_periods} quarters, {data.n_countries} countries)")
    return 0


def cmd_estimate(cfg):
    out = _outdir(cfg)
    seed = int(cfg.get("seed", 0))
    data = _load_data(cfg)
    if "train_end" in cfg:
        cut = pd.Period(cfg["train_end"], freq="Q")
        if cut < data.dates[0] or cut > data.dates[-1]:
            raise DateRangeError(f"train_end {cut} outside the sample span")
        data = data.window(data.dates <= cut)
    spec = _model_spec(_require(cfg, "model"))
    designs = build_all_designs(data, spec.covariates)

    def progress(s):
        print(f"sweep {s}/{spec.sweeps}", flush=True)

    store = run_chain(designs, spec, seed, callback=progress)
    store.save(out / "store")
    omega = store.arrays["omega"]
    rows = []
    for d in range(store.n_draws):
        for pi, p in enumerate(spec.quantiles):
            for i, country in enumerate(store.countries):
                rows.append((d, p, country, omega[d, pi, i]))
    pd.DataFrame(rows, columns=["draw", "quantile", "country", "omega"]).to_csv(
        out / "omega_trace.csv", index=False
    )
    plotting.omega_trace_plot(omega, spec.quantiles, store.countries, out / "omega_trace.png")
    if spec.factor_on:
        f, h = store.arrays["f"], store.arrays["h"]
        rows = []
        for pi, p in enumerate(spec.quantiles):
            lo_f, med_f, hi_f = np.percentile(f[:, pi], [16, 50, 84], axis=0)
            lo_h, med_h, hi_h = np.percentile(h[:, pi], [16, 50, 84], axis=0)
            for t, date in enumerate(store.dates):
                rows.append((p, date, lo_f[t], med_f[t], hi_f[t], lo_h[t], med_h[t], hi_h[t]))
            plotting.factor_path_plot(
                store.dates, f[:, pi], h[:, pi], p, out / f"factor_p{p:g}.png"
            )
        pd.DataFrame(
            rows,
            columns=["quantile", "date", "f16", "f50", "f84", "h16", "h50", "h84"],
        ).to_csv(out / "factor_summary.csv", index=False)
    print(f"stored {store.n_draws} draws in {out / 'store'}")
    return 0


def cmd_forecast(cfg):
    out = _outdir(cfg)
    seed = int(cfg.get("seed", 0))
    store = DrawStore.load(_require(cfg, "store"))
    data = _load_data(cfg)
    if list(data.countries) != store.countries:
        raise ContractError("panel and draw store disagree on the country set")
    x_new = np.stack(
        [forecast_covariates(data, c, store.spec.covariates) for c in data.countries]
    )
    rng = np.random.default_rng(np.random.SeedSequence((seed, 997)))
    draws = predict_quantiles(store, x_new, rng)
    lo, mean, hi = (
        np.percentile(draws, 16, axis=0),
        draws.mean(axis=0),
        np.percentile(draws, 84, axis=0),
    )
    rows = []
    for pi, p in enumerate(store.spec.quantiles):
        for i, country in enumerate(data.countries):
            rows.append((country, p, mean[pi, i], lo[pi, i], hi[pi, i]))
    frame = pd.DataFrame(rows, columns=["country", "quantile", "forecast", "lo16", "hi84"])
    frame.to_csv(out / "forecast.csv", index=False)
    print(frame.to_string(index=False))
    return 0


def cmd_evaluate(cfg):
    out = _outdir(cfg)
    seed = int(cfg.get("seed", 0))
    data = _load_data(cfg)
    model_tables = _require(cfg, "models")
    if not isinstance(model_tables, dict) or not model_tables:
        raise ConfigError("need at least one [models.NAME] table")
    specs = {
        name: _model_spec(tbl, where=f"models.{name}") for name, tbl in model_tables.items()
    }
    horizons = [int(h) for h in cfg.get("horizons", [1, 4])]
    table = recursive_oos(
        data,
        specs,
        first_holdout=_require(cfg, "first_holdout"),
        horizons=horizons,
        seed=seed,
        benchmark=cfg.get("benchmark"),
        qs_grid=tuple(cfg.get("qs_grid", QS_GRID)),
        summary=cfg.get("summary", "mean"),
        callback=lambda h, oi, total: print(f"horizon {h}: origin {oi + 1}/{total}", flush=True),
    )
    table.to_csv(out / "scores_raw.csv", out / "scores_ratio.csv")
    table.to_json(out / "scores.json")
    for scheme in WEIGHT_SCHEMES:
        plotting.ratio_heatmap(
            table.ratios,
            f"crps_{scheme}",
            out / f"crps_heatmap_{scheme}.png",
            title=f"weighted CRPS ratio vs {table.benchmark} ({scheme})",
        )
    print(f"benchmark: {table.benchmark}; skipped chains: {len(table.skipped)}")
    return 0


def cmd_girf(cfg):
    out = _outdir(cfg)
    seed = int(cfg.get("seed", 0))
    store = DrawStore.load(_require(cfg, "store"))
    data = _load_data(cfg)
    target = cfg.get("target", "factor")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 31)))
    common = {
        "rng": rng,
        "max_draws": int(cfg.get("max_draws", 50)),
        "origin_stride": int(cfg.get("origin_stride", 4)),
    }
    if target == "factor":
        result = girf_factor_shock(
            store,
            data,
            shock_size=float(cfg.get("shock_size", 1.0)),
            horizons=int(cfg.get("horizons", 8)),
            **common,
        )
        result.to_csv(out / "girf_factor.csv")
        plotting.girf_fan_chart(result, out / "girf_factor.png")
    elif target == "fci":
        result = girf_fci_shock(
            store,
            data,
            sizes=tuple(cfg.get("sizes", (-3, -2, -1, 1, 2, 3))),
            shock_country=cfg.get("shock_country", "US"),
            horizons=int(cfg.get("horizons", 4)),
            period_breaks=tuple(cfg.get("period_breaks", DEFAULT_PERIOD_BREAKS)),
            **common,
        )
        result.to_csv(out / "girf_fci.csv")
        plotting.girf_size_heatmaps(result, str(out))
    else:
        raise ConfigError(f"unknown girf target {target!r}")
    print(f"wrote impulse responses to {out}")
    return 0


def cmd_vardecomp(cfg):
    out = _outdir(cfg)
    store = DrawStore.load(_require(cfg, "store"))
    vd = variance_decomposition(store)
    vd.to_csv(out / "vardecomp.csv")
    plotting.vardecomp_heatmap(vd, out / "vardecomp.png")
    print(vd.summary.round(3).to_string())
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "girf": cmd_girf,
    "vardecomp": cmd_vardecomp,
}


def _parser():
    parser = argparse.ArgumentParser(
        prog="qpanel",
        description="Bayesian quantile panel models: estimation, tail forecasting, scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    help_lines = {
        "simulate": "generate a synthetic growth/financial-conditions panel",
        "estimate": "run the MCMC sampler and store posterior draws",
        "forecast": "quantile forecasts from a stored chain",
        "evaluate": "recursive out-of-sample score comparison across model variants",
        "girf": "generalized impulse responses (factor or financial-conditions shock)",
        "vardecomp": "factor share of shock variance",
    }
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=help_lines[name])
        p.add_argument("-c", "--config", required=True, help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--outdir", default=None, help="override the output directory")
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be a table")
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.outdir is not None:
            cfg["outdir"] = args.outdir
        return _COMMANDS[args.command](cfg)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (SchemaError, MissingDataError, InsufficientDataError, DateRangeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ChainError as exc:
        print(f"sampler failure: {exc}", file=sys.stderr)
        return 3
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
