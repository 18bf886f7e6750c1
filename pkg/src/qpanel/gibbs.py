"""Gibbs sampler composing all conditional updates, plus the draw store.

One sweep cycles, for every (country, quantile) equation: tree ensemble and
leaf values, regression coefficients, the cross-country pooled means, the
linear/non-linear combination weight (slice sampled on (0,1)), the factor
loading, the error scale and latent mixing values, and the local shrinkage
scales; then per quantile the factor and its volatility path; and finally
the global shrinkage scale shared by all equations and quantiles.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import ald, shrinkage
from .factor_sv import SVParams, sample_factor, sample_loadings, sample_volatility
from .errors import ChainError, ConfigError, DomainError
from .panel import CovariateSpec
from .trees import Forest

__all__ = [
    "DEFAULT_QUANTILES",
    "Hyper",
    "ModelSpec",
    "ChainState",
    "DrawStore",
    "sample_omega",
    "slice_unit_interval",
    "sweep",
    "run_chain",
]

DEFAULT_QUANTILES = (0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95)

STORE_VERSION = 1


@dataclass(frozen=True)
class Hyper:
    """Model hyperparameters with the standard defaults."""

    alpha: float = 0.95
    zeta: float = 2.0
    gamma: float = 2.0
    n_trees: int = 250
    a_sigma: float = 1.0
    b_sigma: float = 1.0
    pool_var: float = 10.0


@dataclass(frozen=True)
class ModelSpec:
    """One model variant: covariate set, prior, weight mode, factor switch."""

    covariates: CovariateSpec
    prior: str = "hsp"  # "hs" (zero-centered) or "hsp" (pooled mean)
    omega_mode: str = "estimated"  # "zero", "one" or "estimated"
    factor_on: bool = True
    quantiles: tuple = DEFAULT_QUANTILES
    sweeps: int = 30000
    burn_in: int = 15000
    thin: int = 5
    hyper: Hyper = field(default_factory=Hyper)

    def __post_init__(self):
        if self.prior not in ("hs", "hsp"):
            raise ConfigError(f"unknown prior {self.prior!r}")
        if self.omega_mode not in ("zero", "one", "estimated"):
            raise ConfigError(f"unknown omega mode {self.omega_mode!r}")
        if not self.sweeps > self.burn_in >= 0:
            raise ConfigError("need sweeps > burn_in >= 0")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if len(self.quantiles) == 0 or not all(0.0 < p < 1.0 for p in self.quantiles):
            raise ConfigError("quantiles must lie in (0, 1)")

    @property
    def trees_active(self):
        return self.omega_mode != "zero"

    def label(self):
        om = {"zero": "om0", "one": "om1", "estimated": "omest"}[self.omega_mode]
        fac = "fac" if self.factor_on else "nofac"
        return f"{self.covariates.kind}-{self.prior}-{om}-{fac}"

    def fingerprint(self):
        out = asdict(self)
        out["quantiles"] = list(self.quantiles)
        return out

    @classmethod
    def from_fingerprint(cls, data):
        data = dict(data)
        data["covariates"] = CovariateSpec(**data["covariates"])
        data["hyper"] = Hyper(**data["hyper"])
        data["quantiles"] = tuple(data["quantiles"])
        return cls(**data)

    def n_retained(self):
        return len(range(self.burn_in, self.sweeps, self.thin))


class RngStreams:
    """Deterministic per-block RNG streams keyed (seed, scope, quantile, country)."""

    def __init__(self, seed, n_quantiles, n_countries):
        self.block = [
            [
                np.random.default_rng(np.random.SeedSequence((seed, 1, pi, i)))
                for i in range(n_countries)
            ]
            for pi in range(n_quantiles)
        ]
        self.quantile = [
            np.random.default_rng(np.random.SeedSequence((seed, 2, pi)))
            for pi in range(n_quantiles)
        ]
        self.global_ = np.random.default_rng(np.random.SeedSequence((seed, 3)))


class ChainState:
    """Full latent state of one sweep."""

    def __init__(self, designs, spec):
        n = len(designs)
        t_len = designs[0].y.size
        k = designs[0].x.shape[1]
        p_len = len(spec.quantiles)
        self.n, self.t_len, self.k, self.p_len = n, t_len, k, p_len
        self.n_domestic = min(spec.covariates.n_domestic, k)
        self.beta = np.zeros((p_len, n, k))
        if spec.omega_mode == "zero":
            omega0 = 0.0
        elif spec.omega_mode == "one":
            omega0 = 1.0
        else:
            omega0 = 0.5
        self.omega = np.full((p_len, n), omega0)
        self.sigma = np.ones((p_len, n))
        self.nu = np.ones((p_len, n, t_len))
        self.psi2 = np.ones((p_len, n, k))
        self.eta = np.ones((p_len, n, k))
        self.lam = np.zeros((p_len, n))
        self.pooled = np.zeros((p_len, self.n_domestic))
        self.f = np.zeros((p_len, t_len))
        y_all = np.concatenate([d.y for d in designs])
        h0 = float(np.log(max(y_all.var(), 1e-6)))
        self.h = np.full((p_len, t_len), h0)
        self.sv = [SVParams(mu=h0, rho=0.9, sigma=0.2) for _ in range(p_len)]
        self.phi2 = 1.0
        self.xi = 1.0
        if spec.trees_active:
            hy = spec.hyper
            self.forests = [
                [
                    Forest(
                        d.x,
                        float(d.y.min()),
                        float(d.y.max()),
                        n_trees=hy.n_trees,
                        alpha=hy.alpha,
                        zeta=hy.zeta,
                        gamma=hy.gamma,
                    )
                    for d in designs
                ]
                for _ in range(p_len)
            ]
        else:
            self.forests = None

    def pooled_full(self, pi):
        """Prior-mean vector with the common means in the domestic slots."""
        out = np.zeros(self.k)
        out[: self.n_domestic] = self.pooled[pi]
        return out

    def tree_fit(self, pi, i):
        if self.forests is None:
            return np.zeros(self.t_len)
        return self.forests[pi][i].total_fit()

    def check_finite(self, sweep_index):
        for name in ("beta", "omega", "sigma", "lam", "f", "h"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ChainError(f"non-finite values in {name}", sweep=sweep_index)


def slice_unit_interval(log_density, x0, rng, max_shrink=200):
    """Slice sample on (0, 1) with interval shrinkage (no stepping out needed)."""
    height = log_density(x0) + np.log(rng.random())
    lo, hi = 0.0, 1.0
    for _ in range(max_shrink):
        x1 = lo + (hi - lo) * rng.random()
        if log_density(x1) > height:
            return x1
        if x1 < x0:
            lo = x1
        else:
            hi = x1
    return x0


def sample_omega(y, tree_fit, lin_fit, factor_term, theta_nu, obs_var, omega, rng):
    """Slice-sample the combination weight on its (0, 1) support.

    The conditional is Gaussian in omega restricted to the unit interval;
    the slice sampler needs no tuning on the bounded support.
    """
    w = 1.0 / obs_var
    base = y - lin_fit - factor_term - theta_nu
    diff = tree_fit - lin_fit
    a = np.sum(diff * diff * w)
    b = np.sum(base * diff * w)

    def logf(om):
        return -0.5 * a * om * om + b * om

    return slice_unit_interval(logf, omega, rng)


def sweep(state, designs, spec, streams):
    """One full Gibbs cycle over every equation, quantile and global block."""
    hy = spec.hyper
    estimated = spec.omega_mode == "estimated"
    n, t_len, k = state.n, state.t_len, state.k
    lin_fits = np.empty((n, t_len))
    tree_fits = np.empty((n, t_len))
    for pi, p in enumerate(spec.quantiles):
        qc = ald.quantile_constants(p)
        f_path = state.f[pi]
        for i in range(n):
            rng = streams.block[pi][i]
            y, x = designs[i].y, designs[i].x
            om = state.omega[pi, i]
            lam_f = state.lam[pi, i] * f_path
            theta_nu = qc.theta * state.nu[pi, i]
            mix_var = qc.tau2 * state.sigma[pi, i] * state.nu[pi, i]
            lin = x @ state.beta[pi, i]
            # trees and leaf values
            if spec.trees_active:
                forest = state.forests[pi][i]
                resid = (y - (1.0 - om) * lin - lam_f - theta_nu) / om
                forest.backfit_sweep(resid, mix_var / om**2, rng)
                tree_fits[i] = forest.total_fit()
            else:
                tree_fits[i] = 0.0
            # regression coefficients
            prior_mean = state.pooled_full(pi)
            prior_var = state.phi2 * state.psi2[pi, i]
            if spec.omega_mode == "one":
                state.beta[pi, i] = prior_mean + np.sqrt(prior_var) * rng.standard_normal(k)
            else:
                sd = np.sqrt(mix_var)
                y_tilde = (y - om * tree_fits[i] - lam_f - theta_nu) / sd
                x_tilde = (1.0 - om) * x / sd[:, None]
                state.beta[pi, i] = shrinkage.sample_beta(
                    y_tilde, x_tilde, prior_mean, prior_var, rng
                )
            lin_fits[i] = x @ state.beta[pi, i]
        # cross-country pooled means (per-quantile barrier)
        if spec.prior == "hsp":
            rng_q = streams.quantile[pi]
            for j in range(state.n_domestic):
                state.pooled[pi, j] = shrinkage.sample_pooled_mean(
                    state.beta[pi, :, j],
                    state.phi2 * state.psi2[pi, :, j],
                    hy.pool_var,
                    rng_q,
                )
        for i in range(n):
            rng = streams.block[pi][i]
            y = designs[i].y
            lam_f = state.lam[pi, i] * f_path
            theta_nu = qc.theta * state.nu[pi, i]
            mix_var = qc.tau2 * state.sigma[pi, i] * state.nu[pi, i]
            # combination weight
            if estimated:
                state.omega[pi, i] = sample_omega(
                    y,
                    tree_fits[i],
                    lin_fits[i],
                    lam_f,
                    theta_nu,
                    mix_var,
                    state.omega[pi, i],
                    rng,
                )
            om = state.omega[pi, i]
            mean_no_factor = om * tree_fits[i] + (1.0 - om) * lin_fits[i]
            # factor loading
            if spec.factor_on:
                sd = np.sqrt(mix_var)
                y_hat = (y - mean_no_factor - theta_nu) / sd
                state.lam[pi, i] = sample_loadings(y_hat, f_path / sd, rng)
                lam_f = state.lam[pi, i] * f_path
            # error scale and latent mixing values
            w = y - mean_no_factor - lam_f
            state.sigma[pi, i] = ald.sample_sigma(
                w, state.nu[pi, i], p, hy.a_sigma, hy.b_sigma, rng
            )
            state.nu[pi, i] = ald.sample_nu(w, p, state.sigma[pi, i], rng)
            # local shrinkage scales
            state.psi2[pi, i], state.eta[pi, i] = shrinkage.sample_local_scales(
                state.beta[pi, i],
                state.pooled_full(pi),
                state.phi2,
                state.eta[pi, i],
                rng,
            )
        # factor and volatility (per-quantile barrier)
        if spec.factor_on:
            rng_q = streams.quantile[pi]
            theta_nu_all = qc.theta * state.nu[pi]
            om_col = state.omega[pi][:, None]
            ybar = (
                np.stack([d.y for d in designs])
                - om_col * tree_fits
                - (1.0 - om_col) * lin_fits
                - theta_nu_all
            )
            psi = qc.tau2 * state.sigma[pi][:, None] * state.nu[pi]
            state.f[pi] = sample_factor(ybar, state.lam[pi], psi, state.h[pi], rng_q)
            state.h[pi], state.sv[pi] = sample_volatility(
                state.f[pi], state.h[pi], state.sv[pi], rng_q
            )
    # global shrinkage scale (global barrier)
    pooled_all = np.stack([state.pooled_full(pi) for pi in range(state.p_len)])
    dev2 = (state.beta - pooled_all[:, None, :]) ** 2
    total = float(np.sum(dev2 / state.psi2))
    state.phi2, state.xi = shrinkage.sample_global_scale(
        total, state.p_len * n * k, state.xi, streams.global_
    )
    return state


class DrawStore:
    """Thinned post-burn-in posterior draws for one chain.

    Arrays are keyed by draw on the first axis: beta (D,P,N,K), omega,
    sigma, lam (D,P,N), f, h (D,P,T), sv (D,P,3), pooled (D,P,J),
    phi2 (D,), ghat (D,P,N,T).  Forests are kept as flattened node arrays
    per (draw, quantile, country) when the tree part is active.
    """

    def __init__(self, spec, seed, countries, dates, means, arrays, forests):
        self.spec = spec
        self.seed = seed
        self.countries = list(countries)
        self.dates = list(dates)
        self.means = np.asarray(means, dtype=float)
        self.arrays = arrays
        self.forests = forests  # [d][p][i] -> dict of node arrays, or None

    @property
    def n_draws(self):
        return self.arrays["omega"].shape[0]

    @property
    def quantiles(self):
        return self.spec.quantiles

    def forest(self, draw, pi, i):
        if self.forests is None:
            return None
        return Forest.from_arrays(self.forests[draw][pi][i])

    def predict_g(self, draw, pi, i, x_new):
        """Tree-ensemble prediction for one stored draw; zero when trees are off."""
        if self.forests is None:
            return np.zeros(np.atleast_2d(x_new).shape[0]) if np.ndim(x_new) > 1 else 0.0
        return self.forest(draw, pi, i).predict(x_new)

    # ---------------------------------------------------------- persistence

    def manifest(self):
        return {
            "version": STORE_VERSION,
            "seed": self.seed,
            "spec": self.spec.fingerprint(),
            "countries": self.countries,
            "dates": self.dates,
            "n_draws": self.n_draws,
            "n_countries": len(self.countries),
            "n_quantiles": len(self.spec.quantiles),
        }

    def save(self, directory):
        from pathlib import Path

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = json.dumps(self.manifest(), sort_keys=True, indent=2)
        (directory / "manifest.json").write_text(manifest + "\n")
        payload = dict(self.arrays)
        payload["means"] = self.means
        if self.forests is not None:
            feats, thresh, vals, tree_sizes, forest_trees, scales = [], [], [], [], [], []
            for per_draw in self.forests:
                for per_q in per_draw:
                    for packed in per_q:
                        feats.append(packed["feature"])
                        thresh.append(packed["threshold"])
                        vals.append(packed["value"])
                        tree_sizes.append(packed["tree_size"])
                        forest_trees.append(len(packed["tree_size"]))
                        scales.append(packed["leaf_scale"][0])
            payload["forest_feature"] = np.concatenate(feats)
            payload["forest_threshold"] = np.concatenate(thresh)
            payload["forest_value"] = np.concatenate(vals)
            payload["forest_tree_size"] = np.concatenate(tree_sizes)
            payload["forest_n_trees"] = np.asarray(forest_trees, dtype=np.int64)
            payload["forest_leaf_scale"] = np.asarray(scales)
        np.savez_compressed(directory / "draws.npz", **payload)
        return directory

    @classmethod
    def load(cls, directory):
        from pathlib import Path

        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        if manifest["version"] != STORE_VERSION:
            raise ConfigError(f"unsupported draw-store version {manifest['version']}")
        spec = ModelSpec.from_fingerprint(manifest["spec"])
        with np.load(directory / "draws.npz") as data:
            payload = {key: data[key] for key in data.files}
        means = payload.pop("means")
        forests = None
        if "forest_feature" in payload:
            n_draws = manifest["n_draws"]
            p_len = manifest["n_quantiles"]
            n = manifest["n_countries"]
            n_trees = payload.pop("forest_n_trees")
            tree_size = payload.pop("forest_tree_size")
            feature = payload.pop("forest_feature")
            threshold = payload.pop("forest_threshold")
            value = payload.pop("forest_value")
            scales = payload.pop("forest_leaf_scale")
            forests = []
            tree_pos = 0
            node_pos = 0
            flat = 0
            for d in range(n_draws):
                per_draw = []
                for pi in range(p_len):
                    per_q = []
                    for i in range(n):
                        sizes = tree_size[tree_pos : tree_pos + n_trees[flat]]
                        n_nodes = int(sizes.sum())
                        per_q.append(
                            {
                                "feature": feature[node_pos : node_pos + n_nodes],
                                "threshold": threshold[node_pos : node_pos + n_nodes],
                                "value": value[node_pos : node_pos + n_nodes],
                                "tree_size": sizes,
                                "leaf_scale": np.asarray([scales[flat]]),
                            }
                        )
                        tree_pos += n_trees[flat]
                        node_pos += n_nodes
                        flat += 1
                    per_draw.append(per_q)
                forests.append(per_draw)
        arrays = payload
        return cls(
            spec=spec,
            seed=manifest["seed"],
            countries=manifest["countries"],
            dates=manifest["dates"],
            means=means,
            arrays=arrays,
            forests=forests,
        )


def run_chain(designs, spec, seed, callback=None):
    """Run one MCMC chain and return the thinned post-burn-in draw store.

    Parameters
    ----------
    designs : list of DesignMatrix
        One per country, identical effective lengths and column counts.
    spec : ModelSpec
    seed : int
    callback : callable, optional
        Called with the sweep index every 500 sweeps (progress reporting).
    """
    t_lens = {d.y.size for d in designs}
    k_all = {d.x.shape[1] for d in designs}
    if len(t_lens) != 1 or len(k_all) != 1:
        raise DomainError("all country designs must share dimensions")
    state = ChainState(designs, spec)
    streams = RngStreams(seed, state.p_len, state.n)
    keep = {
        "beta": [],
        "omega": [],
        "sigma": [],
        "lam": [],
        "f": [],
        "h": [],
        "sv": [],
        "pooled": [],
        "phi2": [],
        "ghat": [],
    }
    forests = [] if spec.trees_active else None
    for s in range(spec.sweeps):
        try:
            sweep(state, designs, spec, streams)
        except ChainError:
            raise
        except Exception as exc:
            raise ChainError(f"conditional update failed: {exc}", sweep=s) from exc
        if s % 50 == 0:
            state.check_finite(s)
        if callback is not None and s % 500 == 0:
            callback(s)
        if s >= spec.burn_in and (s - spec.burn_in) % spec.thin == 0:
            keep["beta"].append(state.beta.copy())
            keep["omega"].append(state.omega.copy())
            keep["sigma"].append(state.sigma.copy())
            keep["lam"].append(state.lam.copy())
            keep["f"].append(state.f.copy())
            keep["h"].append(state.h.copy())
            keep["sv"].append(
                np.asarray([[q.mu, q.rho, q.sigma] for q in state.sv])
            )
            keep["pooled"].append(state.pooled.copy())
            keep["phi2"].append(state.phi2)
            keep["ghat"].append(
                np.stack(
                    [
                        np.stack([state.tree_fit(pi, i) for i in range(state.n)])
                        for pi in range(state.p_len)
                    ]
                )
            )
            if forests is not None:
                forests.append(
                    [
                        [state.forests[pi][i].to_arrays() for i in range(state.n)]
                        for pi in range(state.p_len)
                    ]
                )
    arrays = {key: np.asarray(val) for key, val in keep.items()}
    return DrawStore(
        spec=spec,
        seed=seed,
        countries=[d.country for d in designs],
        dates=[str(d) for d in designs[0].dates],
        means=[d.mean for d in designs],
        arrays=arrays,
        forests=forests,
    )
