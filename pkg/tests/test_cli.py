"""CLI subcommands: configs, outputs, exit codes."""

import filecmp
import json

import pandas as pd
import pytest

from qpanel.cli import main

FAST_MODEL = """
[model]
covariates = "ciss-cc"
horizon = 1
quantiles = [0.1, 0.5, 0.9]
sweeps = 60
burn_in = 20
thin = 4
[model.hyper]
n_trees = 8
"""


def _write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Simulated panel plus one estimated store shared by the read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    sim = _write(
        root / "sim.toml",
        f'seed = 3\noutdir = "{root / "data"}"\n[dgp]\nkind = "nonlinear-tail"\n'
        "n_countries = 2\nn_quarters = 60\n",
    )
    assert main(["simulate", "-c", sim]) == 0
    est = _write(
        root / "est.toml",
        f'seed = 5\noutdir = "{root / "est"}"\ndata = "{root / "data" / "panel.csv"}"\n'
        + FAST_MODEL,
    )
    assert main(["estimate", "-c", est]) == 0
    return root


class TestSimulate:
    def test_outputs(self, workdir):
        assert (workdir / "data" / "panel.csv").exists()
        truth = json.loads((workdir / "data" / "truth.json").read_text())
        assert truth["dgp"]["n_countries"] == 2

    def test_bad_kind_is_config_error(self, tmp_path):
        cfg = _write(
            tmp_path / "c.toml", f'outdir = "{tmp_path}"\n[dgp]\nkind = "chaos"\n'
        )
        assert main(["simulate", "-c", cfg]) == 1

    def test_unknown_dgp_field_is_config_error(self, tmp_path):
        cfg = _write(
            tmp_path / "c.toml", f'outdir = "{tmp_path}"\n[dgp]\nwat = 3\n'
        )
        assert main(["simulate", "-c", cfg]) == 1


class TestConfigHandling:
    def test_missing_config_file(self):
        assert main(["simulate", "-c", "/nonexistent.toml"]) == 1

    def test_malformed_toml(self, tmp_path):
        cfg = _write(tmp_path / "c.toml", "not == toml [")
        assert main(["simulate", "-c", cfg]) == 1

    def test_missing_required_key(self, tmp_path):
        cfg = _write(tmp_path / "c.toml", 'seed = 1\n')  # no outdir
        assert main(["simulate", "-c", cfg]) == 1

    def test_seed_and_outdir_overrides(self, tmp_path):
        cfg = _write(tmp_path / "c.toml", "[dgp]\nn_countries = 2\nn_quarters = 40\n")
        out = tmp_path / "over"
        assert main(["simulate", "-c", cfg, "--seed", "9", "--outdir", str(out)]) == 0
        truth = json.loads((out / "truth.json").read_text())
        assert truth["seed"] == 9


class TestEstimate:
    def test_outputs(self, workdir):
        est = workdir / "est"
        assert (est / "store" / "manifest.json").exists()
        assert (est / "store" / "draws.npz").exists()
        assert (est / "omega_trace.csv").exists()
        assert (est / "omega_trace.png").exists()
        assert (est / "factor_summary.csv").exists()
        assert (est / "factor_p0.5.png").exists()

    def test_missing_data_is_data_error(self, tmp_path):
        cfg = _write(
            tmp_path / "c.toml",
            f'outdir = "{tmp_path}"\ndata = "{tmp_path / "nope.csv"}"\n' + FAST_MODEL,
        )
        assert main(["estimate", "-c", cfg]) == 2

    def test_bad_model_key_is_config_error(self, workdir, tmp_path):
        cfg = _write(
            tmp_path / "c.toml",
            f'outdir = "{tmp_path}"\ndata = "{workdir / "data" / "panel.csv"}"\n'
            "[model]\nwat = 1\n",
        )
        assert main(["estimate", "-c", cfg]) == 1

    def test_bad_train_end_is_data_error(self, workdir, tmp_path):
        cfg = _write(
            tmp_path / "c.toml",
            f'outdir = "{tmp_path}"\ndata = "{workdir / "data" / "panel.csv"}"\n'
            'train_end = "2200Q1"\n' + FAST_MODEL,
        )
        assert main(["estimate", "-c", cfg]) == 2


class TestForecast:
    def test_deterministic_outputs(self, workdir, tmp_path):
        outs = []
        for run in ("a", "b"):
            cfg = _write(
                tmp_path / f"f{run}.toml",
                f'seed = 5\noutdir = "{tmp_path / run}"\nstore = "{workdir / "est" / "store"}"\n'
                f'data = "{workdir / "data" / "panel.csv"}"\n',
            )
            assert main(["forecast", "-c", cfg]) == 0
            outs.append(tmp_path / run / "forecast.csv")
        assert filecmp.cmp(*outs, shallow=False)
        frame = pd.read_csv(outs[0])
        assert set(frame["country"]) == {"US", "DE"}
        assert len(frame) == 6  # 3 quantiles x 2 countries


class TestGirf:
    def test_factor_target(self, workdir, tmp_path):
        cfg = _write(
            tmp_path / "g.toml",
            f'seed = 2\noutdir = "{tmp_path / "g"}"\nstore = "{workdir / "est" / "store"}"\n'
            f'data = "{workdir / "data" / "panel.csv"}"\ntarget = "factor"\n'
            "horizons = 3\nmax_draws = 2\norigin_stride = 12\n",
        )
        assert main(["girf", "-c", cfg]) == 0
        assert (tmp_path / "g" / "girf_factor.csv").exists()
        assert (tmp_path / "g" / "girf_factor.png").exists()

    def test_fci_target(self, workdir, tmp_path):
        cfg = _write(
            tmp_path / "g.toml",
            f'seed = 2\noutdir = "{tmp_path / "g"}"\nstore = "{workdir / "est" / "store"}"\n'
            f'data = "{workdir / "data" / "panel.csv"}"\ntarget = "fci"\n'
            "sizes = [-1, 1]\nmax_draws = 2\norigin_stride = 12\n",
        )
        assert main(["girf", "-c", cfg]) == 0
        assert (tmp_path / "g" / "girf_fci.csv").exists()
        pngs = list((tmp_path / "g").glob("fci_girf_*.png"))
        assert pngs

    def test_multi_step_store_is_contract_error(self, workdir, tmp_path):
        est = _write(
            tmp_path / "est4.toml",
            f'seed = 5\noutdir = "{tmp_path / "h4"}"\ndata = "{workdir / "data" / "panel.csv"}"\n'
            + FAST_MODEL.replace("horizon = 1", "horizon = 4"),
        )
        assert main(["estimate", "-c", est]) == 0
        cfg = _write(
            tmp_path / "g.toml",
            f'outdir = "{tmp_path / "g"}"\nstore = "{tmp_path / "h4" / "store"}"\n'
            f'data = "{workdir / "data" / "panel.csv"}"\ntarget = "factor"\nmax_draws = 1\n',
        )
        assert main(["girf", "-c", cfg]) == 4

    def test_unknown_target_is_config_error(self, workdir, tmp_path):
        cfg = _write(
            tmp_path / "g.toml",
            f'outdir = "{tmp_path / "g"}"\nstore = "{workdir / "est" / "store"}"\n'
            f'data = "{workdir / "data" / "panel.csv"}"\ntarget = "sunspots"\n',
        )
        assert main(["girf", "-c", cfg]) == 1


class TestVardecomp:
    def test_outputs(self, workdir, tmp_path):
        cfg = _write(
            tmp_path / "v.toml",
            f'outdir = "{tmp_path / "v"}"\nstore = "{workdir / "est" / "store"}"\n',
        )
        assert main(["vardecomp", "-c", cfg]) == 0
        frame = pd.read_csv(tmp_path / "v" / "vardecomp.csv", index_col=0)
        assert sorted(frame.columns) == ["DE", "US"]
        assert ((frame >= 0) & (frame <= 1)).all().all()
        assert (tmp_path / "v" / "vardecomp.png").exists()

    def test_no_factor_store_is_contract_error(self, workdir, tmp_path):
        est = _write(
            tmp_path / "estnf.toml",
            f'seed = 5\noutdir = "{tmp_path / "nf"}"\ndata = "{workdir / "data" / "panel.csv"}"\n'
            + FAST_MODEL.replace("[model]", "[model]\nfactor_on = false"),
        )
        assert main(["estimate", "-c", est]) == 0
        cfg = _write(
            tmp_path / "v.toml",
            f'outdir = "{tmp_path / "v"}"\nstore = "{tmp_path / "nf" / "store"}"\n',
        )
        assert main(["vardecomp", "-c", cfg]) == 4


class TestEvaluate:
    def test_small_run(self, workdir, tmp_path):
        data = workdir / "data" / "panel.csv"
        first = "1988Q2"
        cfg = _write(
            tmp_path / "e.toml",
            f"""
seed = 4
outdir = "{tmp_path / "e"}"
data = "{data}"
first_holdout = "{first}"
horizons = [1]
[models.bench]
covariates = "ciss"
omega_mode = "zero"
factor_on = false
quantiles = [0.1, 0.5, 0.9]
sweeps = 40
burn_in = 20
thin = 4
[models.bench.hyper]
n_trees = 4
[models.full]
covariates = "ciss"
omega_mode = "estimated"
factor_on = true
quantiles = [0.1, 0.5, 0.9]
sweeps = 40
burn_in = 20
thin = 4
[models.full.hyper]
n_trees = 4
""",
        )
        assert main(["evaluate", "-c", cfg]) == 0
        out = tmp_path / "e"
        ratios = pd.read_csv(out / "scores_ratio.csv")
        assert set(ratios["model"]) == {"bench", "full"}
        payload = json.loads((out / "scores.json").read_text())
        assert payload["benchmark"] == "bench"
        for scheme in ("none", "tails", "left", "right", "center"):
            assert (out / f"crps_heatmap_{scheme}.png").exists()

    def test_no_models_is_config_error(self, workdir, tmp_path):
        cfg = _write(
            tmp_path / "e.toml",
            f'outdir = "{tmp_path}"\ndata = "{workdir / "data" / "panel.csv"}"\n'
            'first_holdout = "1988Q2"\n',
        )
        assert main(["evaluate", "-c", cfg]) == 1
