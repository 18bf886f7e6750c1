"""Panel loading and design-matrix alignment."""

import numpy as np
import pandas as pd
import pytest

from qpanel.dgp import SyntheticDgpSpec, simulate_panel, write_panel_csv
from qpanel.errors import (
    DateRangeError,
    DomainError,
    InsufficientDataError,
    MissingDataError,
    SchemaError,
)
from qpanel.panel import (
    CovariateSpec,
    build_all_designs,
    build_design,
    forecast_covariates,
    load_panel,
    train_holdout_split,
)


@pytest.fixture(scope="module")
def panel(tmp_path_factory):
    data, _ = simulate_panel(SyntheticDgpSpec(n_countries=3, n_quarters=40), 17)
    path = tmp_path_factory.mktemp("panel") / "panel.csv"
    write_panel_csv(data, path)
    return data, path


class TestLoadPanel:
    def test_roundtrip(self, panel):
        data, path = panel
        loaded = load_panel(path, countries=data.countries)
        assert loaded.countries == data.countries
        assert (loaded.dates == data.dates).all()
        np.testing.assert_allclose(loaded.gdp, data.gdp)
        np.testing.assert_allclose(loaded.fci, data.fci)

    def test_default_order_lexicographic(self, panel):
        _, path = panel
        loaded = load_panel(path)
        assert list(loaded.countries) == sorted(loaded.countries)

    def test_manifest_order_respected(self, panel):
        data, path = panel
        order = tuple(reversed(data.countries))
        loaded = load_panel(path, countries=order)
        assert loaded.countries == order
        np.testing.assert_allclose(loaded.gdp, data.gdp[:, ::-1])

    def test_manifest_mismatch_raises(self, panel):
        _, path = panel
        with pytest.raises(SchemaError):
            load_panel(path, countries=["US"])  # others unlisted
        with pytest.raises(SchemaError):
            load_panel(path, countries=["US", "DE", "FR", "XX"])

    def test_missing_columns_raise(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        with pytest.raises(SchemaError):
            load_panel(bad)

    def test_unknown_variable_raises(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("country,date,variable,value\nUS,2000Q1,cpi,1.0\n")
        with pytest.raises(SchemaError):
            load_panel(bad)

    def test_bad_dates_raise(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("country,date,variable,value\nUS,notadate,gdp,1.0\n")
        with pytest.raises(SchemaError):
            load_panel(bad)

    def test_interior_gap_raises(self, panel, tmp_path):
        data, path = panel
        frame = pd.read_csv(path)
        gap_date = str(data.dates[5])
        keep = ~(
            (frame["country"] == data.countries[1])
            & (frame["date"] == gap_date)
            & (frame["variable"] == "gdp")
        )
        trimmed = tmp_path / "gap.csv"
        frame[keep].to_csv(trimmed, index=False)
        with pytest.raises(MissingDataError) as err:
            load_panel(trimmed)
        assert data.countries[1] in str(err.value)
        assert gap_date in str(err.value)

    def test_ragged_edges_trimmed(self, panel, tmp_path):
        data, path = panel
        frame = pd.read_csv(path)
        first = str(data.dates[0])
        keep = ~((frame["country"] == data.countries[0]) & (frame["date"] == first))
        trimmed = tmp_path / "ragged.csv"
        frame[keep].to_csv(trimmed, index=False)
        loaded = load_panel(trimmed)
        assert loaded.dates[0] == data.dates[1]
        assert loaded.n_periods == data.n_periods - 1


class TestCovariateSpec:
    def test_validation(self):
        with pytest.raises(SchemaError):
            CovariateSpec(kind="nope", horizon=1)
        with pytest.raises(DomainError):
            CovariateSpec(kind="ciss", horizon=0)

    def test_widths(self):
        assert CovariateSpec("ciss", 1).n_covariates(5) == 2
        assert CovariateSpec("ciss-cc", 1).n_covariates(5) == 10
        assert CovariateSpec("ciss", 1).n_domestic == 2


class TestBuildDesign:
    def test_alignment_oracle(self, panel):
        data, _ = panel
        h = 2
        d = build_design(data, data.countries[1], CovariateSpec("ciss", h))
        i = 1
        mean = data.gdp[:, i].mean()
        t_eff = data.n_periods - h
        assert d.y.shape == (t_eff,)
        assert d.x.shape == (t_eff, 2)
        # row t regresses y_{t+h} on information dated t
        np.testing.assert_allclose(d.y, data.gdp[h:, i] - mean)
        np.testing.assert_allclose(d.x[:, 0], data.gdp[:t_eff, i] - mean)
        np.testing.assert_allclose(d.x[:, 1], data.fci[:t_eff, i])
        assert d.dates[0] == data.dates[h]
        assert d.mean == pytest.approx(mean)

    def test_cross_country_contains_domestic_columns(self, panel):
        data, _ = panel
        spec_cc = CovariateSpec("ciss-cc", 1)
        spec_dom = CovariateSpec("ciss", 1)
        for c in data.countries:
            cc = build_design(data, c, spec_cc)
            dom = build_design(data, c, spec_dom)
            np.testing.assert_allclose(cc.x[:, :2], dom.x)
            assert cc.x.shape[1] == 2 * data.n_countries

    def test_insufficient_data(self, panel):
        data, _ = panel
        short = data.window(data.dates <= data.dates[2])
        with pytest.raises(InsufficientDataError):
            build_design(short, data.countries[0], CovariateSpec("ciss", 2))

    def test_all_designs_order(self, panel):
        data, _ = panel
        designs = build_all_designs(data, CovariateSpec("ciss", 1))
        assert [d.country for d in designs] == list(data.countries)


class TestForecastCovariates:
    def test_uses_last_quarter(self, panel):
        data, _ = panel
        x = forecast_covariates(data, data.countries[0], CovariateSpec("ciss", 1))
        np.testing.assert_allclose(
            x, [data.gdp[-1, 0] - data.gdp[:, 0].mean(), data.fci[-1, 0]]
        )

    def test_cross_country_width(self, panel):
        data, _ = panel
        x = forecast_covariates(data, data.countries[2], CovariateSpec("ciss-cc", 1))
        assert x.shape == (2 * data.n_countries,)
        # own pair comes first
        np.testing.assert_allclose(
            x[:2], [data.gdp[-1, 2] - data.gdp[:, 2].mean(), data.fci[-1, 2]]
        )


class TestSplit:
    def test_split_point(self, panel):
        data, _ = panel
        cut = str(data.dates[10])
        train, hold = train_holdout_split(data, cut)
        assert train.n_periods == 10
        assert hold.dates[0] == data.dates[10]
        assert train.n_periods + hold.n_periods == data.n_periods

    def test_edges_raise(self, panel):
        data, _ = panel
        with pytest.raises(DateRangeError):
            train_holdout_split(data, str(data.dates[0]))
        with pytest.raises(DateRangeError):
            train_holdout_split(data, str(data.dates[-1] + 1))
