"""Panel ingestion and design-matrix construction.

Input CSV is long format with columns ``country,date,variable,value`` where
``variable`` is ``gdp`` (annualized quarterly growth, percent) or ``fci``
(financial-conditions index, higher = tighter) and dates look like ``1999Q3``.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import (
    DateRangeError,
    DomainError,
    InsufficientDataError,
    MissingDataError,
    SchemaError,
)

__all__ = [
    "PanelDataset",
    "CovariateSpec",
    "DesignMatrix",
    "load_panel",
    "build_design",
    "build_all_designs",
    "forecast_covariates",
    "train_holdout_split",
]

VARIABLES = ("gdp", "fci")


@dataclass(frozen=True)
class PanelDataset:
    """Aligned country-by-quarter panel of growth and financial conditions."""

    countries: tuple
    dates: pd.PeriodIndex
    gdp: np.ndarray  # T x N
    fci: np.ndarray  # T x N

    @property
    def n_countries(self):
        return len(self.countries)

    @property
    def n_periods(self):
        return len(self.dates)

    def country_index(self, country):
        try:
            return self.countries.index(country)
        except ValueError:
            raise SchemaError(f"unknown country {country!r}") from None

    def window(self, mask):
        return PanelDataset(
            countries=self.countries,
            dates=self.dates[mask],
            gdp=self.gdp[mask],
            fci=self.fci[mask],
        )


@dataclass(frozen=True)
class CovariateSpec:
    """Covariate-set choice: domestic only ('ciss') or cross-country ('ciss-cc')."""

    kind: str
    horizon: int

    def __post_init__(self):
        if self.kind not in ("ciss", "ciss-cc"):
            raise SchemaError(f"unknown covariate kind {self.kind!r}")
        if self.horizon < 1:
            raise DomainError("horizon must be a positive integer")

    def n_covariates(self, n_countries):
        return 2 if self.kind == "ciss" else 2 * n_countries

    @property
    def n_domestic(self):
        return 2


@dataclass(frozen=True)
class DesignMatrix:
    """Per-country response/regressor pair with direct-forecast alignment.

    Row t of ``x`` holds information dated t - h only; ``y`` is demeaned by
    the country's training-sample mean, which is kept for re-adding.
    """

    country: str
    y: np.ndarray
    x: np.ndarray
    mean: float
    dates: pd.PeriodIndex  # dates of the response entries


def load_panel(path, countries=None):
    """Read a long-format panel CSV and align it on the common quarter span.

    Parameters
    ----------
    path : str or Path
        CSV with columns country,date,variable,value.
    countries : sequence of str, optional
        Manifest fixing the country ordering.  Defaults to lexicographic.
        Countries in the file but absent from the manifest raise SchemaError.
    """
    frame = pd.read_csv(path)
    required = {"country", "date", "variable", "value"}
    if not required.issubset(frame.columns):
        raise SchemaError(f"panel CSV must have columns {sorted(required)}")
    bad = set(frame["variable"].unique()) - set(VARIABLES)
    if bad:
        raise SchemaError(f"unknown variables in panel CSV: {sorted(bad)}")
    present = sorted(frame["country"].unique())
    if countries is None:
        countries = present
    else:
        countries = list(countries)
        unknown = set(present) - set(countries)
        if unknown:
            raise SchemaError(f"countries missing from manifest: {sorted(unknown)}")
        missing = set(countries) - set(present)
        if missing:
            raise SchemaError(f"manifest countries absent from data: {sorted(missing)}")
    try:
        frame["date"] = pd.PeriodIndex(frame["date"], freq="Q")
    except Exception as exc:  # malformed period strings
        raise SchemaError(f"dates must be quarterly YYYYQn: {exc}") from None

    wide = {}
    for var in VARIABLES:
        sub = frame[frame["variable"] == var]
        piv = sub.pivot_table(index="date", columns="country", values="value", aggfunc="first")
        wide[var] = piv.reindex(columns=countries)

    full = pd.concat([wide["gdp"], wide["fci"]], axis=1).sort_index()
    valid = full.notna().all(axis=1).to_numpy()
    if not valid.any():
        raise SchemaError("no quarter has complete observations for all series")
    first, last = np.argmax(valid), len(valid) - 1 - np.argmax(valid[::-1])
    interior = ~valid[first : last + 1]
    if interior.any():
        t = first + int(np.argmax(interior))
        date = full.index[t]
        row = full.iloc[t]
        col = row.index[row.isna().to_numpy().argmax()]
        raise MissingDataError(col, str(date))
    dates = pd.PeriodIndex(full.index[first : last + 1], freq="Q")
    gdp = wide["gdp"].sort_index().iloc[first : last + 1].to_numpy(dtype=float)
    fci = wide["fci"].sort_index().iloc[first : last + 1].to_numpy(dtype=float)
    return PanelDataset(countries=tuple(countries), dates=dates, gdp=gdp, fci=fci)


def _country_columns(data, i, h):
    """Lagged [gdp, fci] pair for country i, rows aligned to responses at t.

    Growth lags are demeaned by the country's own full-window mean so that a
    cross-country design restricted to a country's own pair coincides with
    the domestic design.
    """
    t_eff = data.n_periods - h
    g = data.gdp[:, i] - data.gdp[:, i].mean()
    return np.column_stack([g[:t_eff], data.fci[:t_eff, i]])


def build_design(data, country, spec):
    """Assemble the horizon-h design matrix for one country.

    Column order is [own growth lag, own FCI lag] and, for the cross-country
    set, the remaining countries' pairs in the fixed panel order.
    """
    h = spec.horizon
    if data.n_periods <= h + 1:
        raise InsufficientDataError(
            f"need more than {h + 1} quarters for horizon {h}, have {data.n_periods}"
        )
    i = data.country_index(country)
    mean = float(data.gdp[:, i].mean())
    y = data.gdp[h:, i] - mean
    cols = [_country_columns(data, i, h)]
    if spec.kind == "ciss-cc":
        cols.extend(_country_columns(data, j, h) for j in range(data.n_countries) if j != i)
    x = np.concatenate(cols, axis=1)
    return DesignMatrix(country=country, y=y, x=x, mean=mean, dates=data.dates[h:])


def build_all_designs(data, spec):
    """Designs for every country, in panel order."""
    return [build_design(data, c, spec) for c in data.countries]


def forecast_covariates(data, country, spec):
    """Covariate vector using the final quarter's information (targets T + h)."""
    i = data.country_index(country)
    own = np.array([data.gdp[-1, i] - data.gdp[:, i].mean(), data.fci[-1, i]])
    if spec.kind == "ciss":
        return own
    rest = [
        np.array([data.gdp[-1, j] - data.gdp[:, j].mean(), data.fci[-1, j]])
        for j in range(data.n_countries)
        if j != i
    ]
    return np.concatenate([own] + rest)


def train_holdout_split(data, first_holdout):
    """Split the panel so that training ends the quarter before first_holdout."""
    cut = pd.Period(first_holdout, freq="Q")
    if cut <= data.dates[0] or cut > data.dates[-1]:
        raise DateRangeError(
            f"first holdout quarter {cut} must lie strictly inside "
            f"[{data.dates[0]}, {data.dates[-1]}]"
        )
    train_mask = data.dates < cut
    return data.window(train_mask), data.window(~train_mask)
