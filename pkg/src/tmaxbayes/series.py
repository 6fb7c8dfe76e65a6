"""Annual and seasonal maximum temperature series: ingestion and descriptive statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .exceptions import DegenerateError, IngestError, ParseError, ShapeError, ValidationError

SEASONS = ("winter", "pre_monsoon", "monsoon", "post_monsoon")
COLUMNS = ("annual",) + SEASONS

# Header layout of the public All-India maximum temperature file.
DEFAULT_HEADERS = {
    "year": "YEAR",
    "annual": "ANNUAL",
    "winter": "JAN-FEB",
    "pre_monsoon": "MAR-MAY",
    "monsoon": "JUN-SEP",
    "post_monsoon": "OCT-DEC",
}


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SeasonalTable:
    """Per-year annual maxima with optional seasonal maxima (degrees C).

    Seasonal columns are ``None`` when absent from the source; individual
    missing seasonal cells are NaN. Annual values are always complete.
    """

    years: np.ndarray
    annual: np.ndarray
    winter: Optional[np.ndarray] = None
    pre_monsoon: Optional[np.ndarray] = None
    monsoon: Optional[np.ndarray] = None
    post_monsoon: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.years)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS:
            raise KeyError(f"unknown column {name!r}; expected one of {COLUMNS}")
        values = getattr(self, name)
        if values is None:
            raise ValidationError(f"column {name!r} is not present in this table")
        return values

    @property
    def has_seasons(self) -> bool:
        return all(getattr(self, s) is not None for s in SEASONS)

    def equals(self, other: "SeasonalTable") -> bool:
        if not np.array_equal(self.years, other.years):
            return False
        for name in COLUMNS:
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b, equal_nan=True):
                return False
        return True


def make_table(years, annual, *, allow_seasonal_exceed=False, **seasons) -> SeasonalTable:
    """Validate raw arrays and build a :class:`SeasonalTable` sorted by year."""
    years = np.asarray(years)
    if years.ndim != 1:
        raise ShapeError("years must be one-dimensional")
    if not np.issubdtype(years.dtype, np.integer):
        if not np.all(np.equal(np.mod(years, 1), 0)):
            raise IngestError("years must be integers")
    years = years.astype(np.int64)
    annual = np.asarray(annual, dtype=float)
    if annual.shape != years.shape:
        raise ShapeError("annual and years must have the same length")
    extra = set(seasons) - set(SEASONS)
    if extra:
        raise KeyError(f"unknown seasonal columns: {sorted(extra)}")

    order = np.argsort(years, kind="stable")
    years = years[order]
    annual = annual[order]
    uniq, counts = np.unique(years, return_counts=True)
    if np.any(counts > 1):
        raise IngestError(f"duplicate years: {uniq[counts > 1].tolist()}")
    if len(years) < 3:
        raise ValidationError(f"need at least 3 years, got {len(years)}")
    gaps = np.flatnonzero(np.diff(years) != 1)
    if gaps.size:
        missing = sorted(set(range(years[0], years[-1] + 1)) - set(years.tolist()))
        raise IngestError(f"missing years: {missing}")
    if not np.all(np.isfinite(annual)):
        bad = years[~np.isfinite(annual)]
        raise ValidationError(f"annual values missing or non-finite for years {bad.tolist()}", years=bad)

    cols = {}
    offenders = set()
    for name in SEASONS:
        values = seasons.get(name)
        if values is None:
            cols[name] = None
            continue
        values = np.asarray(values, dtype=float)
        if values.shape != years.shape:
            raise ShapeError(f"column {name!r} has the wrong length")
        values = values[order]
        if np.any(np.isinf(values)):
            raise ValidationError(f"non-finite values in {name!r}", years=years[np.isinf(values)])
        with np.errstate(invalid="ignore"):
            over = values > annual
        offenders.update(years[over].tolist())
        cols[name] = values
    if offenders and not allow_seasonal_exceed:
        bad = sorted(offenders)
        raise ValidationError(f"seasonal maximum exceeds annual maximum in years {bad}", years=bad)

    return SeasonalTable(
        years=_frozen_int(years),
        annual=_frozen(annual),
        **{k: (None if v is None else _frozen(v)) for k, v in cols.items()},
    )


def _frozen_int(a):
    a = np.array(a, dtype=np.int64)
    a.setflags(write=False)
    return a


def load_csv(
    path,
    column_map: Optional[Mapping[str, str]] = None,
    *,
    allow_seasonal_exceed: bool = False,
) -> SeasonalTable:
    """Read a seasonal maximum temperature table from CSV.

    Parameters
    ----------
    path : path-like
        UTF-8, comma separated file with a header row.
    column_map : mapping, optional
        Overrides for the header names, keyed by ``year``, ``annual``,
        ``winter``, ``pre_monsoon``, ``monsoon``, ``post_monsoon``.
    allow_seasonal_exceed : bool
        Accept rows whose seasonal maximum is above the annual maximum.
    """
    headers = dict(DEFAULT_HEADERS)
    if column_map:
        unknown = set(column_map) - set(headers)
        if unknown:
            raise KeyError(f"unknown column_map keys: {sorted(unknown)}")
        headers.update(column_map)

    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        index = {h: i for i, h in enumerate(header)}
        for key in ("year", "annual"):
            if headers[key] not in index:
                raise IngestError(f"{path}: required column {headers[key]!r} not found in header {header}")
        present = [s for s in SEASONS if headers[s] in index]

        years, annual = [], []
        seasons = {s: [] for s in present}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            years.append(_parse_year(row, index[headers["year"]], lineno, headers["year"]))
            annual.append(_parse_float(row, index[headers["annual"]], lineno, headers["annual"], required=True))
            for s in present:
                seasons[s].append(_parse_float(row, index[headers[s]], lineno, headers[s], required=False))

    if not years:
        raise IngestError(f"{path}: no data rows")
    return make_table(years, annual, allow_seasonal_exceed=allow_seasonal_exceed, **seasons)


def _cell(row, col):
    return row[col].strip() if col < len(row) else ""


def _parse_year(row, col, lineno, name):
    text = _cell(row, col)
    try:
        return int(text)
    except ValueError:
        try:
            value = float(text)
        except ValueError:
            raise IngestError(f"row {lineno}, column {name!r}: cannot parse year {text!r}") from None
        if not value.is_integer():
            raise IngestError(f"row {lineno}, column {name!r}: year {text!r} is not an integer")
        return int(value)


def _parse_float(row, col, lineno, name, required):
    text = _cell(row, col)
    if text == "" or text.upper() in ("NA", "NAN"):
        if required:
            raise IngestError(f"row {lineno}, column {name!r}: missing value")
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"row {lineno}, column {name!r}: non-numeric value {text!r}", row=lineno, column=name) from None
    if not math.isfinite(value):
        raise ParseError(f"row {lineno}, column {name!r}: non-finite value {text!r}", row=lineno, column=name)
    return value


def write_csv(table: SeasonalTable, path, column_map: Optional[Mapping[str, str]] = None) -> None:
    """Serialize a table so that :func:`load_csv` reads it back unchanged."""
    headers = dict(DEFAULT_HEADERS)
    if column_map:
        headers.update(column_map)
    names = ["year", "annual"] + [s for s in SEASONS if getattr(table, s) is not None]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([headers[n] for n in names])
        for i, year in enumerate(table.years):
            row = [str(int(year))]
            for n in names[1:]:
                v = float(getattr(table, n)[i])
                row.append("" if math.isnan(v) else repr(v))
            w.writerow(row)


@dataclass(frozen=True, eq=False)
class NormalizedSeries:
    """A single column prepared for model fitting.

    ``t`` is the observation index mapped onto [0, 1]; ``x_std`` is the
    year centred and divided by its sample (ddof=1) standard deviation.
    """

    years: np.ndarray
    t: np.ndarray
    x_std: np.ndarray
    y: np.ndarray
    origin_year: int
    year_mean: float
    year_sd: float

    def __len__(self):
        return len(self.y)

    def time_of(self, years) -> np.ndarray:
        years = np.asarray(years, dtype=float)
        return (years - self.origin_year) / (self.years[-1] - self.origin_year)

    def standardize(self, years) -> np.ndarray:
        return (np.asarray(years, dtype=float) - self.year_mean) / self.year_sd


def series_from_arrays(years, y) -> NormalizedSeries:
    """Build a :class:`NormalizedSeries` from consecutive years and values."""
    years = np.asarray(years)
    y = np.asarray(y, dtype=float)
    if years.ndim != 1 or y.shape != years.shape:
        raise ShapeError("years and y must be 1-D arrays of equal length")
    n = len(y)
    if n < 3:
        raise ValidationError(f"need at least 3 observations, got {n}")
    if not np.all(np.isfinite(y)):
        raise ValidationError("series contains missing or non-finite values")
    if np.any(np.diff(years) != 1):
        raise IngestError("years must be consecutive and increasing")
    years = years.astype(np.int64)
    yf = years.astype(float)
    mean = yf.mean()
    sd = yf.std(ddof=1)
    t = np.arange(n, dtype=float) / (n - 1)
    return NormalizedSeries(
        years=_frozen_int(years),
        t=_frozen(t),
        x_std=_frozen((yf - mean) / sd),
        y=_frozen(y),
        origin_year=int(years[0]),
        year_mean=float(mean),
        year_sd=float(sd),
    )


def normalize(table: SeasonalTable, column: str = "annual") -> NormalizedSeries:
    values = table.column(column)
    if np.any(np.isnan(values)):
        raise ValidationError(f"column {column!r} has missing values", years=table.years[np.isnan(values)])
    return series_from_arrays(table.years, values)


def write_normalized_csv(series: NormalizedSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "t", "x_std", "y"])
        for row in zip(series.years, series.t, series.x_std, series.y):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


@dataclass(frozen=True, eq=False)
class IncrementSeries:
    """Year-on-year differences of a series (degrees C per year)."""

    deltas: np.ndarray
    start: float

    def __len__(self):
        return len(self.deltas)

    def reconstruct(self) -> np.ndarray:
        return np.concatenate([[self.start], self.start + np.cumsum(self.deltas)])


def increments(series) -> IncrementSeries:
    """First differences of ``series.y`` (or of a plain array)."""
    y = np.asarray(getattr(series, "y", series), dtype=float)
    if y.ndim != 1 or len(y) < 2:
        raise ValidationError("need at least 2 observations to form increments")
    return IncrementSeries(deltas=_frozen(np.diff(y)), start=float(y[0]))


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("pearson needs two 1-D arrays of equal length")
    if len(a) < 3:
        raise ValidationError("pearson needs at least 3 observations")
    da = a - a.mean()
    db = b - b.mean()
    saa = np.dot(da, da)
    sbb = np.dot(db, db)
    if saa == 0.0 or sbb == 0.0:
        raise DegenerateError("correlation undefined for a zero-variance series")
    r = np.dot(da, db) / math.sqrt(saa * sbb)
    return float(min(1.0, max(-1.0, r)))


def correlation_matrix(table: SeasonalTable) -> np.ndarray:
    """Pearson correlations between the annual and four seasonal columns.

    Rows and columns follow :data:`COLUMNS`. A set of identical columns is
    reported as perfectly correlated even when constant.
    """
    cols = []
    for name in COLUMNS:
        values = table.column(name)
        if np.any(np.isnan(values)):
            raise ValidationError(f"column {name!r} has missing values")
        cols.append(values)
    k = len(cols)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            if np.array_equal(cols[i], cols[j]):
                r = 1.0
            else:
                r = pearson(cols[i], cols[j])
            out[i, j] = out[j, i] = r
    return out


def write_matrix_csv(matrix, labels, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(labels))
        for label, row in zip(labels, np.asarray(matrix)):
            w.writerow([label] + [repr(float(v)) for v in row])


def read_matrix_csv(path):
    """Inverse of :func:`write_matrix_csv`; returns ``(matrix, labels)``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    matrix = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    if matrix.shape != (len(labels), len(labels)):
        raise ShapeError(f"{path}: expected a square labelled matrix")
    return matrix, labels
