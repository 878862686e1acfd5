"""Johns Hopkins CSSE time-series ingestion.

Reads the wide-format global CSVs (``Province/State, Country/Region, Lat,
Long, <M/D/YY>...``), sums provinces per country, aligns day 0 to the epidemic
onset and stores one small per-country series (``day,A,R,D`` CSV plus a JSON
header) that the inference code consumes.
"""

import csv
import json
import re
import warnings
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import CountryNotFound, DataWarning, MalformedCsv, OnsetNotReached

JHU_LEADING_COLUMNS = ["Province/State", "Country/Region", "Lat", "Long"]
DEFAULT_ONSET_THRESHOLD = 100


@dataclass(frozen=True)
class JhuCounts:
    """Cumulative per-day counts for one country, straight from the CSVs."""

    country: str
    dates: tuple
    confirmed: np.ndarray
    recovered: np.ndarray
    deaths: np.ndarray


@dataclass(frozen=True)
class ObservedSeries:
    country: str
    population: float
    start_date: date
    A: np.ndarray
    R: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(x, dtype=np.float64) for x in (self.A, self.R, self.D)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1 or arrays[0].size == 0:
            raise ValueError("A, R and D must be nonempty 1-d arrays of equal length")
        for name, a in zip("ARD", arrays):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if np.any(self.A < 0):
            raise ValueError("active counts must be nonnegative")
        if np.any(np.diff(self.R) < 0) or np.any(np.diff(self.D) < 0):
            raise ValueError("R and D must be non-decreasing")
        if not self.population > np.max(self.A + self.R + self.D):
            raise ValueError("population must exceed every day's A + R + D")

    @property
    def days(self):
        return self.A.shape[0]

    @property
    def day0(self):
        return float(self.A[0]), float(self.R[0]), float(self.D[0])

    def window(self, days=None):
        """``(3, days)`` array of A, R, D starting at day 0."""
        days = self.days if days is None else days
        if days > self.days:
            raise ValueError(f"series has {self.days} days, {days} requested")
        return np.stack([self.A[:days], self.R[:days], self.D[:days]])

    def save(self, directory):
        """Write ``<slug>.csv`` and ``<slug>.json`` into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        slug = country_slug(self.country)
        with open(directory / f"{slug}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["day", "A", "R", "D"])
            for day in range(self.days):
                writer.writerow([day] + [_fmt(x[day]) for x in (self.A, self.R, self.D)])
        header = {
            "country": self.country,
            "population": _fmt(self.population),
            "start_date": self.start_date.isoformat(),
            "days": self.days,
        }
        (directory / f"{slug}.json").write_text(json.dumps(header, indent=2) + "\n")

    @classmethod
    def load(cls, directory, country):
        directory = Path(directory)
        slug = country_slug(country)
        header_path = directory / f"{slug}.json"
        if not header_path.exists():
            raise CountryNotFound(f"no ingested series for {country!r} in {directory}")
        header = json.loads(header_path.read_text())
        table = np.loadtxt(directory / f"{slug}.csv", delimiter=",", skiprows=1, ndmin=2)
        if table.shape[0] != header["days"]:
            raise MalformedCsv(f"{slug}.csv has {table.shape[0]} rows, header says {header['days']}")
        return cls(
            country=header["country"],
            population=float(header["population"]),
            start_date=date.fromisoformat(header["start_date"]),
            A=table[:, 1],
            R=table[:, 2],
            D=table[:, 3],
        )


def country_slug(country):
    return re.sub(r"[^a-z0-9]+", "_", country.lower()).strip("_")


def _fmt(x):
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def _running_max_fix(values, label):
    fixed = np.maximum.accumulate(values)
    dips = np.flatnonzero(fixed != values)
    if dips.size:
        warnings.warn(
            f"{label}: cumulative counts decrease on {dips.size} day(s) "
            f"(first at column {dips[0]}); clamped to running maximum",
            DataWarning,
            stacklevel=3,
        )
    return fixed


def _read_jhu_file(path, country):
    try:
        frame = pd.read_csv(path, dtype={"Province/State": str, "Country/Region": str})
    except pd.errors.ParserError as exc:
        raise MalformedCsv(f"{path}: {exc}") from exc
    if list(frame.columns[:4]) != JHU_LEADING_COLUMNS:
        raise MalformedCsv(
            f"{path}: leading columns {list(frame.columns[:4])}, expected {JHU_LEADING_COLUMNS}"
        )
    date_columns = list(frame.columns[4:])
    if not date_columns:
        raise MalformedCsv(f"{path}: no date columns")
    try:
        dates = tuple(datetime.strptime(c, "%m/%d/%y").date() for c in date_columns)
    except ValueError as exc:
        raise MalformedCsv(f"{path}: bad date header ({exc})") from exc
    rows = frame[frame["Country/Region"] == country]
    if rows.empty:
        raise CountryNotFound(f"{country!r} not found in {path}")
    values = rows[date_columns]
    if values.isna().any().any():
        raise MalformedCsv(f"{path}: missing values in rows for {country!r}")
    try:
        totals = values.astype(np.float64).sum(axis=0).to_numpy()
    except ValueError as exc:
        raise MalformedCsv(f"{path}: non-numeric counts for {country!r}") from exc
    return dates, totals


def parse_jhu_csv(confirmed_path, recovered_path, deaths_path, country):
    """Province-summed cumulative confirmed/recovered/deaths for ``country``.

    Decreasing cumulative counts (JHU revisions) are clamped to the running
    maximum with a :class:`DataWarning`.
    """
    series = {}
    dates = None
    for label, path in (("confirmed", confirmed_path), ("recovered", recovered_path),
                        ("deaths", deaths_path)):
        file_dates, totals = _read_jhu_file(path, country)
        if dates is None:
            dates = file_dates
        elif file_dates != dates:
            raise MalformedCsv(f"{path}: date columns differ from the confirmed file")
        series[label] = _running_max_fix(totals, f"{country} {label}")
    return JhuCounts(country, dates, series["confirmed"], series["recovered"], series["deaths"])


def derive_observed(confirmed, recovered, deaths, population,
                    onset_threshold=DEFAULT_ONSET_THRESHOLD, country="", dates=None):
    """Cut the cumulative series at onset and split confirmed into A, R, D.

    Day 0 is the first day with ``confirmed >= onset_threshold``.  Active
    cases are ``confirmed - recovered - deaths``; negative values (possible
    with inconsistent source data) are clamped to 0 with a warning.
    """
    confirmed = np.asarray(confirmed, dtype=np.float64)
    recovered = np.asarray(recovered, dtype=np.float64)
    deaths = np.asarray(deaths, dtype=np.float64)
    if confirmed.size == 0 or not confirmed.shape == recovered.shape == deaths.shape:
        raise ValueError("confirmed, recovered and deaths must be nonempty and equally long")
    hits = np.flatnonzero(confirmed >= onset_threshold)
    if hits.size == 0:
        raise OnsetNotReached(
            f"{country or 'series'} never reaches {onset_threshold} confirmed cases "
            f"(max {confirmed.max():g})"
        )
    start = int(hits[0])
    active = confirmed[start:] - recovered[start:] - deaths[start:]
    if np.any(active < 0):
        warnings.warn(
            f"{country or 'series'}: confirmed < recovered + deaths on "
            f"{int(np.sum(active < 0))} day(s); active clamped to 0",
            DataWarning,
            stacklevel=2,
        )
        active = np.maximum(active, 0.0)
    if dates is None:
        start_date = date(1970, 1, 1)
    else:
        start_date = dates[start]
    return ObservedSeries(
        country=country,
        population=float(population),
        start_date=start_date,
        A=active,
        R=recovered[start:].copy(),
        D=deaths[start:].copy(),
    )


def load_population(table_path, country):
    """Population for ``country`` from a ``country,population`` CSV."""
    found = None
    with open(table_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:2]] != [
            "country", "population"
        ]:
            raise MalformedCsv(f"{table_path}: expected header 'country,population'")
        for row in reader:
            if row["country"] != country:
                continue
            if found is None:
                found = float(row["population"])
            else:
                warnings.warn(
                    f"{table_path}: duplicate rows for {country!r}; using the first",
                    DataWarning,
                    stacklevel=2,
                )
                break
    if found is None:
        raise CountryNotFound(f"{country!r} not in population table {table_path}")
    return found


def default_population_table():
    return Path(__file__).with_name("data") / "population.csv"


def ingest_country(confirmed_path, recovered_path, deaths_path, country, population_table,
                   onset_threshold=DEFAULT_ONSET_THRESHOLD):
    counts = parse_jhu_csv(confirmed_path, recovered_path, deaths_path, country)
    population = load_population(population_table, country)
    return derive_observed(counts.confirmed, counts.recovered, counts.deaths, population,
                           onset_threshold, country=country, dates=counts.dates)
