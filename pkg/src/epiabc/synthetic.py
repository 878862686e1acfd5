"""Synthetic observed series and JHU-format files generated by the model itself.

Useful when real data is unavailable: the generating parameters are known,
so inference results can be checked against them.
"""

import csv
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .ingest import JHU_LEADING_COLUMNS, ObservedSeries
from .model import ModelParams, init_state, simulate
from .rng import Substream

DOMAIN_SYNTHETIC = 2

# Illustrative only: published-fit-like parameter means for Italy and an
# onset-sized starting point.  Not real case data.
ITALY_LIKE_PARAMS = ModelParams(0.384, 36.054, 0.595, 0.013, 0.385, 0.009, 0.477, 0.830)
ITALY_LIKE_DAY0 = (150.0, 1.0, 3.0)
ITALY_POPULATION = 60_360_000.0


def synthetic_series(params, day0, population, days, seed=0, country="Synthetic",
                     start_date=date(2020, 2, 23), spread="variance_sqrt_h"):
    stream = Substream(seed, 0, DOMAIN_SYNTHETIC)
    init = init_state(day0, params.kappa, population)
    view = simulate(params, init, days, population, stream, spread).observed_view
    return ObservedSeries(country, float(population), start_date, view[0], view[1], view[2])


def italy_like_series(days=120, seed=2020):
    return synthetic_series(ITALY_LIKE_PARAMS, ITALY_LIKE_DAY0, ITALY_POPULATION, days, seed,
                            country="Italy")


def write_jhu_csvs(series, directory, pre_onset_days=5, provinces=1):
    """Write ``time_series_covid19_{confirmed,recovered,deaths}_global.csv``.

    Prepends ``pre_onset_days`` of small, growing counts below 100 confirmed
    and optionally splits the country over several province rows, so that
    onset alignment and province aggregation are exercised on re-ingest.
    Returns the three paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    confirmed = series.A + series.R + series.D
    first = float(confirmed[0])
    ramp = [min(99.0, float(np.floor(first * 0.5 ** (pre_onset_days - i))))
            for i in range(pre_onset_days)]
    cols = {
        "confirmed": np.concatenate([ramp, confirmed]),
        "recovered": np.concatenate([np.zeros(pre_onset_days), series.R]),
        "deaths": np.concatenate([np.zeros(pre_onset_days), series.D]),
    }
    start = series.start_date - timedelta(days=pre_onset_days)
    dates = [start + timedelta(days=i) for i in range(pre_onset_days + series.days)]
    header = JHU_LEADING_COLUMNS + [f"{d.month}/{d.day}/{d.year % 100:02d}" for d in dates]
    paths = {}
    for kind, values in cols.items():
        path = directory / f"time_series_covid19_{kind}_global.csv"
        parts = _split(values, provinces)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerow(["", "Elsewhere", "0.0", "0.0"] + ["0"] * len(dates))
            for p, part in enumerate(parts):
                province = "" if provinces == 1 else f"Region {p}"
                writer.writerow([province, series.country, "41.87", "12.56"]
                                + [str(int(v)) for v in part])
        paths[kind] = path
    return paths["confirmed"], paths["recovered"], paths["deaths"]


def _split(values, parts):
    values = np.asarray(values, dtype=np.int64)
    if parts == 1:
        return [values]
    shares = [values // parts for _ in range(parts - 1)]
    return shares + [values - sum(shares)]
