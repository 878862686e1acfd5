"""Posterior files, projection percentile bands and parameter histograms."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyPosterior, MalformedCsv
from .model import OBSERVED_NAMES, PARAM_NAMES, ModelParams, init_states, simulate_batch
from .prior import PriorSpec
from .rng import DOMAIN_PROJECT, CounterRNG

POSTERIOR_HEADER = ("run", "index", "distance") + PARAM_NAMES


def posterior_csv_text(samples):
    """CSV text for accepted samples; floats use ``repr`` so they round-trip exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(POSTERIOR_HEADER)
    for s in samples:
        writer.writerow([s.run_index, s.in_batch_index, repr(s.distance)]
                        + [repr(float(v)) for v in s.params.as_array()])
    return buf.getvalue()


@dataclass(frozen=True)
class PosteriorTable:
    run: np.ndarray
    index: np.ndarray
    distance: np.ndarray
    params: np.ndarray

    def __len__(self):
        return self.params.shape[0]

    def means(self):
        return dict(zip(PARAM_NAMES, (float(x) for x in self.params.mean(axis=0))))

    def as_params(self):
        return [ModelParams.from_array(row) for row in self.params]


def read_posterior_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != POSTERIOR_HEADER:
            raise MalformedCsv(f"{path}: expected header {','.join(POSTERIOR_HEADER)}")
        rows = [r for r in reader if r]
    if any(len(r) != len(POSTERIOR_HEADER) for r in rows):
        raise MalformedCsv(f"{path}: wrong number of fields")
    if not rows:
        return PosteriorTable(np.zeros(0, int), np.zeros(0, int), np.zeros(0), np.zeros((0, 8)))
    table = np.array(rows, dtype=np.float64)
    return PosteriorTable(table[:, 0].astype(np.int64), table[:, 1].astype(np.int64),
                          table[:, 2], table[:, 3:])


def nearest_rank(values, percentile, axis=0):
    """Nearest-rank percentile: the ``ceil(p/100 * N)``-th smallest value."""
    values = np.sort(np.asarray(values), axis=axis)
    n = values.shape[axis]
    rank = max(1, math.ceil(percentile / 100.0 * n))
    return np.take(values, rank - 1, axis=axis)


@dataclass(frozen=True)
class ProjectionBands:
    """Per-day, per-observable percentile bands, arrays shaped ``(3, days)``."""

    percentiles: tuple
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    trajectories: np.ndarray = None

    @property
    def days(self):
        return self.median.shape[1]

    def column_names(self):
        lo, hi = self.percentiles
        return f"p{lo:02g}", "p50", f"p{hi:02g}"

    def to_csv(self):
        lines = ["day,observable," + ",".join(self.column_names())]
        for day in range(self.days):
            for k, name in enumerate(OBSERVED_NAMES):
                vals = (self.lower[k, day], self.median[k, day], self.upper[k, day])
                lines.append(f"{day},{name}," + ",".join(repr(float(v)) for v in vals))
        return "\n".join(lines) + "\n"

    def coverage(self, obs_window):
        """Fraction of (observable, day) cells where ``obs_window`` lies inside the band."""
        obs_window = np.asarray(obs_window)
        days = obs_window.shape[1]
        inside = (self.lower[:, :days] <= obs_window) & (obs_window <= self.upper[:, :days])
        return float(inside.mean())

    def day_coverage(self, obs_window):
        """Fraction of days on which all three observables lie inside their bands."""
        obs_window = np.asarray(obs_window)
        days = obs_window.shape[1]
        inside = (self.lower[:, :days] <= obs_window) & (obs_window <= self.upper[:, :days])
        return float(inside.all(axis=0).mean())


def project(params, obs, days=120, percentiles=(5, 95), seed=0,
            spread="variance_sqrt_h", keep_trajectories=False):
    """Simulate every posterior sample forward from day 0 and summarise.

    Each sample is re-initialised from the observed day-0 counts with its own
    kappa and uses projection substream ``i`` of ``seed``.
    """
    params = np.asarray(params, dtype=np.float64).reshape(-1, 8)
    if params.shape[0] == 0:
        raise EmptyPosterior("cannot project an empty posterior")
    lo, hi = percentiles
    if not 0 <= lo <= 50 <= hi <= 100:
        raise ValueError("percentiles must satisfy 0 <= low <= 50 <= high <= 100")
    init = init_states(obs.day0, params[:, 7], obs.population)
    sims = simulate_batch(params, init, days, obs.population, CounterRNG(seed, DOMAIN_PROJECT),
                          spread=spread)
    return ProjectionBands(
        (lo, hi),
        nearest_rank(sims, lo),
        nearest_rank(sims, 50),
        nearest_rank(sims, hi),
        sims if keep_trajectories else None,
    )


def histograms(params, prior: PriorSpec, bins=20):
    """Per-parameter histograms over the prior support, JSON-ready."""
    params = np.asarray(params, dtype=np.float64).reshape(-1, 8)
    if params.shape[0] == 0:
        raise EmptyPosterior("cannot histogram an empty posterior")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    out = {"sample_count": int(params.shape[0]), "bins": int(bins), "parameters": {}}
    for j, name in enumerate(PARAM_NAMES):
        counts, edges = np.histogram(params[:, j], bins=bins,
                                     range=(prior.lower[j], prior.upper[j]))
        out["parameters"][name] = {
            "edges": [float(e) for e in edges],
            "counts": [int(c) for c in counts],
            "mean": float(params[:, j].mean()),
        }
    return out
