"""Batched rejection ABC with on-device-style result filtering.

One *run* samples ``batch_size`` parameter vectors from the prior, simulates
them and computes their distance to the observed window.  Sample ``b`` of run
``r`` always uses substream ``r * batch_size + b`` of the seed, so the
accepted set depends only on the configuration, never on how runs are
scheduled.

Accepted samples reach the host through one of two filters:

* ``chunked``: the batch is cut into ``chunk_size`` slices and only slices
  holding at least one accepted sample are shipped (``chunk_size=0`` ships
  the whole batch when anything was accepted);
* ``top_k``: the ``k`` lowest-distance samples are shipped together with the
  true accepted count; samples beyond ``k`` are lost and counted as
  ``truncation_loss``.

``none`` ships exactly the accepted samples and exists for equivalence tests.
The host then keeps shipped samples with ``distance <= tolerance``.
"""

import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import MaxRunsExceeded, ShapeMismatch
from .ingest import ObservedSeries
from .model import ModelParams, init_state, init_states, simulate, simulate_distances, spread_code
from .prior import PriorSpec, draw_params, sample_prior
from .rng import PRIOR_BLOCKS, CounterRNG, Substream

FILTER_MODES = ("chunked", "top_k", "none")


def default_top_k(tolerance):
    """5 samples per run at loose tolerances, 1 once tolerance <= 5e4."""
    return 1 if tolerance <= 5e4 else 5


@dataclass(frozen=True)
class RunConfig:
    tolerance: float
    batch_size: int = 100_000
    target_accepted: int = 100
    chunk_size: int = 10_000
    filter_mode: str = "chunked"
    top_k: int = None
    num_workers: int = 1
    seed: int = 0
    fit_days: int = 49
    max_runs: int = 100_000
    prior: PriorSpec = field(default_factory=PriorSpec)
    gaussian_spread: str = "variance_sqrt_h"
    early_reject: bool = False

    def __post_init__(self):
        if self.top_k is None:
            object.__setattr__(self, "top_k", default_top_k(self.tolerance))
        if not self.tolerance >= 0:
            raise ValueError("tolerance must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.chunk_size < 0 or (self.chunk_size and self.batch_size % self.chunk_size):
            raise ValueError(
                f"chunk_size {self.chunk_size} must be 0 or divide batch_size {self.batch_size}"
            )
        if self.filter_mode not in FILTER_MODES:
            raise ValueError(f"filter_mode must be one of {FILTER_MODES}")
        if self.filter_mode == "top_k" and not 1 <= self.top_k <= self.batch_size:
            raise ValueError("top_k must be in [1, batch_size]")
        if self.target_accepted < 1 or self.max_runs < 1 or self.num_workers < 1:
            raise ValueError("target_accepted, max_runs and num_workers must be >= 1")
        if self.fit_days < 1:
            raise ValueError("fit_days must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        spread_code(self.gaussian_spread)

    def replace(self, **changes):
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        if "tolerance" in changes and "top_k" not in changes:
            values["top_k"] = None
        values.update(changes)
        return RunConfig(**values)


@dataclass(frozen=True)
class PosteriorSample:
    params: ModelParams
    distance: float
    run_index: int
    in_batch_index: int

    def sample_id(self, batch_size):
        return self.run_index * batch_size + self.in_batch_index


@dataclass
class RunStats:
    runs_executed: int = 0
    samples_simulated: int = 0
    samples_accepted: int = 0
    acceptance_rate: float = 0.0
    wall_time_total: float = 0.0
    wall_time_per_run_mean: float = 0.0
    wall_time_per_run_std: float = 0.0
    host_postprocess_time: float = 0.0
    bytes_transferred_equivalent: int = 0
    truncation_loss: int = 0
    samples_delivered: int = 0
    speculative_runs: int = 0

    def to_dict(self):
        return asdict(self)


class BatchResult(NamedTuple):
    params: np.ndarray
    distances: np.ndarray
    accepted: np.ndarray
    run_index: int = 0


class Chunk(NamedTuple):
    start: int
    params: np.ndarray
    distances: np.ndarray


@dataclass
class RunOutcome:
    """Host-side result of one run, ready for the canonical merge."""

    run_index: int
    samples: list
    accepted_count: int
    shipped: int
    truncation_loss: int
    run_time: float
    postprocess_time: float


def euclidean_distance(sim, obs):
    """Euclidean distance between two ``(3, days)`` A/R/D arrays.

    Squares are accumulated day by day (A, R, D within a day), the same order
    the simulation kernel uses, so both paths give bit-identical results.
    """
    sim = np.asarray(sim, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    if sim.shape != obs.shape:
        raise ShapeMismatch(f"simulated shape {sim.shape} != observed shape {obs.shape}")
    acc = 0.0
    for day in range(sim.shape[-1]):
        for row in range(sim.shape[0]):
            diff = float(sim[row, day]) - float(obs[row, day])
            acc += diff * diff
    return math.sqrt(acc)


def _check_obs(config, obs):
    if obs.days < config.fit_days:
        raise ValueError(f"observed series has {obs.days} days, fit needs {config.fit_days}")


def run_batch(config: RunConfig, obs: ObservedSeries, run_index) -> BatchResult:
    """Sample, simulate and score one batch; deterministic in ``(seed, run_index)``."""
    _check_obs(config, obs)
    rng = CounterRNG(config.seed)
    batch = config.batch_size
    sample_ids = np.arange(batch, dtype=np.int64) + run_index * batch
    params = sample_prior(config.prior, batch, rng, sample_ids)
    init = init_states(obs.day0, params[:, 7], obs.population)
    cutoff = config.tolerance if config.early_reject else None
    distances = simulate_distances(params, init, obs.window(config.fit_days), obs.population,
                                   rng, sample_ids, PRIOR_BLOCKS, config.gaussian_spread,
                                   cutoff=cutoff)
    return BatchResult(params, distances, distances <= config.tolerance, run_index)


def chunk_filter(batch: BatchResult, chunk_size):
    """Contiguous slices of the batch that contain at least one accepted sample."""
    size = batch.accepted.shape[0]
    if chunk_size == 0:
        chunk_size = size
    if size % chunk_size:
        raise ValueError(f"chunk_size {chunk_size} does not divide batch size {size}")
    hits = batch.accepted.reshape(-1, chunk_size).any(axis=1)
    chunks = []
    for c in np.flatnonzero(hits):
        lo, hi = c * chunk_size, (c + 1) * chunk_size
        chunks.append(Chunk(int(lo), batch.params[lo:hi], batch.distances[lo:hi]))
    return chunks


class TopK(NamedTuple):
    indices: np.ndarray
    params: np.ndarray
    distances: np.ndarray
    accepted_count: int
    truncation_loss: int


def top_k_filter(batch: BatchResult, k):
    """The ``k`` lowest-distance samples (ties by index) plus the true accepted count."""
    size = batch.distances.shape[0]
    if not 1 <= k <= size:
        raise ValueError(f"k must be in [1, {size}]")
    if k < size:
        candidates = np.argpartition(batch.distances, k - 1)[:k]
        # argpartition picks arbitrary members of a tie at the k-th value
        kth = batch.distances[candidates].max()
        candidates = np.flatnonzero(batch.distances <= kth)
    else:
        candidates = np.arange(size)
    order = np.lexsort((candidates, batch.distances[candidates]))[:k]
    keep = candidates[order]
    accepted_count = int(np.count_nonzero(batch.accepted))
    lost = max(0, accepted_count - int(np.count_nonzero(batch.accepted[keep])))
    return TopK(keep, batch.params[keep], batch.distances[keep], accepted_count, lost)


def _samples_from(indices, params, distances, tolerance, run_index):
    out = []
    for i in np.flatnonzero(distances <= tolerance):
        out.append(PosteriorSample(ModelParams.from_array(params[i]), float(distances[i]),
                                   run_index, int(indices[i])))
    return out


def postprocess(config: RunConfig, batch: BatchResult):
    """Apply the configured filter, then keep shipped samples within tolerance.

    Returns ``(samples, shipped_count, truncation_loss)``.
    """
    tol = config.tolerance
    if config.filter_mode == "chunked":
        samples, shipped = [], 0
        for chunk in chunk_filter(batch, config.chunk_size):
            idx = np.arange(chunk.start, chunk.start + chunk.distances.shape[0])
            samples += _samples_from(idx, chunk.params, chunk.distances, tol, batch.run_index)
            shipped += chunk.distances.shape[0]
        return samples, shipped, 0
    if config.filter_mode == "top_k":
        if not batch.accepted.any():
            return [], 0, 0
        top = top_k_filter(batch, config.top_k)
        samples = _samples_from(top.indices, top.params, top.distances, tol, batch.run_index)
        samples.sort(key=lambda s: s.in_batch_index)
        return samples, top.indices.shape[0], top.truncation_loss
    idx = np.flatnonzero(batch.accepted)
    return _samples_from(idx, batch.params[idx], batch.distances[idx], tol, batch.run_index), \
        idx.shape[0], 0


def execute_run(config: RunConfig, obs: ObservedSeries, run_index) -> RunOutcome:
    t0 = time.perf_counter()
    batch = run_batch(config, obs, run_index)
    t1 = time.perf_counter()
    samples, shipped, lost = postprocess(config, batch)
    t2 = time.perf_counter()
    return RunOutcome(run_index, samples, int(np.count_nonzero(batch.accepted)), shipped, lost,
                      t1 - t0, t2 - t1)


class Collector:
    """Merges run outcomes in run-index order and decides where inference stops.

    Outcomes may arrive in any order; only the prefix of consecutive runs is
    consumed, and the first run whose cumulative delivered count reaches the
    target closes the result.  Outcomes for later runs are discarded.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.samples = []
        self.stats = RunStats()
        self.done = False
        self._next = 0
        self._pending = {}
        self._run_times = []

    @property
    def next_run(self):
        return self._next

    def add(self, outcome: RunOutcome):
        if self.done or outcome.run_index < self._next:
            self.stats.speculative_runs += 1
            return
        self._pending[outcome.run_index] = outcome
        while not self.done and self._next in self._pending:
            self._consume(self._pending.pop(self._next))
            self._next += 1

    def _consume(self, out: RunOutcome):
        st = self.stats
        st.runs_executed += 1
        st.samples_simulated += self.config.batch_size
        st.samples_accepted += out.accepted_count
        st.bytes_transferred_equivalent += out.shipped
        st.truncation_loss += out.truncation_loss
        st.host_postprocess_time += out.postprocess_time
        self._run_times.append(out.run_time)
        self.samples.extend(out.samples)
        if len(self.samples) >= self.config.target_accepted:
            self.done = True

    @property
    def exhausted(self):
        return not self.done and self._next >= self.config.max_runs

    def finish(self, wall_time):
        st = self.stats
        st.speculative_runs += len(self._pending)
        self._pending.clear()
        st.samples_delivered = len(self.samples)
        st.acceptance_rate = (st.samples_accepted / st.samples_simulated
                              if st.samples_simulated else 0.0)
        st.wall_time_total = wall_time
        if self._run_times:
            st.wall_time_per_run_mean = float(np.mean(self._run_times))
            st.wall_time_per_run_std = float(np.std(self._run_times))
        self.samples.sort(key=lambda s: (s.run_index, s.in_batch_index))
        if not self.done:
            raise MaxRunsExceeded(
                f"max_runs={self.config.max_runs} reached with {len(self.samples)} of "
                f"{self.config.target_accepted} samples accepted",
                samples=self.samples,
                stats=st,
            )
        return self.samples, st


def infer(config: RunConfig, obs: ObservedSeries):
    """Run batches in order until ``target_accepted`` samples are delivered.

    All acceptances of the final run are kept.  Raises
    :class:`MaxRunsExceeded` (carrying the partial result) if the run cap is
    hit first.  Multi-worker execution lives in :mod:`epiabc.runtime`.
    """
    _check_obs(config, obs)
    t0 = time.perf_counter()
    collector = Collector(config)
    while not collector.done and not collector.exhausted:
        collector.add(execute_run(config, obs, collector.next_run))
    return collector.finish(time.perf_counter() - t0)


def infer_sequential_oracle(config: RunConfig, obs: ObservedSeries):
    """Vanilla one-sample-at-a-time ABC over the same substreams as :func:`infer`.

    Uses only the scalar model path.  The stop check happens at multiples of
    ``batch_size`` so the overshoot policy matches the batched engine; filters
    are not applied, so results agree with :func:`infer` whenever there is no
    top-k truncation loss.
    """
    _check_obs(config, obs)
    t0 = time.perf_counter()
    window = obs.window(config.fit_days)
    batch = config.batch_size
    stats = RunStats()
    samples = []
    for sample_id in range(config.max_runs * batch):
        stream = Substream(config.seed, sample_id, start_block=0)
        params = draw_params(config.prior, stream)
        init = init_state(obs.day0, params.kappa, obs.population)
        traj = simulate(params, init, config.fit_days, obs.population, stream,
                        config.gaussian_spread)
        distance = euclidean_distance(traj.observed_view, window)
        stats.samples_simulated += 1
        if distance <= config.tolerance:
            samples.append(PosteriorSample(params, distance, sample_id // batch,
                                           sample_id % batch))
        if (sample_id + 1) % batch == 0:
            stats.runs_executed += 1
            if len(samples) >= config.target_accepted:
                break
    stats.samples_accepted = stats.samples_delivered = len(samples)
    stats.acceptance_rate = stats.samples_accepted / stats.samples_simulated
    stats.wall_time_total = time.perf_counter() - t0
    if len(samples) < config.target_accepted:
        raise MaxRunsExceeded(
            f"max_runs={config.max_runs} reached with {len(samples)} of "
            f"{config.target_accepted} samples accepted",
            samples=samples,
            stats=stats,
        )
    return samples, stats
