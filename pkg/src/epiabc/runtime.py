"""Multi-worker execution of ABC runs and worker-count scaling reports.

Workers are threads: the simulation kernels release the GIL, so runs execute
concurrently on separate cores.  Each run's random numbers are fixed by its
run index, so the worker count changes wall time only.
"""

import logging
import os
import statistics
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import asdict, dataclass, field

from .inference import Collector, RunConfig, _check_obs, execute_run

log = logging.getLogger(__name__)


def available_cores():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def run_parallel(config: RunConfig, obs):
    """Like :func:`epiabc.inference.infer`, spread over ``config.num_workers`` threads.

    At most ``num_workers`` runs are in flight.  Runs past the stopping run
    may already be executing when the target is met; their results are
    dropped and counted in ``stats.speculative_runs``.
    """
    _check_obs(config, obs)
    t0 = time.perf_counter()
    collector = Collector(config)
    with ThreadPoolExecutor(max_workers=config.num_workers) as pool:
        in_flight = set()
        submitted = 0
        while True:
            while (not collector.done and len(in_flight) < config.num_workers
                   and submitted < config.max_runs):
                in_flight.add(pool.submit(execute_run, config, obs, submitted))
                submitted += 1
            if not in_flight:
                break
            finished, in_flight = wait(in_flight, return_when=FIRST_COMPLETED)
            for fut in finished:
                collector.add(fut.result())
            if collector.done:
                for fut in in_flight:
                    fut.cancel()
                break
    return collector.finish(time.perf_counter() - t0)


def run_fixed(config: RunConfig, obs, runs, num_workers):
    """Execute runs ``0..runs-1`` on ``num_workers`` threads, ignoring the target.

    Returns ``(wall_time, per_run_times, outcomes)`` with outcomes in run order.
    """
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=num_workers) as pool:
        outcomes = list(pool.map(lambda r: execute_run(config, obs, r), range(runs)))
    wall = time.perf_counter() - t0
    return wall, [o.run_time + o.postprocess_time for o in outcomes], outcomes


@dataclass
class ScalingReport:
    worker_counts: list
    runs: int
    repetitions: int
    batch_size: int
    chunk_size: int
    filter_mode: str
    time_per_run_ms: list = field(default_factory=list)
    time_per_run_ms_std: list = field(default_factory=list)
    total_s: list = field(default_factory=list)
    total_s_std: list = field(default_factory=list)
    speedup: list = field(default_factory=list)
    overhead: list = field(default_factory=list)
    cores: int = 1

    def rows(self):
        for i, w in enumerate(self.worker_counts):
            yield {
                "workers": w,
                "time_per_run_ms": self.time_per_run_ms[i],
                "total_s": self.total_s[i],
                "speedup": self.speedup[i],
                "overhead": self.overhead[i],
            }

    def to_csv(self):
        lines = ["workers,time_per_run_ms,total_s,speedup,overhead"]
        for row in self.rows():
            lines.append("{workers},{time_per_run_ms:.4f},{total_s:.4f},{speedup:.4f},"
                         "{overhead:.4f}".format(**row))
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return asdict(self)


def benchmark_scaling(config: RunConfig, obs, worker_counts, runs=50, repetitions=5,
                      warmup=True):
    """Time a fixed number of runs at each worker count.

    Work is identical for every count (runs ``0..runs-1``).  ``total_s`` is
    the mean wall time over ``repetitions``; ``time_per_run_ms`` is the
    effective wall time per run (``total / runs``).  Speedup is relative to
    the first entry of ``worker_counts`` and ``overhead = 1 - speedup / ideal``
    with ``ideal = workers / baseline_workers``.
    """
    _check_obs(config, obs)
    worker_counts = [int(w) for w in worker_counts]
    if not worker_counts or min(worker_counts) < 1:
        raise ValueError("worker_counts must be a nonempty list of positive integers")
    cores = available_cores()
    if max(worker_counts) > cores:
        log.warning("benchmarking up to %d workers on %d available core(s); "
                    "expect overhead to reflect oversubscription", max(worker_counts), cores)
    if warmup:
        execute_run(config, obs, 0)
    report = ScalingReport(worker_counts, runs, repetitions, config.batch_size,
                           config.chunk_size, config.filter_mode, cores=cores)
    for workers in worker_counts:
        totals = []
        for _ in range(repetitions):
            wall, _, _ = run_fixed(config, obs, runs, workers)
            totals.append(wall)
        mean = statistics.fmean(totals)
        std = statistics.pstdev(totals) if len(totals) > 1 else 0.0
        report.total_s.append(mean)
        report.total_s_std.append(std)
        report.time_per_run_ms.append(1000.0 * mean / runs)
        report.time_per_run_ms_std.append(1000.0 * std / runs)
        log.info("workers=%d total=%.3fs +- %.3fs", workers, mean, std)
    base_workers, base_total = worker_counts[0], report.total_s[0]
    for workers, total in zip(worker_counts, report.total_s):
        speedup = base_total / total
        report.speedup.append(speedup)
        report.overhead.append(1.0 - speedup / (workers / base_workers))
    return report
