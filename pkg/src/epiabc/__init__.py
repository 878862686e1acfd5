"""Batched approximate Bayesian computation for a stochastic COVID-19 model."""

__version__ = "0.1.0"

from .inference import (
    PosteriorSample,
    RunConfig,
    RunStats,
    chunk_filter,
    euclidean_distance,
    infer,
    infer_sequential_oracle,
    run_batch,
    top_k_filter,
)
from .analysis import ProjectionBands, histograms, project
from .ingest import ObservedSeries, derive_observed, load_population, parse_jhu_csv
from .model import (
    EpidemicState,
    HazardVector,
    ModelParams,
    Trajectory,
    hazard,
    infection_rate,
    init_state,
    sample_transitions,
    simulate,
    simulate_batch,
    step,
)
from .prior import PriorSpec, sample_prior
from .rng import CounterRNG, Substream
from .runtime import ScalingReport, benchmark_scaling, run_parallel
