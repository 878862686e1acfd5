"""Six-compartment stochastic COVID-19 model with a daily Gaussian tau-leap.

State is ``[S, I, A, R, D, Ru]``; only ``A, R, D`` are observed.  Per day the
five flows ``S->I, I->A, A->R, A->D, I->Ru`` are drawn from a normal
approximation to the Poisson increments, floored, clamped at zero and applied
in that order, each capped by what is left in its source compartment.

Two code paths exist on purpose: the scalar functions (``hazard``, ``step``,
``simulate``) are plain Python and readable; the ``*_batch`` functions run a
numba kernel over many parameter vectors.  Both consume the same counter-based
random blocks, and the test-suite checks they agree bit for bit.
"""

import math
from dataclasses import astuple, dataclass
from typing import NamedTuple

import numba
import numpy as np

from .errors import NonPositiveSusceptible
from .rng import BLOCKS_PER_DAY, CounterRNG, block_normals

PARAM_NAMES = ("alpha0", "alpha", "n", "beta", "gamma", "delta", "eta", "kappa")
STATE_NAMES = ("S", "I", "A", "R", "D", "Ru")
OBSERVED_NAMES = ("A", "R", "D")

SPREAD_MODES = {"variance_sqrt_h": 0, "variance_h": 1}


@dataclass(frozen=True)
class ModelParams:
    alpha0: float
    alpha: float
    n: float
    beta: float
    gamma: float
    delta: float
    eta: float
    kappa: float

    def __post_init__(self):
        for name, value in zip(PARAM_NAMES, astuple(self)):
            if not value >= 0:
                raise ValueError(f"{name} must be >= 0, got {value}")

    def as_array(self):
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (8,):
            raise ValueError(f"expected 8 parameters, got shape {values.shape}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class EpidemicState:
    S: float
    I: float
    A: float
    R: float
    D: float
    Ru: float

    @property
    def total(self):
        return self.S + self.I + self.A + self.R + self.D + self.Ru

    def as_array(self):
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, values):
        return cls(*(float(v) for v in values))


class HazardVector(NamedTuple):
    s_to_i: float
    i_to_a: float
    a_to_r: float
    a_to_d: float
    i_to_ru: float


@dataclass(frozen=True)
class Trajectory:
    """Daily states, ``states[0]`` being the initial state.  Shape ``(days, 6)``."""

    states: np.ndarray

    @property
    def days(self):
        return self.states.shape[0]

    @property
    def observed_view(self):
        """``(3, days)`` array of A, R, D."""
        return self.states[:, 2:5].T.copy()

    def state(self, day):
        return EpidemicState.from_array(self.states[day])


def spread_code(mode):
    try:
        return SPREAD_MODES[mode]
    except KeyError:
        raise ValueError(
            f"gaussian_spread must be one of {sorted(SPREAD_MODES)}, got {mode!r}"
        ) from None


# ---------------------------------------------------------------------------
# scalar reference path
# ---------------------------------------------------------------------------


def init_state(obs_day0, kappa, population):
    """Initial state from the day-0 observation ``(A0, R0, D0)``."""
    a0, r0, d0 = (float(x) for x in obs_day0)
    if min(a0, r0, d0, kappa, population) < 0:
        raise ValueError("initial counts, kappa and population must be >= 0")
    infected = float(math.floor(kappa * a0))
    susceptible = float(population) - (a0 + r0 + d0 + infected)
    if susceptible <= 0:
        raise NonPositiveSusceptible(
            f"S = {susceptible:g} <= 0 for population {population:g}, "
            f"A0+R0+D0 = {a0 + r0 + d0:g}, I0 = {infected:g}"
        )
    return EpidemicState(susceptible, infected, a0, r0, d0, 0.0)


def infection_rate(params, A, R, D):
    # Python and C agree on 0.0 ** 0.0 == 1.0, which is the convention we want
    return params.alpha0 + params.alpha / (1.0 + (A + R + D) ** params.n)


def hazard(params, state, population):
    g = infection_rate(params, state.A, state.R, state.D)
    return HazardVector(
        g * state.S * state.I / population,
        params.gamma * state.I,
        params.beta * state.A,
        params.delta * state.A,
        params.beta * params.eta * state.I,
    )


def transition_counts(h, z, spread="variance_sqrt_h", clamp=True):
    """Turn hazards and standard-normal draws into integer-valued flow counts.

    ``draw = h + std * z`` with ``std = h**0.25`` (variance sqrt(h)) or
    ``std = sqrt(h)`` (variance h), then floored and, unless ``clamp`` is off,
    clamped at zero.
    """
    code = spread_code(spread)
    counts = []
    for rate, noise in zip(h, z):
        std = math.sqrt(math.sqrt(rate)) if code == 0 else math.sqrt(rate)
        count = float(math.floor(rate + std * noise))
        if clamp and count < 0.0:
            count = 0.0
        counts.append(count)
    return tuple(counts)


def sample_transitions(h, rng, spread="variance_sqrt_h", clamp=True):
    """Draw one day of flows; consumes ``BLOCKS_PER_DAY`` blocks of ``rng``."""
    z = rng.normals(2 * BLOCKS_PER_DAY)[:5]
    return transition_counts(h, z, spread, clamp)


def apply_transitions(state, counts):
    """Apply flows in hazard order, capping each by its remaining source."""
    S, I, A, R, D, Ru = astuple(state)
    c = min(counts[0], S)
    S -= c
    I += c
    c = min(counts[1], I)
    I -= c
    A += c
    c = min(counts[2], A)
    A -= c
    R += c
    c = min(counts[3], A)
    A -= c
    D += c
    c = min(counts[4], I)
    I -= c
    Ru += c
    return EpidemicState(S, I, A, R, D, Ru)


def step(state, params, population, rng, spread="variance_sqrt_h"):
    h = hazard(params, state, population)
    return apply_transitions(state, sample_transitions(h, rng, spread))


def simulate(params, init, days, population, rng, spread="variance_sqrt_h"):
    if days < 1:
        raise ValueError("days must be >= 1")
    states = np.empty((days, 6))
    state = init
    states[0] = state.as_array()
    for day in range(1, days):
        state = step(state, params, population, rng, spread)
        states[day] = state.as_array()
    return Trajectory(states)


# ---------------------------------------------------------------------------
# batched kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True, inline="always")
def _count(h, z, code):
    if code == 0:
        std = math.sqrt(math.sqrt(h))
    else:
        std = math.sqrt(h)
    c = np.floor(h + std * z)
    if c < 0.0:
        c = 0.0
    return c


@numba.njit(cache=True, nogil=True, inline="always")
def _advance(s, p, population, seed, sid, blk, domain, code):
    """One day for one sample; ``s`` (6,) is updated in place."""
    z0, z1 = block_normals(seed, sid, blk, domain)
    z2, z3 = block_normals(seed, sid, blk + 1, domain)
    z4, _ = block_normals(seed, sid, blk + 2, domain)
    S = s[0]
    I = s[1]
    A = s[2]
    R = s[3]
    D = s[4]
    Ru = s[5]
    g = p[0] + p[1] / (1.0 + (A + R + D) ** p[2])
    c0 = _count(g * S * I / population, z0, code)
    c1 = _count(p[4] * I, z1, code)
    c2 = _count(p[3] * A, z2, code)
    c3 = _count(p[5] * A, z3, code)
    c4 = _count(p[3] * p[6] * I, z4, code)
    c = min(c0, S)
    S -= c
    I += c
    c = min(c1, I)
    I -= c
    A += c
    c = min(c2, A)
    A -= c
    R += c
    c = min(c3, A)
    A -= c
    D += c
    c = min(c4, I)
    I -= c
    Ru += c
    s[0] = S
    s[1] = I
    s[2] = A
    s[3] = R
    s[4] = D
    s[5] = Ru


@numba.njit(cache=True, nogil=True)
def _states_kernel(params, init, sample_ids, seed, domain, start_block, population,
                   code, out):
    batch, days = out.shape[0], out.shape[1]
    s = np.empty(6)
    for b in range(batch):
        s[:] = init[b]
        out[b, 0] = s
        for t in range(1, days):
            blk = start_block + BLOCKS_PER_DAY * (t - 1)
            _advance(s, params[b], population, seed, sample_ids[b], blk, domain, code)
            out[b, t] = s


@numba.njit(cache=True, nogil=True)
def _distance_kernel(params, init, sample_ids, seed, domain, start_block, population,
                     code, obs, cutoff_sq, out):
    batch, days = out.shape[0], obs.shape[1]
    s = np.empty(6)
    for b in range(batch):
        s[:] = init[b]
        acc = 0.0
        for t in range(days):
            if t > 0:
                blk = start_block + BLOCKS_PER_DAY * (t - 1)
                _advance(s, params[b], population, seed, sample_ids[b], blk, domain,
                         code)
            da = s[2] - obs[0, t]
            dr = s[3] - obs[1, t]
            dd = s[4] - obs[2, t]
            acc = acc + da * da + dr * dr + dd * dd
            if acc > cutoff_sq:
                break
        out[b] = math.sqrt(acc)


def init_states(obs_day0, kappas, population):
    """Vectorised ``init_state`` for a column of kappa values; returns ``(B, 6)``."""
    a0, r0, d0 = (float(x) for x in obs_day0)
    kappas = np.asarray(kappas, dtype=np.float64)
    infected = np.floor(kappas * a0)
    susceptible = float(population) - (a0 + r0 + d0 + infected)
    if np.any(susceptible <= 0):
        worst = int(np.argmin(susceptible))
        raise NonPositiveSusceptible(
            f"S = {susceptible[worst]:g} <= 0 for kappa = {kappas[worst]:g}, "
            f"population {population:g}"
        )
    out = np.zeros((kappas.shape[0], 6))
    out[:, 0] = susceptible
    out[:, 1] = infected
    out[:, 2] = a0
    out[:, 3] = r0
    out[:, 4] = d0
    return out


def _prepare(params_batch, init, sample_ids):
    params_batch = np.ascontiguousarray(params_batch, dtype=np.float64)
    if params_batch.ndim != 2 or params_batch.shape[1] != 8:
        raise ValueError(f"params_batch must be (B, 8), got {params_batch.shape}")
    batch = params_batch.shape[0]
    if isinstance(init, EpidemicState):
        init = np.broadcast_to(init.as_array(), (batch, 6))
    init = np.ascontiguousarray(init, dtype=np.float64)
    if init.shape != (batch, 6):
        raise ValueError(f"init must be an EpidemicState or ({batch}, 6), got {init.shape}")
    if sample_ids is None:
        sample_ids = np.arange(batch, dtype=np.int64)
    sample_ids = np.ascontiguousarray(sample_ids, dtype=np.int64)
    if sample_ids.shape != (batch,):
        raise ValueError("sample_ids must have one entry per parameter vector")
    return params_batch, init, sample_ids


def simulate_batch_states(params_batch, init, days, population, rng: CounterRNG,
                          sample_ids=None, start_block=0, spread="variance_sqrt_h"):
    """Full ``(B, days, 6)`` state trajectories.

    Row ``b`` uses the substream ``rng.substream(sample_ids[b], start_block)``.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    params_batch, init, sample_ids = _prepare(params_batch, init, sample_ids)
    out = np.empty((params_batch.shape[0], days, 6))
    _states_kernel(params_batch, init, sample_ids, rng.key, rng.domain, start_block,
                   float(population), spread_code(spread), out)
    return out


def simulate_batch(params_batch, init, days, population, rng: CounterRNG,
                   sample_ids=None, start_block=0, spread="variance_sqrt_h"):
    """Observed ``(B, 3, days)`` A/R/D arrays for a batch of parameter vectors."""
    states = simulate_batch_states(params_batch, init, days, population, rng,
                                   sample_ids, start_block, spread)
    return np.ascontiguousarray(states[:, :, 2:5].transpose(0, 2, 1))


def simulate_distances(params_batch, init, obs, population, rng: CounterRNG,
                       sample_ids=None, start_block=0, spread="variance_sqrt_h",
                       cutoff=None):
    """Euclidean distance of each simulated A/R/D series to ``obs`` (3, days).

    Fuses simulation and distance so no ``(B, 3, days)`` array is materialised.
    With ``cutoff`` set, a sample stops simulating once its partial distance
    exceeds it; the value returned for such a sample is then only a lower
    bound, but still greater than ``cutoff``.
    """
    obs = np.ascontiguousarray(obs, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[0] != 3:
        raise ValueError(f"obs must be (3, days), got {obs.shape}")
    params_batch, init, sample_ids = _prepare(params_batch, init, sample_ids)
    # the margin keeps every early-stopped sample strictly above ``cutoff``
    cutoff_sq = math.inf if cutoff is None else (float(cutoff) * (1.0 + 1e-9)) ** 2
    out = np.empty(params_batch.shape[0])
    _distance_kernel(params_batch, init, sample_ids, rng.key, rng.domain, start_block,
                     float(population), spread_code(spread), obs, cutoff_sq, out)
    return out
