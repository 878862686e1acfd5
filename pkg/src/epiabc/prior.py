"""Box-uniform prior over the eight model parameters."""

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import InvalidPrior
from .model import ModelParams
from .rng import PRIOR_BLOCKS, CounterRNG, block_uniforms

DEFAULT_UPPER = (1.0, 100.0, 2.0, 1.0, 1.0, 1.0, 1.0, 2.0)


@dataclass(frozen=True)
class PriorSpec:
    lower: tuple = field(default=(0.0,) * 8)
    upper: tuple = field(default=DEFAULT_UPPER)

    def __post_init__(self):
        lower = tuple(float(x) for x in self.lower)
        upper = tuple(float(x) for x in self.upper)
        if len(lower) != 8 or len(upper) != 8:
            raise InvalidPrior("prior bounds must have 8 entries each")
        bad = [i for i in range(8) if not lower[i] < upper[i]]
        if bad:
            raise InvalidPrior(f"lower >= upper for parameter indices {bad}")
        if min(lower) < 0:
            raise InvalidPrior("model parameters are nonnegative; lower bounds must be >= 0")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def width(self):
        return np.subtract(self.upper, self.lower)


@numba.njit(cache=True, nogil=True)
def _prior_kernel(lower, upper, sample_ids, seed, domain, out):
    width = upper - lower
    for b in range(out.shape[0]):
        for blk in range(PRIOR_BLOCKS):
            u0, u1 = block_uniforms(seed, sample_ids[b], blk, domain)
            j = 2 * blk
            out[b, j] = lower[j] + width[j] * u0
            out[b, j + 1] = lower[j + 1] + width[j + 1] * u1
        # lower + width * u can round up to upper when u is within an ulp of 1
        for j in range(8):
            if out[b, j] >= upper[j]:
                out[b, j] = np.nextafter(upper[j], lower[j])


def sample_prior(spec: PriorSpec, count, rng: CounterRNG, sample_ids=None):
    """Draw ``count`` parameter vectors as a ``(count, 8)`` array.

    Row ``b`` is a function of ``(rng.seed, sample_ids[b])`` alone and uses
    the first ``PRIOR_BLOCKS`` blocks of that substream.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if sample_ids is None:
        sample_ids = np.arange(count, dtype=np.int64)
    sample_ids = np.ascontiguousarray(sample_ids, dtype=np.int64)
    if sample_ids.shape != (count,):
        raise ValueError("sample_ids must have length count")
    out = np.empty((count, 8))
    _prior_kernel(np.array(spec.lower), np.array(spec.upper), sample_ids, rng.key,
                  rng.domain, out)
    return out


def draw_params(spec: PriorSpec, substream):
    """Single prior draw from a scalar substream (advances it by ``PRIOR_BLOCKS``)."""
    u = substream.uniforms(2 * PRIOR_BLOCKS)
    lower = np.array(spec.lower)
    upper = np.array(spec.upper)
    values = lower + (upper - lower) * u
    values = np.where(values >= upper, np.nextafter(upper, lower), values)
    return ModelParams.from_array(values)
