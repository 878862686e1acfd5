"""Counter-based random streams (Philox4x32-10).

Every random number in the engine is a pure function of
``(seed, sample_id, block, domain)``: the 64-bit seed is the Philox key and
the remaining coordinates form the 128-bit counter.  Any worker can therefore
draw the numbers for any sample without coordination, and results do not
depend on batch partitioning or scheduling.

Counter layout: ``(sample_id & 0xffffffff, sample_id >> 32, block, domain)``.
Each block yields four 32-bit words, i.e. two 53-bit uniforms or two
standard normals (Box-Muller).
"""

import math

import numba
import numpy as np

MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_SHIFT32 = np.uint64(32)
_SHIFT5 = np.uint64(5)
_SHIFT6 = np.uint64(6)
_TWO26 = 67108864.0
_INV_TWO53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi

DOMAIN_FIT = 0
DOMAIN_PROJECT = 1

# blocks 0..3 of a fit substream hold the 8 prior uniforms
PRIOR_BLOCKS = 4
# 5 transition normals per simulated day, rounded up to whole blocks
BLOCKS_PER_DAY = 3


@numba.njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds.  All arguments are uint64 holding 32-bit values."""
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & MASK32
            k1 = (k1 + _W1) & MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SHIFT32
        lo0 = p0 & MASK32
        hi1 = p1 >> _SHIFT32
        lo1 = p1 & MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@numba.njit(cache=True, nogil=True)
def _words(seed, sample_id, block, domain):
    k0 = np.uint64(seed) & MASK32
    k1 = np.uint64(seed) >> _SHIFT32
    sid = np.uint64(sample_id)
    return philox4x32(sid & MASK32, sid >> _SHIFT32, np.uint64(block),
                      np.uint64(domain), k0, k1)


@numba.njit(cache=True, nogil=True)
def _to_unit(a, b):
    # 53-bit uniform in [0, 1), same construction as numpy's random_standard_uniform
    return ((a >> _SHIFT5) * _TWO26 + (b >> _SHIFT6)) * _INV_TWO53


@numba.njit(cache=True, nogil=True)
def block_uniforms(seed, sample_id, block, domain):
    """Two uniforms in [0, 1) from one counter block."""
    x0, x1, x2, x3 = _words(seed, sample_id, block, domain)
    return _to_unit(x0, x1), _to_unit(x2, x3)


@numba.njit(cache=True, nogil=True)
def block_normals(seed, sample_id, block, domain):
    """Two independent standard normals from one counter block (Box-Muller)."""
    u1, u2 = block_uniforms(seed, sample_id, block, domain)
    radius = math.sqrt(-2.0 * math.log(1.0 - u1))
    angle = _TWO_PI * u2
    return radius * math.cos(angle), radius * math.sin(angle)


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in 64 bits, got {seed}")
    return seed


def as_key(seed):
    """Seed as ``np.uint64`` so numba compiles a single unsigned specialisation."""
    return np.uint64(_check_seed(seed))


class CounterRNG:
    """Handle for a keyed family of substreams, one per sample id."""

    def __init__(self, seed, domain=DOMAIN_FIT):
        self.seed = _check_seed(seed)
        self.domain = int(domain)

    @property
    def key(self):
        return as_key(self.seed)

    def substream(self, sample_id, start_block=0):
        return Substream(self.seed, sample_id, self.domain, start_block)

    def __repr__(self):
        return f"CounterRNG(seed={self.seed}, domain={self.domain})"


class Substream:
    """Sequential view of one sample's counter space.

    The cursor only tracks which block comes next; the numbers themselves are
    stateless, so two substreams with the same coordinates agree exactly.
    """

    def __init__(self, seed, sample_id, domain=DOMAIN_FIT, start_block=0):
        self.seed = _check_seed(seed)
        self._key = as_key(seed)
        self.sample_id = int(sample_id)
        self.domain = int(domain)
        self.block = int(start_block)

    def uniforms(self, count):
        """Return ``count`` uniforms, consuming ``ceil(count / 2)`` blocks."""
        out = []
        while len(out) < count:
            out.extend(block_uniforms(self._key, self.sample_id, self.block, self.domain))
            self.block += 1
        return np.array(out[:count])

    def normals(self, count):
        """Return ``count`` standard normals, consuming ``ceil(count / 2)`` blocks."""
        out = []
        while len(out) < count:
            out.extend(block_normals(self._key, self.sample_id, self.block, self.domain))
            self.block += 1
        return np.array(out[:count])
