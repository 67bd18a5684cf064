"""Counter-based random number streams for reproducible parallel simulation.

Every path owns an independent stream addressed by ``(seed, path_index)``;
the n-th variate of a stream is a pure function of ``(seed, path_index, n)``.
This makes simulation output independent of scheduling and worker count.

The generator is Philox-4x32 with 10 rounds: the 64-bit seed forms the key,
the 64-bit path index and a 64-bit block counter form the 128-bit counter.
Each block yields two doubles with 53 random mantissa bits, offset so that
uniforms lie strictly inside (0, 1).

Poisson sampling uses sequential-search inversion below mean 10 (one uniform
per draw) and Hormann's PTRS transformed rejection above.  Gamma sampling
uses Marsaglia-Tsang, with the shape < 1 power boost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, nogil=True)
def _philox_block(seed, path, block):
    """One 128-bit Philox-4x32-10 block for counter (block, path), key seed."""
    c0 = block & _MASK32
    c1 = (block >> _SHIFT32) & _MASK32
    c2 = path & _MASK32
    c3 = (path >> _SHIFT32) & _MASK32
    k0 = seed & _MASK32
    k1 = (seed >> _SHIFT32) & _MASK32
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = (p1 >> _SHIFT32) ^ c1 ^ k0
        n1 = p1 & _MASK32
        n2 = (p0 >> _SHIFT32) ^ c3 ^ k1
        n3 = p0 & _MASK32
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


@njit(cache=True, nogil=True)
def uniform_at(seed, path, n):
    """The n-th uniform of stream (seed, path), strictly inside (0, 1)."""
    w0, w1, w2, w3 = _philox_block(seed, path, n >> np.uint64(1))
    if n & np.uint64(1) == np.uint64(0):
        hi, lo = w0, w1
    else:
        hi, lo = w2, w3
    v = ((hi >> np.uint64(6)) << np.uint64(27)) | (lo >> np.uint64(5))
    return (float(v) + 0.5) * _INV53


@njit(cache=True, nogil=True)
def _poisson_inversion(seed, path, n, mean):
    u = uniform_at(seed, path, n)
    n += np.uint64(1)
    p = math.exp(-mean)
    f = p
    k = 0
    # cap well beyond mean + 40 sd for mean < 10; unreachable in practice
    while u > f and k < 1000:
        k += 1
        p *= mean / k
        f += p
    return k, n


@njit(cache=True, nogil=True)
def _poisson_ptrs(seed, path, n, mean):
    loglam = math.log(mean)
    b = 0.931 + 2.53 * math.sqrt(mean)
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = uniform_at(seed, path, n) - 0.5
        n += np.uint64(1)
        v = uniform_at(seed, path, n)
        n += np.uint64(1)
        us = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / us + b) * u + mean + 0.43))
        if us >= 0.07 and v <= vr:
            return k, n
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= k * loglam - mean - math.lgamma(k + 1.0)):
            return k, n


@njit(cache=True, nogil=True)
def rand_poisson(seed, path, n, mean):
    """Poisson draw with the given mean; returns (count, next draw index)."""
    if mean <= 0.0:
        return 0, n
    if mean < 10.0:
        return _poisson_inversion(seed, path, n, mean)
    return _poisson_ptrs(seed, path, n, mean)


@njit(cache=True, nogil=True)
def rand_normal(seed, path, n):
    """Standard normal via Box-Muller; consumes exactly two uniforms."""
    u1 = uniform_at(seed, path, n)
    n += np.uint64(1)
    u2 = uniform_at(seed, path, n)
    n += np.uint64(1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2), n


@njit(cache=True, nogil=True)
def rand_exponential(seed, path, n, mean):
    """Exponential draw with the given mean, strictly positive."""
    u = uniform_at(seed, path, n)
    n += np.uint64(1)
    return -mean * math.log(u), n


@njit(cache=True, nogil=True)
def rand_gamma(seed, path, n, shape, scale):
    """Gamma draw (Marsaglia-Tsang); strictly positive."""
    boost = 1.0
    d_shape = shape
    if shape < 1.0:
        u = uniform_at(seed, path, n)
        n += np.uint64(1)
        boost = u ** (1.0 / shape)
        d_shape = shape + 1.0
    d = d_shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x, n = rand_normal(seed, path, n)
        t = 1.0 + c * x
        if t <= 0.0:
            continue
        v = t * t * t
        u = uniform_at(seed, path, n)
        n += np.uint64(1)
        if u < 1.0 - 0.0331 * x * x * x * x:
            return boost * d * v * scale, n
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return boost * d * v * scale, n


def _as_u64(value: int) -> np.uint64:
    return np.uint64(value & 0xFFFFFFFFFFFFFFFF)


@njit(cache=True, nogil=True)
def _fill_uniforms(seed, path, offset, out):
    n = offset
    for i in range(out.size):
        out[i] = uniform_at(seed, path, n)
        n += np.uint64(1)


@njit(cache=True, nogil=True)
def _fill_poissons(seed, path, offset, mean, out):
    n = offset
    for i in range(out.size):
        k, n = rand_poisson(seed, path, n, mean)
        out[i] = k


@dataclass(frozen=True)
class Substream:
    """Handle on the (seed, path_index) stream; stateless and copyable."""

    seed: int
    path_index: int

    def uniforms(self, count: int, offset: int = 0) -> np.ndarray:
        out = np.empty(count, dtype=np.float64)
        _fill_uniforms(_as_u64(self.seed), _as_u64(self.path_index),
                       np.uint64(offset), out)
        return out

    def poissons(self, mean: float, count: int, offset: int = 0) -> np.ndarray:
        out = np.empty(count, dtype=np.int64)
        _fill_poissons(_as_u64(self.seed), _as_u64(self.path_index),
                       np.uint64(offset), float(mean), out)
        return out
