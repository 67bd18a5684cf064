import math

import numpy as np
import pytest
from scipy import stats

from garch_intensity.rng import Substream


def test_uniforms_are_open_unit_interval():
    u = Substream(seed=12345, path_index=0).uniforms(200_000)
    assert u.min() > 0.0
    assert u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 0.001


def test_uniform_offset_slices_the_same_stream():
    s = Substream(seed=7, path_index=3)
    full = s.uniforms(100)
    assert np.array_equal(s.uniforms(60, offset=40), full[40:])


@pytest.mark.parametrize("mean", [0.5, 3.0, 9.99, 10.01, 55.0, 1250.0])
def test_poisson_sampler_matches_law(mean, chi2_gof):
    draws = np.concatenate([Substream(seed=7, path_index=i).poissons(mean, 200)
                            for i in range(400)])
    lo = max(0, int(mean - 8.0 * math.sqrt(mean)))
    hi = int(mean + 8.0 * math.sqrt(mean)) + 1
    ks = np.arange(lo, hi + 1)
    pk = stats.poisson(mean)
    probs = pk.pmf(ks)
    probs[0] += pk.cdf(lo - 1)
    probs[-1] += pk.sf(hi)
    observed = np.array([(draws == k).sum() for k in ks], dtype=float)
    observed[0] += (draws < lo).sum()
    observed[-1] += (draws > hi).sum()
    assert chi2_gof(observed, probs, len(draws)) > 0.001


def test_exponential_and_gamma_samplers_match_law():
    import numba

    from garch_intensity import rng

    @numba.njit
    def draw(seed, count, kind, p1, p2):
        out = np.empty(count)
        for i in range(count):
            if kind == 1:
                x, _ = rng.rand_exponential(np.uint64(seed), np.uint64(i), np.uint64(0), p1)
            else:
                x, _ = rng.rand_gamma(np.uint64(seed), np.uint64(i), np.uint64(0), p1, p2)
            out[i] = x
        return out

    e = draw(11, 100_000, 1, 0.02, 0.0)
    assert e.min() > 0.0
    assert stats.kstest(e, "expon", args=(0, 0.02)).pvalue > 0.001
    g = draw(12, 100_000, 2, 2.3, 0.7)
    assert stats.kstest(g, "gamma", args=(2.3, 0, 0.7)).pvalue > 0.001
    g_small_shape = draw(13, 100_000, 2, 0.6, 1.5)
    assert g_small_shape.min() > 0.0
    assert stats.kstest(g_small_shape, "gamma", args=(0.6, 0, 1.5)).pvalue > 0.001
