import math

import mpmath
import numpy as np
import pytest
from scipy import special, stats

from knnlab.errors import DomainError
from knnlab.geometry import Disk
from knnlab.point_process import (Model, PointSet, poisson_counts, poisson_log_pmf,
                                  poisson_window_probability, region_count, sample,
                                  sample_fixed, sample_poisson, sample_poisson_batch,
                                  window_bounds, window_normal_limit)
from knnlab.rng import derive_seeds


def test_sample_fixed_empty():
    ps = sample_fixed(0, 1)
    assert ps.actual_count == 0 and ps.points.shape == (0, 2)


def test_sample_fixed_deterministic_and_prefix():
    a, b = sample_fixed(1000, 42), sample_fixed(1000, 42)
    assert a == b
    assert np.array_equal(sample_fixed(10, 42).points, a.points[:10])
    assert not np.array_equal(sample_fixed(1000, 43).points, a.points)


def test_sample_fixed_moments():
    ps = sample_fixed(10_000, 3)
    assert ps.points.min() >= 0 and ps.points.max() <= 1
    assert abs(ps.points[:, 0].mean() - 0.5) <= 3 * (1 / math.sqrt(12)) / 100
    assert abs(ps.points[:, 1].mean() - 0.5) <= 3 * (1 / math.sqrt(12)) / 100


def test_sample_fixed_rejects_bad_n():
    with pytest.raises(DomainError):
        sample_fixed(-1, 0)


def test_sample_dispatch():
    assert sample("fixed", 99.6, 1).actual_count == 100
    assert sample(Model.POISSON, 10, 1).model is Model.POISSON


def test_tiny_intensity_is_empty():
    counts = poisson_counts(1e-9, derive_seeds(0, np.arange(10_000)))
    assert counts.sum() == 0
    assert sample_poisson(1e-9, 5).actual_count == 0


@pytest.mark.parametrize("mean", [100.0, 5.0, 30.0, 31.0])
def test_poisson_count_mean(mean):
    counts = poisson_counts(mean, derive_seeds(11, np.arange(100_000)))
    assert abs(counts.mean() - mean) <= 3 * math.sqrt(mean) / math.sqrt(100_000)


@pytest.mark.parametrize("mean", [0.7, 5.0, 50.0, 1000.0])
def test_poisson_count_distribution(mean):
    counts = poisson_counts(mean, derive_seeds(17, np.arange(200_000)))
    lo, hi = stats.poisson.ppf(1e-4, mean), stats.poisson.ppf(1 - 1e-4, mean)
    edges = np.arange(lo, hi + 1)
    obs = np.array([np.count_nonzero(counts < lo)]
                   + [np.count_nonzero(counts == e) for e in edges]
                   + [np.count_nonzero(counts > hi)])
    probs = np.concatenate(([stats.poisson.cdf(lo - 1, mean)], stats.poisson.pmf(edges, mean),
                            [stats.poisson.sf(hi, mean)]))
    keep = probs * len(counts) >= 5
    exp = probs[keep] * len(counts)
    obs = obs[keep]
    assert stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue > 1e-3


def test_batch_matches_single_samples():
    seeds = derive_seeds(8, np.arange(40))
    pts, owner = sample_poisson_batch(50.0, seeds)
    for i, s in enumerate(seeds):
        single = sample_poisson(50.0, int(s))
        assert np.array_equal(pts[owner == i], single.points)


def test_void_probability():
    N = 100.0
    disk = Disk((0.3, 0.6), math.sqrt(0.01 / math.pi))
    trials = 100_000
    pts, owner = sample_poisson_batch(N, derive_seeds(21, np.arange(trials)))
    inside = np.bincount(owner[disk.contains(pts)], minlength=trials)
    p = math.exp(-1)
    freq = np.mean(inside == 0)
    assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / trials)


def test_disjoint_region_counts_independent():
    trials = 100_000
    d1 = Disk((0.25, 0.25), math.sqrt(0.01 / math.pi))
    d2 = Disk((0.7, 0.7), math.sqrt(0.01 / math.pi))
    pts, owner = sample_poisson_batch(100.0, derive_seeds(33, np.arange(trials)))
    c1 = np.minimum(np.bincount(owner[d1.contains(pts)], minlength=trials), 3)
    c2 = np.minimum(np.bincount(owner[d2.contains(pts)], minlength=trials), 3)
    table = np.zeros((4, 4))
    np.add.at(table, (c1, c2), 1)
    assert stats.chi2_contingency(table).pvalue >= 0.01


def test_region_count():
    d = Disk((0.5, 0.5), 0.25)
    empty = PointSet(Model.FIXED, 0.0, 0, np.empty((0, 2)))
    assert region_count(empty, d) == 0
    assert region_count(np.array([[0.75, 0.5]]), d) == 1
    pts = np.array([[0.5, 0.5], [0.6, 0.55], [0.9, 0.9]])
    assert region_count(pts, d) == 2


@pytest.mark.parametrize("mean", [0.5, 7.0, 50.0, 1e4, 1e8, 1e12])
def test_log_pmf_against_high_precision(mean):
    # scipy's logpmf loses ~1e-7 absolute at mean 1e8, so the oracle is mpmath
    mpmath.mp.dps = 40
    j = np.unique(np.clip(np.round(mean + np.linspace(-8, 8, 41) * math.sqrt(mean)), 0, None))
    m = mpmath.mpf(mean)
    exact = [float(x * mpmath.log(m) - m - mpmath.loggamma(x + 1)) for x in j]
    assert np.allclose(poisson_log_pmf(j, mean), exact, rtol=0, atol=1e-10)


def test_window_probability_small():
    assert poisson_window_probability(1.0) == pytest.approx(2.5 * math.exp(-1), abs=1e-12)
    assert window_bounds(1.0) == (0, 2)


@pytest.mark.parametrize("N", [1.0, 3.3, 10.0, 77.0, 1e3, 1e4, 1e5, 1e7])
def test_window_probability_against_cdf_oracle(N):
    lo, hi = window_bounds(N)
    oracle = special.pdtr(hi, N) - (special.pdtr(lo - 1, N) if lo > 0 else 0.0)
    assert poisson_window_probability(N) == pytest.approx(oracle, abs=1e-12)


def test_window_probability_near_normal_limit():
    assert poisson_window_probability(1e4) == pytest.approx(0.791, abs=1e-3)
    for N in (1e3, 1e4, 1e5):
        assert abs(poisson_window_probability(N) - window_normal_limit()) <= 2e-2
    assert window_normal_limit() == pytest.approx(0.790, abs=1e-3)
    assert poisson_window_probability(1e12) == pytest.approx(window_normal_limit(), abs=1e-5)


def test_window_rejects_nonpositive():
    with pytest.raises(DomainError):
        poisson_window_probability(0.0)
