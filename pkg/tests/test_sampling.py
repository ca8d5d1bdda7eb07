import numpy as np
import pytest
from scipy import stats

from dpcopt.errors import InvalidInputError
from dpcopt.sampling import (
    RandomStream,
    gaussian_vector,
    subsample_without_replacement,
    uniform_ball_point,
    uniform_ball_points,
)


def test_fixed_stream_replays_bit_identical():
    a = gaussian_vector(100, 1.0, RandomStream(42, 3))
    b = gaussian_vector(100, 1.0, RandomStream(42, 3))
    assert np.array_equal(a, b)


def test_distinct_stream_ids_differ():
    a = gaussian_vector(100, 1.0, RandomStream(42, 0))
    b = gaussian_vector(42, 1.0, RandomStream(42, 1))
    assert not np.array_equal(a[:42], b)


def test_child_streams_are_independent_of_consumption_order():
    parent = RandomStream(7)
    c0_first = parent.child(0).gen.normal(size=5)
    parent2 = RandomStream(7)
    parent2.child(1).gen.normal(size=1000)  # consume sibling heavily
    c0_second = parent2.child(0).gen.normal(size=5)
    assert np.array_equal(c0_first, c0_second)


def test_gaussian_zero_sigma_is_zero_vector():
    assert np.array_equal(gaussian_vector(8, 0.0, RandomStream(0)), np.zeros(8))


def test_gaussian_moments():
    # CLT bound: sample mean within 3/sqrt(d) of 0
    v = gaussian_vector(10_000, 1.0, RandomStream(11))
    assert abs(v.mean()) < 0.03
    # chi-square concentration at 3 sigma for variance 4
    v2 = gaussian_vector(10_000, 2.0, RandomStream(12))
    assert 3.7 < v2.var() < 4.3


def test_gaussian_rejects_negative_sigma_and_bad_dim():
    with pytest.raises(InvalidInputError):
        gaussian_vector(4, -1.0, RandomStream(0))
    with pytest.raises(InvalidInputError):
        gaussian_vector(0, 1.0, RandomStream(0))


def test_ball_degenerate_radius():
    assert np.array_equal(uniform_ball_point(5, 0.0, RandomStream(0)), np.zeros(5))


def test_ball_draws_stay_inside():
    rng = RandomStream(3)
    for _ in range(200):
        y = uniform_ball_point(6, 0.7, rng)
        assert np.linalg.norm(y) <= 0.7 + 1e-12


def test_ball_1d_mean_abs():
    # analytic mean of |Uniform[-r, r]| is r/2; tolerance at 3 standard errors
    rng = RandomStream(5)
    draws = uniform_ball_points(100_000, 1, 0.1, rng)[:, 0]
    assert abs(np.abs(draws).mean() - 0.05) < 0.0006


def test_ball_radial_law_kolmogorov_smirnov():
    # for d=3, r=1 the norm has CDF t^3
    draws = uniform_ball_points(100_000, 3, 1.0, RandomStream(9))
    norms = np.linalg.norm(draws, axis=1)
    stat = stats.kstest(norms, lambda t: np.clip(t, 0, 1) ** 3).statistic
    assert stat < 0.01


def test_ball_rejects_negative_radius():
    with pytest.raises(InvalidInputError):
        uniform_ball_point(3, -0.1, RandomStream(0))


def test_subsample_full_set():
    assert np.array_equal(subsample_without_replacement(5, 5, RandomStream(0)), np.arange(5))


def test_subsample_sizes_and_uniqueness():
    rng = RandomStream(14)
    for _ in range(100):
        idx = subsample_without_replacement(50, 7, rng)
        assert len(idx) == 7
        assert len(np.unique(idx)) == 7


def test_subsample_rejects_bad_sizes():
    with pytest.raises(InvalidInputError):
        subsample_without_replacement(4, 5, RandomStream(0))
    with pytest.raises(InvalidInputError):
        subsample_without_replacement(4, 0, RandomStream(0))


def test_subsample_single_uniform():
    # B=1, N=4: each index frequency within 0.013 of 1/4 over 1e5 trials
    rng = RandomStream(21)
    counts = np.zeros(4)
    trials = 100_000
    draws = rng.gen.choice(4, size=trials)  # oracle noise floor for comparison
    for _ in range(trials):
        counts[subsample_without_replacement(4, 1, rng)[0]] += 1
    freqs = counts / trials
    assert np.all(np.abs(freqs - 0.25) < 0.013), freqs
    assert draws.shape == (trials,)


def test_subsample_pairs_uniform_over_enumeration():
    # B=2, N=4: all 6 unordered pairs occur with frequency 1/6 +- 3 sigma
    rng = RandomStream(22)
    trials = 100_000
    from collections import Counter
    cnt = Counter()
    for _ in range(trials):
        idx = tuple(sorted(subsample_without_replacement(4, 2, rng)))
        cnt[idx] += 1
    pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    assert set(cnt) == set(pairs)
    three_sigma = 3 * np.sqrt((1 / 6) * (5 / 6) / trials)
    for p in pairs:
        assert abs(cnt[p] / trials - 1 / 6) < three_sigma, (p, cnt[p] / trials)
