"""Scenario sampling and reduction tests."""

import numpy as np
import pytest

from flexgrid.core import SamplingSpec, bundled_case_69
from flexgrid.scenarios import (generate_scenarios, reduce_kmeans,
                                sample_scenarios, source_capacities,
                                source_forecasts, stacked_keys)

FORECASTS = {"a.wt": tuple(100.0 + 10.0 * t for t in range(4)),
             "a.pv": (0.0, 50.0, 80.0, 20.0)}
CAPS = {"a.wt": 200.0, "a.pv": 100.0}


def test_zero_noise_reproduces_forecast():
    spec = SamplingSpec(n_samples=7, sigma_rel=0.0, n_scenarios=2, seed=1)
    s = sample_scenarios(spec, FORECASTS, CAPS)
    stacked = np.concatenate([FORECASTS[k] for k in stacked_keys(FORECASTS)])
    assert np.allclose(s, stacked[None, :])


def test_same_seed_same_samples():
    spec = SamplingSpec(n_samples=50, sigma_rel=0.2, n_scenarios=3, seed=42)
    assert np.array_equal(sample_scenarios(spec, FORECASTS, CAPS),
                          sample_scenarios(spec, FORECASTS, CAPS))
    other = sample_scenarios(spec, FORECASTS, CAPS, seed=43)
    assert not np.array_equal(sample_scenarios(spec, FORECASTS, CAPS), other)


def test_samples_respect_capacity_and_sign():
    spec = SamplingSpec(n_samples=500, sigma_rel=0.5, n_scenarios=3, seed=5)
    s = sample_scenarios(spec, FORECASTS, CAPS)
    assert s.min() >= 0.0
    T = 4
    keys = stacked_keys(FORECASTS)
    for i, k in enumerate(keys):
        assert s[:, i * T:(i + 1) * T].max() <= CAPS[k] + 1e-12


def test_sample_mean_near_forecast():
    # law of large numbers with mild truncation
    forecasts = {"x.wt": (100.0, 150.0, 120.0)}
    caps = {"x.wt": 1000.0}
    spec = SamplingSpec(n_samples=100_000, sigma_rel=0.1, n_scenarios=2, seed=3)
    s = sample_scenarios(spec, forecasts, caps)
    mean = s.mean(axis=0)
    for t, f in enumerate(forecasts["x.wt"]):
        assert abs(mean[t] - f) / f < 0.01


def test_kmeans_identical_samples_degenerate():
    data = np.ones((40, 6)) * 3.0
    centers, counts, assignment = reduce_kmeans(data, 3, seed=0)
    assert counts.sum() == 40
    assert np.max(counts) == 40  # all mass on one effective cluster
    assert np.allclose(centers[np.argmax(counts)], 3.0)


def test_kmeans_probabilities_partition():
    rng = np.random.default_rng(11)
    data = rng.uniform(0, 100, size=(200, 8))
    centers, counts, assignment = reduce_kmeans(data, 5, seed=7)
    assert counts.sum() == 200
    assert np.bincount(assignment, minlength=5).tolist() == counts.tolist()
    # each point at least as close to its own centroid as to any other
    d2 = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    own = d2[np.arange(len(data)), assignment]
    assert np.all(own <= d2.min(axis=1) + 1e-9)


def test_kmeans_two_blobs():
    rng = np.random.default_rng(2)
    a = rng.normal(0.0, 1.0, size=(300, 5))
    b = rng.normal(20.0, 1.0, size=(700, 5))
    data = np.vstack([a, b])
    centers, counts, _ = reduce_kmeans(data, 2, seed=9)
    means = sorted(centers.mean(axis=1))
    assert abs(means[0] - 0.0) < 3.0 / np.sqrt(300)
    assert abs(means[1] - 20.0) < 3.0 / np.sqrt(700)
    props = sorted(counts / 1000.0)
    assert props[0] == pytest.approx(0.3, abs=0.02)
    assert props[1] == pytest.approx(0.7, abs=0.02)


def test_generate_scenarios_bundled_case():
    case = bundled_case_69()
    ss = generate_scenarios(case)
    assert ss.size == 5
    assert sum(ss.counts) == case.sampling.n_samples
    assert sum(ss.probabilities) == pytest.approx(1.0, abs=1e-12)
    keys = set(source_forecasts(case))
    caps = source_capacities(case)
    T = case.time_grid.periods
    for sc in ss.scenarios:
        assert set(sc) == keys
        for k, series in sc.items():
            assert len(series) == T
            assert min(series) >= 0.0
            assert max(series) <= caps[k] + 1e-9
    # determinism
    again = generate_scenarios(case)
    assert again == ss
