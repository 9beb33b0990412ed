"""Renewable-output scenarios: Monte-Carlo sampling and k-means reduction.

Sampling perturbs each forecast multiplicatively with independent normal
noise per source and period, clipped into [0, capacity].  Reduction runs
Lloyd's algorithm with k-means++ seeding on the stacked trajectories of all
sources; scenario probabilities are cluster shares.
"""

from __future__ import annotations

import numpy as np

from .core.types import CaseConfig, SamplingSpec, ScenarioSet, Series
from .core.validate import scenario_source_keys


def source_forecasts(case: CaseConfig) -> dict[str, Series]:
    """Forecast series per stochastic source, keyed as in scenario files."""
    out: dict[str, Series] = {}
    for f in case.adn.wt_farms:
        out[f"adn.wt.{f.node}"] = f.profile
    for f in case.adn.pv_farms:
        out[f"adn.pv.{f.node}"] = f.profile
    for c in case.cies:
        out[f"cies.{c.name}.wt"] = c.wt_forecast
        out[f"cies.{c.name}.pv"] = c.pv_forecast
    return out


def source_capacities(case: CaseConfig) -> dict[str, float]:
    out: dict[str, float] = {}
    for f in case.adn.wt_farms:
        out[f"adn.wt.{f.node}"] = f.capacity_kw
    for f in case.adn.pv_farms:
        out[f"adn.pv.{f.node}"] = f.capacity_kw
    for c in case.cies:
        out[f"cies.{c.name}.wt"] = c.wt_capacity
        out[f"cies.{c.name}.pv"] = c.pv_capacity
    return out


def sample_scenarios(spec: SamplingSpec, forecasts: dict[str, Series],
                     capacities: dict[str, float],
                     seed: int | None = None) -> np.ndarray:
    """Raw samples, shape (n_samples, n_sources * T); deterministic per seed.

    Sources are stacked in sorted key order (see ``stacked_keys``).
    """
    keys = sorted(forecasts)
    T = len(next(iter(forecasts.values())))
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    blocks = []
    for k in keys:
        base = np.asarray(forecasts[k], dtype=float)
        eps = rng.normal(0.0, spec.sigma_rel, size=(spec.n_samples, T))
        draw = base[None, :] * (1.0 + eps)
        blocks.append(np.clip(draw, 0.0, capacities[k]))
    return np.hstack(blocks)


def stacked_keys(forecasts: dict[str, Series]) -> list[str]:
    return sorted(forecasts)


def _kmeans_pp_seed(data: np.ndarray, k: int, rng) -> np.ndarray:
    n = data.shape[0]
    centers = np.empty((k, data.shape[1]))
    centers[0] = data[rng.integers(n)]
    d2 = np.sum((data - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = data[rng.integers(n)]
            continue
        probs = d2 / total
        centers[j] = data[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((data - centers[j]) ** 2, axis=1))
    return centers


def _assign(data: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def reduce_kmeans(samples: np.ndarray, n_scenarios: int, seed: int,
                  max_iter: int = 300) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lloyd iterations to an assignment fixpoint (or ``max_iter``).

    Returns (centroids, counts, assignment).  An emptied cluster is re-seeded
    at the point farthest from its centroid.
    """
    n = samples.shape[0]
    if n_scenarios > n:
        raise ValueError("more scenarios requested than samples")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_seed(samples, n_scenarios, rng)
    assignment = _assign(samples, centers)
    for _ in range(max_iter):
        for j in range(n_scenarios):
            members = samples[assignment == j]
            if len(members):
                centers[j] = members.mean(axis=0)
            else:
                d2 = np.sum((samples - centers[j]) ** 2, axis=1)
                centers[j] = samples[np.argmax(d2)]
        new_assignment = _assign(samples, centers)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
    counts = np.bincount(assignment, minlength=n_scenarios)
    return centers, counts, assignment


def generate_scenarios(case: CaseConfig, seed: int | None = None) -> ScenarioSet:
    """Sample, reduce, and package scenarios for the case's sources."""
    spec = case.sampling
    forecasts = source_forecasts(case)
    caps = source_capacities(case)
    samples = sample_scenarios(spec, forecasts, caps, seed)
    use_seed = spec.seed if seed is None else seed
    centers, counts, _ = reduce_kmeans(samples, spec.n_scenarios, use_seed)
    keys = stacked_keys(forecasts)
    T = case.time_grid.periods
    scenarios = []
    for row in centers:
        sc = {}
        for i, k in enumerate(keys):
            sc[k] = tuple(float(v) for v in row[i * T:(i + 1) * T])
        scenarios.append(sc)
    n = samples.shape[0]
    probs = tuple(int(c) / n for c in counts)
    ss = ScenarioSet(tuple(scenarios), probs, tuple(int(c) for c in counts))
    missing = set(scenario_source_keys(case)) - set(keys)
    if missing:
        raise ValueError(f"sources without forecasts: {sorted(missing)}")
    return ss
