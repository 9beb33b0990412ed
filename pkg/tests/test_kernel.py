"""Kernel tests: continuous solves, branch and bound vs. enumeration oracle."""

import itertools

import numpy as np
import pytest

from flexgrid.kernel import (EQ, GE, INF, LE, ConicModel, ModelError,
                             solve_continuous, solve_mixed)


def enumerate_binaries(model):
    """Brute-force oracle: try every binary assignment, keep the best solve."""
    bins = model.binaries
    lb0, ub0 = model.lower_bounds(), model.upper_bounds()
    best = None
    for assignment in itertools.product((0.0, 1.0), repeat=len(bins)):
        lb, ub = lb0.copy(), ub0.copy()
        for vid, val in zip(bins, assignment):
            lb[vid] = ub[vid] = val
        r = solve_continuous(model, lb=lb, ub=ub)
        if r.optimal and (best is None or r.objective < best):
            best = r.objective
    return best


def test_bound_active_lp():
    m = ConicModel()
    x = m.add_var("x", lb=0, obj=1.0)
    m.add_linear([(x, 1.0)], GE, 3.0)
    r = solve_continuous(m)
    assert r.optimal
    assert r.objective == pytest.approx(3.0, abs=1e-6)


def test_euclidean_norm_cone():
    m = ConicModel()
    t = m.add_var("t", lb=0, obj=1.0)
    m.add_soc(([(t, 1.0)], 0.0), [([], 3.0), ([], 4.0)])
    r = solve_continuous(m)
    assert r.optimal
    assert r.objective == pytest.approx(5.0, abs=1e-6)


def test_degenerate_face_objective_only():
    m = ConicModel()
    x = m.add_var("x", lb=0, obj=-1.0)
    y = m.add_var("y", lb=0, obj=-1.0)
    m.add_linear([(x, 1.0), (y, 1.0)], LE, 1.0)
    r = solve_continuous(m)
    assert r.optimal
    assert r.objective == pytest.approx(-1.0, abs=1e-6)


def test_infeasible_and_unbounded_detection():
    m = ConicModel()
    x = m.add_var("x", 0.0, 1.0, obj=1.0)
    m.add_linear([(x, 1.0)], GE, 2.0)
    assert solve_continuous(m).status == "infeasible"

    m = ConicModel()
    m.add_var("x", lb=-INF, ub=INF, obj=1.0)
    assert solve_continuous(m).status == "unbounded"


def test_optimal_residual_within_tol():
    m = ConicModel()
    x = m.add_var("x", lb=0, obj=1.0)
    y = m.add_var("y", lb=0, obj=2.0)
    m.add_linear([(x, 1.0), (y, 1.0)], EQ, 4.0)
    m.add_linear([(x, 1.0), (y, -1.0)], LE, 1.0)
    r = solve_continuous(m, tol=1e-7)
    assert r.optimal
    assert r.max_residual <= 1e-7


def test_mip_two_binary_cover():
    # x + y >= 1.5 with binaries forces x = y = 1
    m = ConicModel()
    x = m.add_var("x", 0, 1, binary=True, obj=1.0)
    y = m.add_var("y", 0, 1, binary=True, obj=2.0)
    m.add_linear([(x, 1.0), (y, 1.0)], GE, 1.5)
    r = solve_mixed(m)
    assert r.optimal
    assert r.objective == pytest.approx(enumerate_binaries(m), abs=1e-6)
    assert r.objective == pytest.approx(3.0, abs=1e-6)


def test_mip_fixed_binaries_equals_continuous():
    m = ConicModel()
    x = m.add_var("x", 1.0, 1.0, binary=True, obj=1.0)
    y = m.add_var("y", lb=0, obj=1.0)
    m.add_linear([(x, 1.0), (y, 1.0)], GE, 1.5)
    assert solve_mixed(m).objective == pytest.approx(
        solve_continuous(m).objective, abs=1e-8)


def _random_instance(rng):
    """Small mixed instance: knapsack-style rows plus a few continuous vars."""
    m = ConicModel()
    n_bin = int(rng.integers(2, 11))
    n_cont = int(rng.integers(0, 3))
    xs = [m.add_var(f"b{i}", 0, 1, binary=True,
                    obj=float(rng.normal(0, 2))) for i in range(n_bin)]
    ys = [m.add_var(f"y{i}", -5.0, 5.0, obj=float(rng.normal(0, 1)))
          for i in range(n_cont)]
    for _ in range(int(rng.integers(1, 4))):
        terms = [(v, float(rng.uniform(0.2, 2.0))) for v in xs]
        terms += [(v, float(rng.normal(0, 1))) for v in ys]
        sense = LE if rng.random() < 0.7 else GE
        rhs = float(rng.uniform(0.5, 0.7 * n_bin))
        m.add_linear(terms, sense, rhs)
    return m


def test_mip_matches_enumeration_on_random_instances():
    rng = np.random.default_rng(20240803)
    checked = 0
    for _ in range(50):
        m = _random_instance(rng)
        oracle = enumerate_binaries(m)
        r = solve_mixed(m)
        if oracle is None:
            assert r.status == "infeasible"
        else:
            assert r.optimal
            assert r.objective == pytest.approx(oracle, abs=1e-6)
            assert r.extra["root_bound"] <= r.objective + 1e-6 * max(1, abs(r.objective))
            checked += 1
    assert checked >= 30  # most random instances should be feasible


def test_mip_deterministic():
    rng = np.random.default_rng(7)
    m = _random_instance(rng)
    r1 = solve_mixed(m)
    r2 = solve_mixed(m)
    assert r1.status == r2.status
    if r1.optimal:
        assert abs(r1.objective - r2.objective) <= 1e-9
        assert np.array_equal(r1.x[list(m.binaries)], r2.x[list(m.binaries)])


def test_mip_respects_node_limit():
    rng = np.random.default_rng(99)
    m = _random_instance(rng)
    r = solve_mixed(m, node_limit=1)
    assert r.status in ("optimal", "iteration_limit", "infeasible")
    if r.status == "iteration_limit" and r.x is not None:
        assert not r.extra["gap_proven"]


def test_mip_with_cone():
    # pick 2 of 3 sites minimizing cost with a norm coupling on continuous vars
    m = ConicModel()
    b = [m.add_var(f"b{i}", 0, 1, binary=True, obj=c)
         for i, c in enumerate((1.0, 1.3, 0.9))]
    u = m.add_var("u", lb=0, obj=0.5)
    m.add_linear([(v, 1.0) for v in b], GE, 2.0)
    m.add_soc(([(u, 1.0)], 0.0), [([(b[0], 1.0)], 0.0), ([(b[2], 1.0)], -0.5)])
    r = solve_mixed(m)
    assert r.optimal
    assert r.objective == pytest.approx(enumerate_binaries(m), abs=1e-6)


def test_binary_bounds_validated():
    m = ConicModel()
    with pytest.raises(ModelError):
        m.add_var("bad", lb=0.0, ub=2.0, binary=True)
    with pytest.raises(ModelError):
        m.add_linear([(5, 1.0)], LE, 1.0)


def test_lp_dump(tmp_path):
    from flexgrid.kernel import write_lp
    m = ConicModel("dump")
    x = m.add_var("x", 0, 2.0, obj=1.0)
    b = m.add_var("b", 0, 1, binary=True, obj=-0.5)
    m.add_linear([(x, 1.0), (b, -1.0)], GE, 0.5, "link")
    m.add_soc(([(x, 1.0)], 0.0), [([(b, 1.0)], 0.0)])
    path = tmp_path / "model.lp"
    write_lp(m, str(path))
    text = path.read_text()
    assert "Minimize" in text and "link:" in text
    assert "Binaries" in text and " b\n" in text
    assert "soc0" in text
    assert "End" in text
