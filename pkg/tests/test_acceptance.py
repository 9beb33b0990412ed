"""Acceptance suite: one test per criterion, each at its stated tolerance.

The bundled-case studies (mode 1, mode 4, the scarcity variant, and the
centralized solve) are computed once at module scope and shared; the
terminal summary prints one PASS/FAIL line per criterion.
"""

import itertools
import time

import numpy as np
import pytest

from flexgrid.atc import run_atc, solve_centralized
from flexgrid.core import bundled_case_69, scarcity_tightened
from flexgrid.dispatch.adn import two_node_flow
from flexgrid.dispatch.cies import cvar_value
from flexgrid.flex.envelope import flex_extremes, margins
from flexgrid.flex.predispatch import solve_predispatch
from flexgrid.kernel import (EQ, GE, INF, LE, ConicModel, solve_continuous,
                             solve_mixed)
from flexgrid.pricing import cies_prices
from flexgrid.reporting import insufficient_flexibility
from flexgrid.scenarios import generate_scenarios

from conftest import record_criterion, small_case
from test_flex import _mt, eb, hrb, toy_cies
from test_kernel import _random_instance, enumerate_binaries


def _study(case, mode):
    ss = generate_scenarios(case)
    tou = case.adn.tou_price
    if mode == "mode1":
        prices = {c.name: tou for c in case.cies}
    else:
        prices = {}
        for c in case.cies:
            pre = solve_predispatch(c, case.time_grid)
            env = margins(c, pre, case.time_grid)
            prices[c.name] = cies_prices(c, env, case.pricing, tou)
    t0 = time.time()
    run = run_atc(case, ss, prices)
    wall = time.time() - t0
    insuff = insufficient_flexibility(run.adn, run.cies, ss.probabilities)
    return run, insuff, wall, ss, prices


@pytest.fixture(scope="module")
def studies():
    base = bundled_case_69()
    scarce = scarcity_tightened(base)
    out = {
        "mode1": _study(base, "mode1"),
        "mode4": _study(base, "mode4"),
        "scarce1": _study(scarce, "mode1"),
        "scarce4": _study(scarce, "mode4"),
    }
    return base, scarce, out


@pytest.fixture(scope="module")
def central(studies):
    base, _, out = studies
    _, _, _, ss, prices = out["mode4"]
    t0 = time.time()
    cent = solve_centralized(base, ss, prices)
    return cent, time.time() - t0


def test_criterion_1_mode_ordering_and_scarcity(studies):
    base, scarce, out = studies
    run1, insuff1, w1, _, _ = out["mode1"]
    run4, insuff4, w4, _, _ = out["mode4"]
    s1, sin1, w5, _, _ = out["scarce1"]
    s4, sin4, w6, _, _ = out["scarce4"]
    runtime = w1 + w4 + w5 + w6
    # "zero" for an expectation summed over thousands of nonnegative
    # interior-point variables: below one watt system-wide
    ok = (run4.total_cost < run1.total_cost
          and sin1 > 1.0 and sin4 <= 1e-3
          and runtime <= 600.0)
    record_criterion(1, ok,
                     f"mode4 {run4.total_cost:.2f} < mode1 "
                     f"{run1.total_cost:.2f}; variant insufficiency "
                     f"{sin1:.2f} vs {sin4:.2f} kW; runtime {runtime:.0f}s")
    assert run4.total_cost < run1.total_cost
    assert sin1 > 1.0
    assert sin4 <= 1e-3
    assert runtime <= 600.0


def test_criterion_2_centralized_bound(studies, central):
    base, _, out = studies
    run4 = out["mode4"][0]
    cent, _ = central
    checks = [cent.total_cost <= run4.total_cost * (1 + 1e-6)]
    details = [f"bundled {cent.total_cost:.2f} <= {run4.total_cost:.2f}"]
    for seed in (101, 202, 303):
        case = small_case(seed=seed)
        ss = generate_scenarios(case)
        prices = {"c1": tuple(1.25 * p for p in case.adn.tou_price)}
        run = run_atc(case, ss, prices)
        c = solve_centralized(case, ss, prices)
        checks.append(c.total_cost <= run.total_cost * (1 + 1e-6))
        details.append(f"seed{seed} {c.total_cost:.1f}<={run.total_cost:.1f}")
    record_criterion(2, all(checks), "; ".join(details))
    assert all(checks)


def test_criterion_3_atc_convergence(studies):
    base, _, out = studies
    run = out["mode4"][0]
    eps1 = base.atc.eps1
    gap_trace = [it.max_gap for it in run.trace]
    tie_agree = True
    for n in run.cies:
        adn_net = run.adn.buy[n] - run.adn.sell[n]
        cies_net = run.cies[n].sell - run.cies[n].buy
        tie_agree &= bool(np.max(np.abs(adn_net - cies_net)) <= eps1)
    ok = (run.converged and run.iterations <= 30
          and min(gap_trace) < eps1
          and run.trace[-1].max_gap <= eps1
          and run.trace[-1].rel_cost_change <= base.atc.eps2
          and tie_agree)
    record_criterion(3, ok,
                     f"converged in {run.iterations} iters, final gap "
                     f"{run.trace[-1].max_gap:.2e} kW")
    assert ok


def test_criterion_4_cvar_oracle_equivalence():
    rng = np.random.default_rng(42)
    worst = 0.0
    for i in range(100):
        S = int(rng.integers(2, 11))
        beta = float(rng.choice([0.8, 0.9, 0.95]))
        risks = rng.uniform(0.0, 100.0, S)
        probs = rng.dirichlet(np.ones(S))
        probs = probs / probs.sum()
        # embedded block: minimize alpha + E[z]/(1-beta), z >= risk - alpha
        m = ConicModel("cvar")
        alpha = m.add_var("alpha", -INF, INF, obj=1.0)
        for s in range(S):
            z = m.add_var(f"z{s}", 0.0, INF, obj=probs[s] / (1.0 - beta))
            m.add_linear([(z, 1.0), (alpha, 1.0)], GE, risks[s])
        res = solve_continuous(m)
        assert res.optimal
        worst = max(worst, abs(res.objective - cvar_value(risks, probs, beta)))
    # five equiprobable scenarios at beta = 0.95: the tail is the worst case
    risks = np.array([3.0, 9.0, 1.0, 7.0, 5.0])
    exact = cvar_value(risks, [0.2] * 5, 0.95)
    ok = worst <= 1e-6 and exact == 9.0
    record_criterion(4, ok, f"max |embedded - oracle| = {worst:.2e}")
    assert worst <= 1e-6
    assert exact == 9.0


def test_criterion_5_soc_relaxation_tightness(studies, central):
    _, _, out = studies
    cent, _ = central
    residuals = {k: v[0].adn.cone_residual_max for k, v in out.items()}
    residuals["centralized"] = cent.adn.cone_residual_max
    ok = all(v <= 1e-4 for v in residuals.values())

    # two-node instances against the bisection oracle
    z_base = 12.66 ** 2
    worst = 0.0
    for r_ohm, x_ohm, p_l, q_l in ((0.5, 0.4, 0.8, 0.35),
                                   (1.2, 0.9, 0.5, 0.2),
                                   (0.2, 0.3, 1.5, 0.6)):
        r_pu, x_pu = r_ohm / z_base, x_ohm / z_base
        m = ConicModel("two-node")
        p = m.add_var("p", -INF, INF)
        q = m.add_var("q", -INF, INF)
        l = m.add_var("l", 0.0, INF, obj=1.0)
        v = m.add_var("v", 0.8, 1.2)
        m.add_linear([(p, 1.0), (l, -r_pu)], EQ, p_l)
        m.add_linear([(q, 1.0), (l, -x_pu)], EQ, q_l)
        m.add_linear([(v, 1.0), (p, 2 * r_pu), (q, 2 * x_pu),
                      (l, -(r_pu ** 2 + x_pu ** 2))], EQ, 1.0)
        m.add_soc(([(l, 1.0)], 1.0), [([(p, 2.0)], 0.0), ([(q, 2.0)], 0.0),
                                      ([(l, 1.0)], -1.0)])
        res = solve_continuous(m)
        po, qo, lo, vo = two_node_flow(r_pu, x_pu, p_l, q_l)
        for a, b in ((res.x[p], po), (res.x[q], qo), (res.x[l], lo),
                     (res.x[v], vo)):
            worst = max(worst, abs(a - b))
    ok = ok and worst <= 1e-5
    record_criterion(
        5, ok, f"dispatch cone residual max {max(residuals.values()):.2e}; "
               f"two-node mismatch {worst:.2e}")
    assert all(v <= 1e-4 for v in residuals.values()), residuals
    assert worst <= 1e-5


def _grid_search_extreme(cies, pre, t, grid):
    """Vectorized lattice search over (mt, eb, bes) with balance filtering."""
    from flexgrid.flex.envelope import _period_boxes
    boxes = _period_boxes(cies, pre, t, grid)
    step = 1.0
    mt_vals = np.arange(boxes.mt[0], boxes.mt[1] + step / 2, step)
    eb_box = next((b for k, b in boxes.coupling.items()
                   if k.startswith("eb")), None)
    eb_vals = (np.arange(eb_box[0], eb_box[1] + step / 2, step)
               if eb_box else np.array([0.0]))
    bes_vals = (np.arange(boxes.bes[0], boxes.bes[1] + step / 2, step)
                if boxes.bes != (0.0, 0.0) else np.array([0.0]))
    hrb_eff = next((d.efficiency for d in cies.coupling_of("hrb")), 0.0)
    eb_eff = next((d.efficiency for d in cies.coupling_of("eb")), 0.95)
    ratio = cies.mt.heat_per_kwh_elec
    MT, EB = np.meshgrid(mt_vals, eb_vals, indexing="ij")
    heat = hrb_eff * ratio * MT + eb_eff * EB
    tol = 0.5 * step * (hrb_eff * ratio + eb_eff)
    feasible = np.abs(heat - cies.heat_load[t]) <= tol
    if not feasible.any():
        return None
    net = MT - EB
    best_hi = float(net[feasible].max()) + float(bes_vals.max())
    best_lo = float(net[feasible].min()) + float(bes_vals.min())
    return best_hi, best_lo


def test_criterion_6_envelope_grid_search():
    worst = 0.0
    toys = []
    # one device, one period
    toys.append((toy_cies(T=1, mt=_mt(150.0, 40.0, 60.0), elec=100.0),))
    # two devices, two periods
    toys.append((toy_cies(T=2, mt=_mt(160.0, 40.0, 50.0),
                          coupling=(hrb(), eb(80.0, 40.0)),
                          elec=100.0, heat=180.0),))
    # three devices (turbine, boiler, battery), three periods
    from flexgrid.core import StorageParams
    bes = StorageParams("bes", 30.0, 30.0, 10.0, 60.0, 30.0, 0.0, 1.0, 1.0,
                        0.01)
    toys.append((toy_cies(T=3, mt=_mt(140.0, 40.0, 45.0),
                          coupling=(hrb(), eb(70.0, 35.0)),
                          storage=(bes,), elec=90.0, heat=170.0),))
    checks = []
    for (cies,) in toys:
        T = len(cies.elec_load)
        from flexgrid.core import TimeGrid
        grid = TimeGrid(T, 1.0)
        pre = solve_predispatch(cies, grid)
        env = margins(cies, pre, grid)
        for t in range(T):
            (hi, _), (lo, _), diag = flex_extremes(cies, pre, t, grid)
            oracle = _grid_search_extreme(cies, pre, t, grid)
            assert oracle is not None
            worst = max(worst, abs(hi - oracle[0]), abs(lo - oracle[1]))
            checks.append(abs(hi - oracle[0]) <= 1.0 + 1e-6)
            checks.append(abs(lo - oracle[1]) <= 1.0 + 1e-6)
        for r, series in env.margin_up.items():
            checks.append(min(series) >= 0.0)
        for r, series in env.margin_down.items():
            checks.append(min(series) >= 0.0)
        for t in range(T):
            checks.append(env.aggregate_up[t] == sum(
                env.margin_up[r][t] for r in env.margin_up))
            checks.append(env.aggregate_down[t] == sum(
                env.margin_down[r][t] for r in env.margin_down))
    ok = all(checks)
    record_criterion(6, ok, f"max |extreme - lattice| = {worst:.3f} kW "
                            "(resolution 1 kW)")
    assert ok


def test_criterion_7_fas_price_law(studies):
    base, _, out = studies
    _, _, _, _, prices = out["mode4"]
    checks = []
    details = []
    for name, curve in prices.items():
        margins_ = np.asarray(curve.margins)
        p = np.asarray(curve.prices)
        i_max = int(np.argmax(margins_))
        checks.append(abs(p[i_max] - curve.adjustment_cost) <= 1e-12)
        if (margins_ == 0.0).any():
            j = int(np.argmin(margins_))
            checks.append(abs(p[j] - curve.price_cap) <= 1e-12)
        slope = (curve.price_cap - curve.adjustment_cost) / margins_[i_max]
        for i, j in itertools.combinations(range(len(p)), 2):
            lhs = p[i] - p[j]
            rhs = -slope * (margins_[i] - margins_[j])
            checks.append(abs(lhs - rhs) <= 1e-12)
        details.append(f"{name} ok")
    record_criterion(7, all(checks), "; ".join(details))
    assert all(checks)


def test_criterion_8_milp_kernel_oracle():
    rng = np.random.default_rng(8080)
    worst = 0.0
    feasible = 0
    for _ in range(50):
        m = _random_instance(rng)
        oracle = enumerate_binaries(m)
        res = solve_mixed(m)
        if oracle is None:
            assert res.status == "infeasible"
            continue
        feasible += 1
        worst = max(worst, abs(res.objective - oracle))
        assert res.optimal
    ok = worst <= 1e-6 and feasible >= 30
    record_criterion(8, ok,
                     f"{feasible} feasible instances, max drift {worst:.2e}")
    assert ok


def _cies_conservation(case, run):
    worst = 0.0
    for c in case.cies:
        sol = run.cies[c.name]
        S, T = sol.buy.shape
        for s in range(S):
            for t in range(T):
                supply = (sol.mt_power[s, t] + sol.wt_used[s, t]
                          + sol.pv_used[s, t] + sol.shed[s, t]
                          + sol.buy[s, t] - sol.sell[s, t]
                          - sol.tse_shift[t])
                for k in sol.storage_dc:
                    if k.startswith("bes"):
                        supply += (sol.storage_dc[k][s, t]
                                   - sol.storage_ch[k][s, t])
                draw = c.elec_load[t]
                for k, v in sol.coupling_in.items():
                    if k.startswith(("eb", "ec")):
                        draw += v[s, t]
                worst = max(worst, abs(supply - draw))

                heat = cool = 0.0
                for k, v in sol.coupling_in.items():
                    kind = k[:-1]
                    eff = c.coupling_of(kind)[int(k[len(kind):])].efficiency
                    if kind in ("hrb", "eb"):
                        heat += eff * v[s, t]
                    elif kind == "ac":
                        heat -= v[s, t]
                        cool += eff * v[s, t]
                    elif kind == "ec":
                        cool += eff * v[s, t]
                for k in sol.storage_dc:
                    if k.startswith("hes"):
                        heat += sol.storage_dc[k][s, t] - sol.storage_ch[k][s, t]
                    if k.startswith("ces"):
                        cool += sol.storage_dc[k][s, t] - sol.storage_ch[k][s, t]
                worst = max(worst, abs(heat - c.heat_load[t]))
                worst = max(worst, abs(cool - c.cool_load[t]))
    return worst


def _adn_conservation(case, adn_sol, probs):
    """Active nodal balance residual, kW, recomputed from the solution."""
    adn = case.adn
    z_base = adn.v_base_kv ** 2 / adn.s_base_mva
    kw = 1000.0 * adn.s_base_mva
    S = len(probs)
    T = case.time_grid.periods
    worst = 0.0
    out_of = {}
    into = {}
    for b, br in enumerate(adn.branches):
        out_of.setdefault(br.from_node, []).append(b)
        into.setdefault(br.to_node, []).append(b)
    for s in range(S):
        for t in range(T):
            for n in range(1, adn.node_count + 1):
                lhs = 0.0
                for b in out_of.get(n, ()):
                    lhs += adn_sol.branch_p[b, s, t]
                for b in into.get(n, ()):
                    br = adn.branches[b]
                    lhs -= (adn_sol.branch_p[b, s, t]
                            - br.r_ohm / z_base * adn_sol.branch_l[b, s, t])
                inj = 0.0
                if n == adn.root:
                    inj += adn_sol.main[s, t]
                if n == adn.mt_node:
                    inj += adn_sol.mt_power[s, t]
                if n == adn.bes_node:
                    inj += adn_sol.bes_dc[s, t] - adn_sol.bes_ch[s, t]
                for key, used in adn_sol.farm_used.items():
                    if int(key.rsplit(".", 1)[1]) == n:
                        inj += used[s, t]
                name = adn.cies_nodes.get(n)
                if name:
                    inj += adn_sol.buy[name][s, t] - adn_sol.sell[name][s, t]
                if n in adn_sol.shed_nodes:
                    inj += adn_sol.shed_nodes[n][s, t]
                load = adn.load_p_kw.get(n, 0.0) * adn.load_shape[t]
                worst = max(worst, abs(lhs * kw - (inj - load)))
    return worst


def test_criterion_9_conservation_suite(studies):
    base, scarce, out = studies
    worst_balance = 0.0
    worst_term = 0.0
    worst_tse = 0.0
    worst_compl = 0.0
    for key, (run, _, _, ss, _) in out.items():
        case = base if key in ("mode1", "mode4") else scarce
        worst_balance = max(worst_balance, _cies_conservation(case, run))
        worst_balance = max(worst_balance, _adn_conservation(
            case, run.adn, ss.probabilities))
        for c in case.cies:
            sol = run.cies[c.name]
            for k, soc in sol.storage_soc.items():
                st = next(x for x in c.storage if k.startswith(x.kind))
                worst_term = max(worst_term,
                                 float(np.max(np.abs(soc[:, -1] - st.s_init))))
            worst_tse = max(worst_tse, abs(float(sol.tse_shift.sum())))
            worst_compl = max(worst_compl, float(np.max(sol.buy * sol.sell)))
        worst_term = max(worst_term, float(np.max(np.abs(
            run.adn.bes_soc[:, -1] - case.adn.bes.s_init))))
        for name in run.adn.buy:
            worst_compl = max(worst_compl, float(np.max(
                run.adn.buy[name] * run.adn.sell[name])))
    ok = (worst_balance <= 1e-6 and worst_term <= 1e-6
          and worst_tse <= 1e-6 and worst_compl == 0.0)
    record_criterion(
        9, ok, f"balance {worst_balance:.1e} kW, terminal {worst_term:.1e} "
               f"kWh, shift cycle {worst_tse:.1e}, complementarity "
               f"{worst_compl:.1e}")
    assert worst_balance <= 1e-6
    assert worst_term <= 1e-6
    assert worst_tse <= 1e-6
    assert worst_compl == 0.0


def test_criterion_10_multiplier_law(studies):
    base, _, out = studies
    run = out["mode4"][0]
    lam = base.atc.lam
    worst = 0.0
    for a, b in zip(run.trace, run.trace[1:]):
        for n in a.omega:
            worst = max(worst, float(np.max(np.abs(
                b.omega[n] - (a.omega[n] + a.chi[n] * np.abs(a.gap[n]))))))
    for i, it in enumerate(run.trace):
        for n in it.chi:
            worst = max(worst, float(np.max(np.abs(
                it.chi[n] - base.atc.chi0 * lam ** i))))
    ok = worst <= 1e-9
    record_criterion(10, ok, f"max law residual {worst:.2e}")
    assert ok
