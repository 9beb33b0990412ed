"""Coordination between the network and the communities.

The two levels are coupled only through tie-line powers.  Each iteration
the network solves against the communities' last announced flows, the
communities solve against the network's, and growing penalty weights pull
the two announcements together until the worst per-period mismatch and the
relative total-cost change both fall inside tolerance.

Sign bookkeeping: the coordinated quantity is the net flow from a community
toward the network per scenario and period, ``f``.  The network announces
``f_adn = buy - sell`` (its purchases), a community announces
``f_cies = sell - buy`` (its sales); each side is pinned to the other's
announcement expressed in its own buy/sell convention.  Coordinating the
full scenario profile (not just its expectation) is what makes the two
sides' converged schedules mutually consistent, so the centralized solve
bounds the coordinated total from below.  The per-period gap reported and
fed to the multiplier update is the worst mismatch across scenarios.

Targets and penalty weights enter the prebuilt subproblem models through
objective/rhs patches, so each model is assembled once per run.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core.types import CaseConfig, FasPriceCurve, ScenarioSet
from .dispatch.adn import (AdnSolution, build_adn_model, extract_adn_solution,
                           solve_adn_dispatch)
from .dispatch.cies import (CiesSolution, DispatchInfeasible, TieVars,
                            build_cies_model, extract_cies_solution,
                            solve_cies_dispatch)
from .dispatch.strategy import solve_two_round


@dataclass
class AtcIteration:
    k: int
    f_adn: dict[str, np.ndarray]
    f_cies: dict[str, np.ndarray]
    gap: dict[str, np.ndarray]
    max_gap: float
    cost_adn: float
    cost_cies: dict[str, float]
    cost_total: float
    rel_cost_change: float | None
    omega: dict[str, np.ndarray]
    chi: dict[str, np.ndarray]
    converged: bool


@dataclass
class AtcRun:
    converged: bool
    iterations: int
    trace: list[AtcIteration]
    adn: AdnSolution
    cies: dict[str, CiesSolution]
    total_cost: float
    wall_time: float
    interaction_rules: dict[str, np.ndarray] = field(default_factory=dict)


def check_convergence(max_gap: float, cost_now: float, cost_prev: float | None,
                      eps1: float, eps2: float) -> tuple[bool, dict]:
    """Tie-power mismatch within eps1 and |relative cost change| within eps2.

    The cost criterion compares against the previous iterate; on the first
    iteration it passes vacuously only when the sides already agree exactly
    (a decoupled system has nothing left to coordinate).
    """
    diag = {"max_gap": max_gap, "gap_ok": max_gap <= eps1}
    if cost_prev is None:
        exact = max_gap <= 1e-12
        diag.update({"cost_ok": exact, "rel_change": None})
        return diag["gap_ok"] and exact, diag
    rel = abs(cost_now - cost_prev) / max(abs(cost_prev), 1e-12)
    diag.update({"cost_ok": rel <= eps2, "rel_change": rel})
    return diag["gap_ok"] and diag["cost_ok"], diag


def update_multipliers(omega: dict[str, np.ndarray], chi: dict[str, np.ndarray],
                       gaps: dict[str, np.ndarray], lam: float
                       ) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Linear weight grows with the gap it saw; quadratic-series weight by lam."""
    new_omega = {n: omega[n] + chi[n] * np.abs(gaps[n]) for n in omega}
    new_chi = {n: lam * chi[n] for n in chi}
    return new_omega, new_chi


def _patch_pair(obj, rhs, aux, rows, omega_t: np.ndarray,
                target_st: np.ndarray, probs: np.ndarray):
    S, T = aux.shape
    for s in range(S):
        for t in range(T):
            obj[int(aux[s, t])] = float(omega_t[t]) * float(probs[s])
            pos, neg = rows[s, t]
            rhs[int(pos)] = -float(target_st[s, t])
            rhs[int(neg)] = float(target_st[s, t])


def _patches_cies(ids, omega_n: np.ndarray, target_st: np.ndarray,
                  probs: np.ndarray):
    obj, rhs = {}, {}
    _patch_pair(obj, rhs, ids.penalty_aux, ids.penalty_rows, omega_n,
                target_st, probs)
    return obj, rhs


def _patches_adn(ids, omega: dict[str, np.ndarray],
                 targets: dict[str, np.ndarray], probs: np.ndarray):
    obj, rhs = {}, {}
    for name, aux in ids.penalty_aux.items():
        _patch_pair(obj, rhs, aux, ids.penalty_rows[name], omega[name],
                    targets[name], probs)
    return obj, rhs


def run_atc(case: CaseConfig, scenarios: ScenarioSet,
            prices: dict[str, FasPriceCurve] | dict[str, tuple],
            phi_override: float | None = None,
            method: str = "fast", max_workers: int = 3,
            progress=None) -> AtcRun:
    """Alternate network/community solves until the tie powers agree.

    ``prices[name]`` is the posted flexibility price series per community
    (a FasPriceCurve or a plain series).  Raises ``DispatchInfeasible``
    naming the stakeholder when a subproblem has no feasible point; a run
    hitting the iteration cap returns with ``converged=False`` and the full
    trace.
    """
    t_start = time.time()
    grid = case.time_grid
    T = grid.periods
    S = scenarios.size
    probs = np.asarray(scenarios.probabilities, dtype=float)
    atc = case.atc
    names = sorted(c.name for c in case.cies)
    fas = {n: _series_of(prices[n]) for n in names}
    tou = case.adn.tou_price
    tie_caps = {c.name: (c.tie_buy_max, c.tie_sell_max) for c in case.cies}

    omega = {n: np.full(T, atc.omega0) for n in names}
    chi = {n: np.full(T, atc.chi0) for n in names}
    zero_st = {n: np.zeros((S, T)) for n in names}

    adn_model = build_adn_model(case.adn, grid, scenarios, fas, zero_st,
                                {n: np.full(T, atc.omega0) for n in names},
                                tie_caps, phi_override)
    cies_models = {}
    for c in case.cies:
        cies_models[c.name] = build_cies_model(
            c, grid, scenarios, fas[c.name], tou, np.zeros((S, T)),
            np.full(T, atc.omega0), phi_override)

    targets_for_adn = {n: np.zeros((S, T)) for n in names}  # f_cies announced
    trace: list[AtcIteration] = []
    cost_prev: float | None = None
    adn_sol: AdnSolution | None = None
    cies_sols: dict[str, CiesSolution] = {}
    converged = False

    for k in range(1, atc.k_max + 1):
        obj_p, rhs_p = _patches_adn(adn_model[1], omega, targets_for_adn,
                                    probs)
        try:
            adn_sol = solve_adn_dispatch(
                case.adn, grid, scenarios, fas,
                atc_targets=targets_for_adn, omega=omega, tie_caps=tie_caps,
                phi_override=phi_override, method=method,
                prebuilt=adn_model, obj_patch=obj_p, rhs_patch=rhs_p)
        except DispatchInfeasible as e:
            raise DispatchInfeasible(e.stakeholder,
                                     f"at coordination iteration {k}") from e
        f_adn = {n: adn_sol.buy[n] - adn_sol.sell[n] for n in names}

        def solve_one(c):
            ids = cies_models[c.name][1]
            target = -f_adn[c.name]   # community's own import convention
            o_p, r_p = _patches_cies(ids, omega[c.name], target, probs)
            return c.name, solve_cies_dispatch(
                c, grid, scenarios, fas[c.name], tou,
                atc_target=target, omega=omega[c.name],
                phi_override=phi_override, method=method,
                prebuilt=cies_models[c.name], obj_patch=o_p, rhs_patch=r_p)

        try:
            if max_workers > 1:
                with ThreadPoolExecutor(max_workers=max_workers) as pool:
                    cies_sols = dict(pool.map(solve_one, case.cies))
            else:
                cies_sols = dict(solve_one(c) for c in case.cies)
        except DispatchInfeasible as e:
            raise DispatchInfeasible(e.stakeholder,
                                     f"at coordination iteration {k}") from e

        f_cies = {n: cies_sols[n].sell - cies_sols[n].buy for n in names}
        gaps = {n: np.max(np.abs(f_adn[n] - f_cies[n]), axis=0)
                for n in names}                      # (T,) worst over scenarios
        max_gap = max(float(np.max(gaps[n])) for n in names)
        cost_cies = {n: cies_sols[n].cost_total for n in names}
        cost_now = adn_sol.cost_total + sum(cost_cies.values())
        ok, diag = check_convergence(max_gap, cost_now, cost_prev,
                                     atc.eps1, atc.eps2)
        trace.append(AtcIteration(
            k=k,
            f_adn={n: (probs @ f_adn[n]).copy() for n in names},
            f_cies={n: (probs @ f_cies[n]).copy() for n in names},
            gap={n: gaps[n].copy() for n in names},
            max_gap=max_gap, cost_adn=adn_sol.cost_total,
            cost_cies=dict(cost_cies), cost_total=cost_now,
            rel_cost_change=diag["rel_change"],
            omega={n: omega[n].copy() for n in names},
            chi={n: chi[n].copy() for n in names},
            converged=ok))
        if progress:
            progress(trace[-1])
        if ok:
            converged = True
            break
        cost_prev = cost_now
        omega, chi = update_multipliers(omega, chi, gaps, atc.lam)
        targets_for_adn = f_cies

    rules = classify_interaction(case, adn_sol, cies_sols)
    return AtcRun(converged=converged, iterations=len(trace), trace=trace,
                  adn=adn_sol, cies=cies_sols,
                  total_cost=trace[-1].cost_total,
                  wall_time=time.time() - t_start,
                  interaction_rules=rules)


def _series_of(p):
    return tuple(p.prices) if isinstance(p, FasPriceCurve) else tuple(p)


def classify_interaction(case: CaseConfig, adn_sol: AdnSolution,
                         cies_sols: dict[str, CiesSolution],
                         headroom_tol: float = 1e-6) -> dict[str, np.ndarray]:
    """Label each (community, period) with the governing interaction rule.

    A side is "sufficient" at t when both its tail-risk values sit strictly
    below their caps.  1: community sufficient, network not; 2: network
    sufficient, community not; 3: both sufficient; 4: neither.  Reporting
    only; nothing feeds back into the optimization.
    """
    T = case.time_grid.periods
    adn = case.adn
    adn_ok = ((adn_sol.cvar_ren < adn.cvar_up_limit - headroom_tol)
              & (adn_sol.cvar_load < adn.cvar_down_limit - headroom_tol))
    out = {}
    for c in case.cies:
        sol = cies_sols[c.name]
        cies_ok = ((sol.cvar_ren < c.cvar_up_limit - headroom_tol)
                   & (sol.cvar_load < c.cvar_down_limit - headroom_tol))
        rules = np.empty(T, dtype=int)
        for t in range(T):
            if cies_ok[t] and not adn_ok[t]:
                rules[t] = 1
            elif adn_ok[t] and not cies_ok[t]:
                rules[t] = 2
            elif adn_ok[t] and cies_ok[t]:
                rules[t] = 3
            else:
                rules[t] = 4
        out[c.name] = rules
    return out


@dataclass
class CentralSolution:
    total_cost: float
    cost_adn: float
    cost_cies: dict[str, float]
    adn: AdnSolution
    cies: dict[str, CiesSolution]
    wall_time: float
    solver: dict = field(default_factory=dict)


def solve_centralized(case: CaseConfig, scenarios: ScenarioSet,
                      prices: dict[str, FasPriceCurve] | dict[str, tuple],
                      phi_override: float | None = None,
                      method: str = "fast") -> CentralSolution:
    """One monolithic model with shared tie variables; the validation oracle.

    Internal trade payments cancel exactly (both sides' interaction terms
    land on the same variables with opposite signs), leaving the physical
    system cost, which bounds any coordinated solution from below.
    """
    t_start = time.time()
    grid = case.time_grid
    T = grid.periods
    names = sorted(c.name for c in case.cies)
    fas = {n: _series_of(prices[n]) for n in names}
    tou = case.adn.tou_price
    tie_caps = {c.name: (c.tie_buy_max, c.tie_sell_max) for c in case.cies}
    zero = {n: np.zeros(T) for n in names}

    m, adn_ids = build_adn_model(case.adn, grid, scenarios, fas, zero,
                                 zero, tie_caps, phi_override)
    cies_ids = {}
    for c in case.cies:
        swapped = TieVars(buy=adn_ids.tie[c.name].sell,
                          sell=adn_ids.tie[c.name].buy,
                          buy_on=adn_ids.tie[c.name].sell_on,
                          sell_on=adn_ids.tie[c.name].buy_on)
        _, ids = build_cies_model(
            c, grid, scenarios, fas[c.name], tou, np.zeros(T), np.zeros(T),
            phi_override, model=m, tie_external=swapped, add_penalty=False)
        cies_ids[c.name] = ids

    on_vars = [adn_ids.mt_on] + [cies_ids[n].block.mt_on for n in names]
    p_vars = [adn_ids.mt_power] + [cies_ids[n].block.mt_power for n in names]
    p_mins = [case.adn.mt.p_min] + [case.cies_by_name(n).mt.p_min
                                    for n in names]
    min_ups = [case.adn.mt.min_up] + [case.cies_by_name(n).mt.min_up
                                      for n in names]
    min_downs = [case.adn.mt.min_down] + [case.cies_by_name(n).mt.min_down
                                          for n in names]

    def fix_dirs(lb, ub, x):
        from .dispatch.cies import fix_tie_directions_bounds
        for name, tv in adn_ids.tie.items():
            neutral = np.zeros(T, dtype=bool)
            lb, ub = fix_tie_directions_bounds(lb, ub, tv, x, neutral)
        return lb, ub

    res = solve_two_round(m, on_vars=on_vars, p_vars=p_vars, p_mins=p_mins,
                          min_ups=min_ups, min_downs=min_downs,
                          fix_directions=fix_dirs, method=method)
    if res.x is None:
        raise DispatchInfeasible("centralized", res.status)

    adn_sol = extract_adn_solution(case.adn, grid, scenarios, adn_ids, res,
                                   fas, zero, zero)
    cies_sols = {}
    for c in case.cies:
        cies_sols[c.name] = extract_cies_solution(
            c, grid, scenarios, cies_ids[c.name], res, fas[c.name], tou,
            np.zeros(T), np.zeros(T))
    cost_cies = {n: cies_sols[n].cost_total for n in names}
    total = adn_sol.cost_total + sum(cost_cies.values())
    return CentralSolution(
        total_cost=total, cost_adn=adn_sol.cost_total, cost_cies=cost_cies,
        adn=adn_sol, cies=cies_sols, wall_time=time.time() - t_start,
        solver={"status": res.status, "gap": res.extra.get("gap"),
                "heuristic": res.extra.get("heuristic", False)})
