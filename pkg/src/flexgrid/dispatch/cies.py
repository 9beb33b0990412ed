"""Scenario-based CIES dispatch with tie-line trading and tail-risk caps.

The model replicates the pre-dispatch constraints per renewable scenario
(commitment and load shifts stay first-stage), adds the grid interaction
(buy at the time-of-use price, sell at the posted flexibility price),
tail-risk caps on curtailment and shedding, and the coordination penalty
that pins the expected tie power to the target from the upper level.

Because the buy and sell prices differ, the continuous relaxation can
"churn" (buy and sell simultaneously at the same hour, pocketing the price
difference), which the direction indicators forbid.  Proving global
optimality through that relaxation is hopeless at scale, so the solve
first relaxes everything, then fixes each period's trade direction from
the relaxed net flow (a de-churned witness point keeps the fixed model
feasible), and proves optimality over the remaining commitment binaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.types import CiesConfig, ScenarioSet, TimeGrid
from ..kernel import ConicModel
from ..kernel.solve import SolveResult
from .blocks import (CiesVars, CvarIds, TieVars, add_abs_penalty,
                     add_cies_block, add_cvar_block, add_tie_block)

DIRECTION_TOL = 1e-4


def cvar_value(risks, probabilities, beta: float) -> float:
    """Exact tail expectation beyond the beta-quantile, by sorting.

    Equals min over alpha of alpha + E[(risk - alpha)+] / (1 - beta); the
    standalone oracle used to audit the embedded optimization blocks.
    """
    risks = np.asarray(risks, dtype=float)
    probs = np.asarray(probabilities, dtype=float)
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    order = np.argsort(risks)
    r, p = risks[order], probs[order]
    cum = np.cumsum(p)
    k = int(np.searchsorted(cum, beta, side="left"))
    var = r[k]
    excess = np.maximum(r - var, 0.0)
    return float(var + probs[order] @ excess / (1.0 - beta))


@dataclass
class CiesDispatchIds:
    block: CiesVars
    tie: TieVars
    cvar_ren: list[CvarIds]
    cvar_load: list[CvarIds]
    penalty_aux: np.ndarray                  # (S, T) |.| auxiliaries
    penalty_rows: np.ndarray | None = None   # (S, T, 2) row ids of each pair


@dataclass
class CiesSolution:
    cies_name: str
    objective: float                  # model objective incl. coordination penalty
    cost_total: float                 # operating cost excl. coordination penalty
    costs: dict[str, float]
    buy: np.ndarray                   # (S, T) kW
    sell: np.ndarray
    expected_tie: np.ndarray          # (T,) expected buy - sell
    mt_power: np.ndarray              # (S, T)
    mt_on: tuple[int, ...]
    tse_shift: np.ndarray             # (T,)
    curtail: np.ndarray               # (S, T)
    shed: np.ndarray
    cvar_ren: np.ndarray              # (T,) block values
    cvar_load: np.ndarray
    coupling_in: dict[str, np.ndarray] = field(default_factory=dict)
    storage_soc: dict[str, np.ndarray] = field(default_factory=dict)
    storage_ch: dict[str, np.ndarray] = field(default_factory=dict)
    storage_dc: dict[str, np.ndarray] = field(default_factory=dict)
    wt_used: np.ndarray | None = None
    pv_used: np.ndarray | None = None
    solver: dict = field(default_factory=dict)


def scenario_availability(cies: CiesConfig, scenarios: ScenarioSet
                          ) -> tuple[np.ndarray, np.ndarray]:
    wt = np.array([scenarios.series(f"cies.{cies.name}.wt", s)
                   for s in range(scenarios.size)])
    pv = np.array([scenarios.series(f"cies.{cies.name}.pv", s)
                   for s in range(scenarios.size)])
    return wt, pv


def build_cies_model(cies: CiesConfig, grid: TimeGrid, scenarios: ScenarioSet,
                     fas_prices, tou_prices, atc_target, omega,
                     phi_override: float | None = None,
                     model: ConicModel | None = None,
                     tie_external: TieVars | None = None,
                     add_penalty: bool = True
                     ) -> tuple[ConicModel, CiesDispatchIds]:
    """Assemble the dispatch model of one CIES.

    ``atc_target[t]`` is the pinned expected net tie power (buy - sell) and
    ``omega[t]`` its penalty weight.  ``phi_override`` replaces both CVaR
    caps (used to neutralize the risk constraints in comparison modes).
    The centralized solve passes a shared ``model`` plus ``tie_external``
    (this CIES's view of variables owned by the network side) and turns the
    coordination penalty off.
    """
    T = grid.periods
    dt = grid.step_hours
    S = scenarios.size
    if len(fas_prices) != T or len(tou_prices) != T:
        raise ValueError("price series must cover every period")
    probs = np.asarray(scenarios.probabilities, dtype=float)
    wt_avail, pv_avail = scenario_availability(cies, scenarios)

    m = ConicModel(f"dispatch.{cies.name}") if model is None else model
    block = add_cies_block(m, cies, grid, wt_avail, pv_avail, probs,
                           tag=cies.name)
    if tie_external is None:
        tie = add_tie_block(m, S, T, cies.tie_buy_max, cies.tie_sell_max,
                            f"{cies.name}.tie")
    else:
        tie = tie_external

    for s in range(S):
        for t in range(T):
            m.extend_row(int(block.elec_balance_rows[s, t]),
                         [(int(tie.buy[s, t]), 1.0), (int(tie.sell[s, t]), -1.0)])
            m.add_obj(int(tie.buy[s, t]), probs[s] * dt * tou_prices[t])
            m.add_obj(int(tie.sell[s, t]), -probs[s] * dt * fas_prices[t])

    phi_u = phi_override if phi_override is not None else cies.cvar_up_limit
    phi_d = phi_override if phi_override is not None else cies.cvar_down_limit
    cvar_ren, cvar_load = [], []
    for t in range(T):
        terms = [[(int(block.wt_used[s, t]), -1.0),
                  (int(block.pv_used[s, t]), -1.0)] for s in range(S)]
        consts = [float(wt_avail[s, t] + pv_avail[s, t]) for s in range(S)]
        cvar_ren.append(add_cvar_block(m, terms, consts, probs,
                                       cies.cvar_beta, phi_u,
                                       f"{cies.name}.cvar.ren[{t}]"))
        terms = [[(int(block.shed[s, t]), 1.0)] for s in range(S)]
        cvar_load.append(add_cvar_block(m, terms, [0.0] * S, probs,
                                        cies.cvar_beta, phi_d,
                                        f"{cies.name}.cvar.load[{t}]"))

    # coordination penalty: per-scenario pinning, probability weighted
    if add_penalty:
        target = np.asarray(atc_target, dtype=float)
        if target.ndim == 1:
            target = np.tile(target, (S, 1))
        aux = np.empty((S, T), dtype=np.int64)
        rows = np.empty((S, T, 2), dtype=np.int64)
        for s in range(S):
            for t in range(T):
                terms = [(int(tie.buy[s, t]), 1.0),
                         (int(tie.sell[s, t]), -1.0)]
                aux[s, t] = add_abs_penalty(
                    m, terms, -float(target[s, t]),
                    float(omega[t]) * float(probs[s]),
                    f"{cies.name}.atc[{s},{t}]")
                rows[s, t] = (m.num_rows - 2, m.num_rows - 1)
        penalty_rows = rows
    else:
        aux = np.empty((0, 0), dtype=np.int64)
        penalty_rows = None

    return m, CiesDispatchIds(block, tie, cvar_ren, cvar_load, aux,
                              penalty_rows)


def fix_tie_directions(model: ConicModel, tie: TieVars, relaxed_x: np.ndarray,
                       sell_preferred: np.ndarray
                       ) -> tuple[np.ndarray, np.ndarray]:
    return fix_tie_directions_bounds(model.lower_bounds(),
                                     model.upper_bounds(), tie, relaxed_x,
                                     sell_preferred)


def fix_tie_directions_bounds(lb: np.ndarray, ub: np.ndarray, tie: TieVars,
                              relaxed_x: np.ndarray,
                              sell_preferred: np.ndarray
                              ) -> tuple[np.ndarray, np.ndarray]:
    """Bound overrides pinning each period's trade direction.

    Direction comes from the relaxed net flow; churned pairs (both sides
    active, net near zero) fall back to ``sell_preferred[t]``.  Pairs with
    no relaxed trade keep their indicators free.
    """
    S, T = tie.buy.shape
    for s in range(S):
        for t in range(T):
            b = relaxed_x[tie.buy[s, t]]
            sl = relaxed_x[tie.sell[s, t]]
            if b > sl + DIRECTION_TOL:
                mode = "buy"
            elif sl > b + DIRECTION_TOL:
                mode = "sell"
            elif min(b, sl) > DIRECTION_TOL:
                mode = "sell" if sell_preferred[t] else "buy"
            else:
                continue
            if mode == "buy":
                lb[tie.buy_on[s, t]] = ub[tie.buy_on[s, t]] = 1.0
                lb[tie.sell_on[s, t]] = ub[tie.sell_on[s, t]] = 0.0
            else:
                lb[tie.buy_on[s, t]] = ub[tie.buy_on[s, t]] = 0.0
                lb[tie.sell_on[s, t]] = ub[tie.sell_on[s, t]] = 1.0
    return lb, ub


class DispatchInfeasible(RuntimeError):
    def __init__(self, stakeholder: str, detail: str):
        self.stakeholder = stakeholder
        super().__init__(f"dispatch of {stakeholder} infeasible: {detail}")


def solve_cies_dispatch(cies: CiesConfig, grid: TimeGrid,
                        scenarios: ScenarioSet, fas_prices, tou_prices,
                        atc_target=None, omega=None,
                        phi_override: float | None = None,
                        method: str = "fast",
                        rel_gap: float = 1e-3,
                        node_limit: int = 1500,
                        prebuilt: tuple | None = None,
                        obj_patch: dict[int, float] | None = None,
                        rhs_patch: dict[int, float] | None = None
                        ) -> CiesSolution:
    """Solve one CIES subproblem; see ``dispatch.strategy`` for the method.

    ``prebuilt`` reuses a (model, ids) pair across coordination iterations;
    the iteration-dependent targets and penalty weights then arrive through
    ``obj_patch``/``rhs_patch``.
    """
    from .strategy import solve_two_round

    T = grid.periods
    if atc_target is None:
        atc_target = np.zeros(T)
    if omega is None:
        omega = np.zeros(T)
    if prebuilt is None:
        m, ids = build_cies_model(cies, grid, scenarios, fas_prices,
                                  tou_prices, atc_target, omega, phi_override)
    else:
        m, ids = prebuilt
    prefer_sell = np.array([fas_prices[t] >= tou_prices[t] for t in range(T)])

    def fix_dirs(lb, ub, x):
        return fix_tie_directions_bounds(lb, ub, ids.tie, x, prefer_sell)

    res = solve_two_round(
        m, on_vars=[ids.block.mt_on], p_vars=[ids.block.mt_power],
        p_mins=[cies.mt.p_min], min_ups=[cies.mt.min_up],
        min_downs=[cies.mt.min_down], fix_directions=fix_dirs, method=method,
        rel_gap=rel_gap, node_limit=node_limit,
        obj_patch=obj_patch, rhs_patch=rhs_patch)
    if res.x is None:
        raise DispatchInfeasible(cies.name, res.status)
    return extract_cies_solution(cies, grid, scenarios, ids, res,
                                 fas_prices, tou_prices, omega, atc_target)


def extract_cies_solution(cies: CiesConfig, grid: TimeGrid,
                          scenarios: ScenarioSet, ids: CiesDispatchIds,
                          res: SolveResult, fas_prices, tou_prices,
                          omega, atc_target) -> CiesSolution:
    x = res.x
    T = grid.periods
    dt = grid.step_hours
    S = scenarios.size
    probs = np.asarray(scenarios.probabilities, dtype=float)
    block = ids.block

    buy = x[ids.tie.buy].copy()
    sell = x[ids.tie.sell].copy()
    # de-churn any degenerate simultaneous trade left at equal prices
    churn = np.minimum(buy, sell)
    if np.max(churn) > 1e-9:
        buy -= churn
        sell -= churn
    expected_tie = probs @ (buy - sell)

    mt_power = x[block.mt_power]
    tse = x[block.tse]
    wt_used = x[block.wt_used]
    pv_used = x[block.pv_used]
    shed = x[block.shed]
    curtail = (block.wt_avail - wt_used) + (block.pv_avail - pv_used)

    mt = cies.mt
    fuel = float(probs @ mt_power.sum(axis=1)) * dt * mt.gas_price / (
        mt.elec_eff * mt.gas_calorific)
    om = float(probs @ mt_power.sum(axis=1)) * dt * mt.om_cost
    by_kind = {d.kind: d for d in cies.coupling}
    for key, vids in block.coupling_in.items():
        om += float(probs @ x[vids].sum(axis=1)) * dt * by_kind[key[:-1]].om_cost
    st_by_kind = {s.kind: s for s in cies.storage}
    for key in block.storage_ch:
        om += float(probs @ (x[block.storage_ch[key]]
                             + x[block.storage_dc[key]]).sum(axis=1)) \
            * dt * st_by_kind[key[:-1]].om_cost
    om += float(probs @ (wt_used + pv_used).sum(axis=1)) * dt * cies.reg_om_cost
    dr = float(np.maximum(-tse, 0.0).sum()) * dt * cies.tse.dr_comp
    penalty = float(probs @ curtail.sum(axis=1)) * dt * cies.curtail_penalty \
        + float(probs @ shed.sum(axis=1)) * dt * cies.shed_penalty
    interaction = sum(
        float(probs @ (buy[:, t] * tou_prices[t] - sell[:, t] * fas_prices[t]))
        * dt for t in range(T))
    target = np.asarray(atc_target, dtype=float)
    if target.ndim == 1:
        target = np.tile(target, (S, 1))
    atc_pen = float(sum(
        omega[t] * float(probs @ np.abs(buy[:, t] - sell[:, t] - target[:, t]))
        for t in range(T)))
    total = fuel + om + dr + penalty + interaction
    costs = {"fuel": fuel, "om": om, "dr": dr, "penalty": penalty,
             "interaction": interaction, "total": total,
             "atc_penalty": atc_pen}

    return CiesSolution(
        cies_name=cies.name,
        objective=res.objective,
        cost_total=total,
        costs=costs,
        buy=buy, sell=sell, expected_tie=expected_tie,
        mt_power=mt_power,
        mt_on=tuple(int(round(v)) for v in x[block.mt_on]),
        tse_shift=tse,
        curtail=curtail, shed=shed,
        cvar_ren=np.array([b.value(x) for b in ids.cvar_ren]),
        cvar_load=np.array([b.value(x) for b in ids.cvar_load]),
        coupling_in={k: x[v] for k, v in block.coupling_in.items()},
        storage_soc={k: x[v] for k, v in block.storage_soc.items()},
        storage_ch={k: x[v] for k, v in block.storage_ch.items()},
        storage_dc={k: x[v] for k, v in block.storage_dc.items()},
        wt_used=wt_used, pv_used=pv_used,
        solver={"status": res.status, "nodes": res.extra.get("nodes"),
                "gap": res.extra.get("gap"),
                "gap_proven": res.extra.get("gap_proven")})
