"""Distribution-network stochastic dispatch on the radial feeder.

Power flow uses the branch-flow formulation in squared-voltage and
squared-current variables; the one nonconvexity (current-flow-voltage
coupling) is relaxed to a second-order cone per branch.  Network quantities
are per-unit on the configured voltage/power base; device and trade
variables stay in kW and enter the nodal balances through the base
conversion.

The objective carries fuel, O&M, trading with the communities (buy at
their posted flexibility prices, sell at the time-of-use tariff), main-grid
purchases, curtailment/shedding penalties, a loss tariff on branch losses
(which also keeps the cone relaxation tight when curtailment would
otherwise make fake losses attractive), tail-risk caps, and the
coordination penalty pinning expected tie powers to the community targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.types import AdnNetwork, ScenarioSet, TimeGrid
from ..core.validate import check_radial
from ..kernel import EQ, INF, ConicModel
from .blocks import (CvarIds, TieVars, add_abs_penalty, add_commitment_rows,
                     add_cvar_block, add_mt_scenario, add_storage_scenario,
                     add_tie_block)
from .cies import DispatchInfeasible, fix_tie_directions_bounds


@dataclass
class AdnIds:
    branch_p: np.ndarray        # (B, S, T) per-unit
    branch_q: np.ndarray
    branch_l: np.ndarray        # squared current
    node_v: np.ndarray          # (N, S, T) squared voltage, index node-1
    mt_power: np.ndarray        # (S, T) kW
    mt_on: np.ndarray
    bes_ch: np.ndarray
    bes_dc: np.ndarray
    bes_soc: np.ndarray
    farm_used: dict[str, np.ndarray]   # (S, T) kW per farm key
    shed: dict[int, np.ndarray]        # node -> (S, T) kW
    main: np.ndarray                   # (S, T) kW
    q_main: np.ndarray                 # (S, T) kvar
    tie: dict[str, TieVars]            # per CIES name
    cvar_ren: list[CvarIds]
    cvar_load: list[CvarIds]
    penalty_aux: dict[str, np.ndarray]    # name -> (S, T) |.| auxiliaries
    penalty_rows: dict[str, np.ndarray]   # name -> (S, T, 2) row ids
    kw2pu: float
    farm_avail: dict[str, np.ndarray]


@dataclass
class AdnSolution:
    objective: float
    cost_total: float
    costs: dict[str, float]
    buy: dict[str, np.ndarray]          # per CIES (S, T) kW, ADN buys
    sell: dict[str, np.ndarray]
    expected_tie: dict[str, np.ndarray]  # (T,) expected buy - sell
    mt_power: np.ndarray
    mt_on: tuple[int, ...]
    main: np.ndarray
    curtail: np.ndarray                 # (S, T) total over farms
    shed: np.ndarray                    # (S, T) total over nodes
    cvar_ren: np.ndarray
    cvar_load: np.ndarray
    cone_residual_max: float
    cone_residual_mean: float
    relaxation_exact: bool
    voltages: np.ndarray | None = None  # (N, S, T) p.u. magnitude squared
    bes_soc: np.ndarray | None = None
    bes_ch: np.ndarray | None = None
    bes_dc: np.ndarray | None = None
    branch_p: np.ndarray | None = None  # (B, S, T) p.u.
    branch_q: np.ndarray | None = None
    branch_l: np.ndarray | None = None
    q_main: np.ndarray | None = None
    farm_used: dict[str, np.ndarray] = field(default_factory=dict)
    shed_nodes: dict[int, np.ndarray] = field(default_factory=dict)
    solver: dict = field(default_factory=dict)


def adn_scenario_availability(adn: AdnNetwork, scenarios: ScenarioSet
                              ) -> dict[str, np.ndarray]:
    out = {}
    for f in adn.wt_farms:
        key = f"adn.wt.{f.node}"
        out[key] = np.array([scenarios.series(key, s)
                             for s in range(scenarios.size)])
    for f in adn.pv_farms:
        key = f"adn.pv.{f.node}"
        out[key] = np.array([scenarios.series(key, s)
                             for s in range(scenarios.size)])
    return out


def build_adn_model(adn: AdnNetwork, grid: TimeGrid, scenarios: ScenarioSet,
                    fas_prices: dict[str, tuple], atc_targets: dict[str, np.ndarray],
                    omega: dict[str, np.ndarray], tie_caps: dict[str, tuple],
                    phi_override: float | None = None
                    ) -> tuple[ConicModel, AdnIds]:
    """Assemble the network dispatch model.

    ``fas_prices[name]``, ``atc_targets[name]``, ``omega[name]`` and
    ``tie_caps[name] = (buy_max, sell_max)`` are keyed by CIES name.
    """
    if not check_radial(adn.node_count, adn.branches, adn.root):
        raise DispatchInfeasible("adn", "network is not a connected radial tree")
    T = grid.periods
    dt = grid.step_hours
    S = scenarios.size
    probs = np.asarray(scenarios.probabilities, dtype=float)
    kw2pu = 1.0 / (1000.0 * adn.s_base_mva)
    z_base = adn.v_base_kv ** 2 / adn.s_base_mva
    B = len(adn.branches)
    N = adn.node_count
    v_lo, v_hi = adn.u_min_pu ** 2, adn.u_max_pu ** 2
    avail = adn_scenario_availability(adn, scenarios)

    m = ConicModel("dispatch.adn")
    bp = np.empty((B, S, T), dtype=np.int64)
    bq = np.empty((B, S, T), dtype=np.int64)
    bl = np.empty((B, S, T), dtype=np.int64)
    for b, br in enumerate(adn.branches):
        i_base = adn.s_base_mva * 1e6 / (adn.v_base_kv * 1e3)
        l_max = (br.i_max_a / i_base) ** 2
        for s in range(S):
            bp[b, s] = m.add_vars(f"P[{b},{s}]", T, -INF, INF)
            bq[b, s] = m.add_vars(f"Q[{b},{s}]", T, -INF, INF)
            bl[b, s] = m.add_vars(f"l[{b},{s}]", T, 0.0, l_max)

    nv = np.empty((N, S, T), dtype=np.int64)
    for n in range(1, N + 1):
        lo, hi = (1.0, 1.0) if n == adn.root else (v_lo, v_hi)
        for s in range(S):
            nv[n - 1, s] = m.add_vars(f"v[{n},{s}]", T, lo, hi)

    on = np.array(m.add_vars("adn.mt.on", T, 0.0, 1.0, binary=True))
    add_commitment_rows(m, on, adn.mt.min_up, adn.mt.min_down, "adn.mt")
    mt_power = np.empty((S, T), dtype=np.int64)
    bes_ch = np.empty((S, T), dtype=np.int64)
    bes_dc = np.empty((S, T), dtype=np.int64)
    bes_soc = np.empty((S, T), dtype=np.int64)
    main = np.empty((S, T), dtype=np.int64)
    q_main = np.empty((S, T), dtype=np.int64)
    farm_used = {k: np.empty((S, T), dtype=np.int64) for k in avail}
    shed: dict[int, np.ndarray] = {}
    load_nodes = sorted(adn.load_p_kw)
    for n in load_nodes:
        shed[n] = np.empty((S, T), dtype=np.int64)

    fuel = adn.mt.gas_price / (adn.mt.elec_eff * adn.mt.gas_calorific)
    for s in range(S):
        w = float(probs[s])
        p = add_mt_scenario(m, adn.mt, on, T, dt, f"adn.s{s}.mt")
        mt_power[s] = p
        ch, dc, soc = add_storage_scenario(m, adn.bes, T, dt, f"adn.s{s}.bes")
        bes_ch[s], bes_dc[s], bes_soc[s] = ch, dc, soc
        main[s] = m.add_vars(f"adn.s{s}.main", T, 0.0, adn.main_import_max)
        q_main[s] = m.add_vars(f"adn.s{s}.qmain", T, -INF, INF)
        for t in range(T):
            m.add_obj(p[t], w * dt * (fuel + adn.mt.om_cost))
            m.add_obj(ch[t], w * dt * adn.bes.om_cost)
            m.add_obj(dc[t], w * dt * adn.bes.om_cost)
            m.add_obj(main[s][t], w * dt * adn.main_grid_price[t])
        for key, av in avail.items():
            used = np.array([m.add_var(f"adn.s{s}.{key}[{t}]", 0.0,
                                       float(av[s, t])) for t in range(T)])
            farm_used[key][s] = used
            for t in range(T):
                m.add_obj(used[t], w * dt * (adn.reg_om_cost - adn.curtail_penalty))
                m.obj_const += w * dt * adn.curtail_penalty * float(av[s, t])
        for n in load_nodes:
            p_load = adn.load_p_kw[n]
            sh = np.array([m.add_var(f"adn.s{s}.shed[{n},{t}]", 0.0,
                                     p_load * adn.load_shape[t])
                           for t in range(T)])
            shed[n][s] = sh
            for t in range(T):
                m.add_obj(sh[t], w * dt * adn.shed_penalty)

    tie: dict[str, TieVars] = {}
    for node, name in sorted(adn.cies_nodes.items()):
        buy_max, sell_max = tie_caps[name]
        tv = add_tie_block(m, S, T, buy_max, sell_max, f"adn.tie.{name}")
        tie[name] = tv
        prices = fas_prices[name]
        for s in range(S):
            w = float(probs[s])
            for t in range(T):
                m.add_obj(int(tv.buy[s, t]), w * dt * prices[t])
                m.add_obj(int(tv.sell[s, t]), -w * dt * adn.tou_price[t])

    # loss tariff keeps the relaxation tight and prices real losses
    for b, br in enumerate(adn.branches):
        r_pu = br.r_ohm / z_base
        if r_pu <= 0:
            continue
        coef = adn.loss_penalty * dt * 1000.0 * adn.s_base_mva * r_pu
        for s in range(S):
            w = float(probs[s])
            for t in range(T):
                m.add_obj(int(bl[b, s, t]), w * coef)

    # nodal balances, voltage drops, cone rows
    out_of: list[list[int]] = [[] for _ in range(N + 1)]
    into: list[list[int]] = [[] for _ in range(N + 1)]
    for b, br in enumerate(adn.branches):
        out_of[br.from_node].append(b)
        into[br.to_node].append(b)
    farms_at: dict[int, list[str]] = {}
    for f in adn.wt_farms:
        farms_at.setdefault(f.node, []).append(f"adn.wt.{f.node}")
    for f in adn.pv_farms:
        farms_at.setdefault(f.node, []).append(f"adn.pv.{f.node}")
    name_at = {node: name for node, name in adn.cies_nodes.items()}

    for s in range(S):
        for t in range(T):
            for n in range(1, N + 1):
                terms = []
                qterms = []
                for b in out_of[n]:
                    terms.append((int(bp[b, s, t]), 1.0))
                    qterms.append((int(bq[b, s, t]), 1.0))
                for b in into[n]:
                    br = adn.branches[b]
                    terms.append((int(bp[b, s, t]), -1.0))
                    terms.append((int(bl[b, s, t]), br.r_ohm / z_base))
                    qterms.append((int(bq[b, s, t]), -1.0))
                    qterms.append((int(bl[b, s, t]), br.x_ohm / z_base))
                if n == adn.root:
                    terms.append((int(main[s, t]), -kw2pu))
                    qterms.append((int(q_main[s, t]), -kw2pu))
                if n == adn.mt_node:
                    terms.append((int(mt_power[s, t]), -kw2pu))
                if n == adn.bes_node:
                    terms.append((int(bes_dc[s, t]), -kw2pu))
                    terms.append((int(bes_ch[s, t]), kw2pu))
                for key in farms_at.get(n, ()):
                    terms.append((int(farm_used[key][s, t]), -kw2pu))
                if n in name_at:
                    tv = tie[name_at[n]]
                    terms.append((int(tv.buy[s, t]), -kw2pu))
                    terms.append((int(tv.sell[s, t]), kw2pu))
                p_load = adn.load_p_kw.get(n, 0.0) * adn.load_shape[t]
                q_load = adn.load_q_kvar.get(n, 0.0) * adn.load_shape[t]
                if n in shed:
                    terms.append((int(shed[n][s, t]), -kw2pu))
                m.add_linear(terms, EQ, -kw2pu * p_load, f"adn.P[{n},{s},{t}]")
                m.add_linear(qterms, EQ, -kw2pu * q_load, f"adn.Q[{n},{s},{t}]")

            for b, br in enumerate(adn.branches):
                r_pu = br.r_ohm / z_base
                x_pu = br.x_ohm / z_base
                vi = int(nv[br.from_node - 1, s, t])
                vj = int(nv[br.to_node - 1, s, t])
                pb = int(bp[b, s, t])
                qb = int(bq[b, s, t])
                lv = int(bl[b, s, t])
                m.add_linear([(vj, 1.0), (vi, -1.0), (pb, 2.0 * r_pu),
                              (qb, 2.0 * x_pu),
                              (lv, -(r_pu ** 2 + x_pu ** 2))], EQ, 0.0,
                             f"adn.vdrop[{b},{s},{t}]")
                m.add_soc(([(lv, 1.0), (vi, 1.0)], 0.0),
                          [([(pb, 2.0)], 0.0), ([(qb, 2.0)], 0.0),
                           ([(lv, 1.0), (vi, -1.0)], 0.0)],
                          f"adn.cone[{b},{s},{t}]")

    phi_u = phi_override if phi_override is not None else adn.cvar_up_limit
    phi_d = phi_override if phi_override is not None else adn.cvar_down_limit
    cvar_ren, cvar_load = [], []
    for t in range(T):
        terms = []
        consts = []
        for s in range(S):
            row = [(int(farm_used[k][s, t]), -1.0) for k in sorted(avail)]
            terms.append(row)
            consts.append(float(sum(avail[k][s, t] for k in avail)))
        cvar_ren.append(add_cvar_block(m, terms, consts, probs, adn.cvar_beta,
                                       phi_u, f"adn.cvar.ren[{t}]"))
        terms = [[(int(shed[n][s, t]), 1.0) for n in load_nodes]
                 for s in range(S)]
        cvar_load.append(add_cvar_block(m, terms, [0.0] * S, probs,
                                        adn.cvar_beta, phi_d,
                                        f"adn.cvar.load[{t}]"))

    aux: dict[str, np.ndarray] = {}
    rows: dict[str, np.ndarray] = {}
    for name, tv in tie.items():
        target = np.asarray(atc_targets[name], dtype=float)
        if target.ndim == 1:
            target = np.tile(target, (S, 1))
        aux[name] = np.empty((S, T), dtype=np.int64)
        rows[name] = np.empty((S, T, 2), dtype=np.int64)
        for s in range(S):
            for t in range(T):
                terms = [(int(tv.buy[s, t]), 1.0), (int(tv.sell[s, t]), -1.0)]
                u = add_abs_penalty(
                    m, terms, -float(target[s, t]),
                    float(omega[name][t]) * float(probs[s]),
                    f"adn.atc.{name}[{s},{t}]")
                aux[name][s, t] = u
                rows[name][s, t] = (m.num_rows - 2, m.num_rows - 1)

    ids = AdnIds(bp, bq, bl, nv, mt_power, on, bes_ch, bes_dc, bes_soc,
                 farm_used, shed, main, q_main, tie, cvar_ren, cvar_load,
                 aux, rows, kw2pu, avail)
    return m, ids


def solve_adn_dispatch(adn: AdnNetwork, grid: TimeGrid, scenarios: ScenarioSet,
                       fas_prices: dict[str, tuple],
                       atc_targets: dict[str, np.ndarray] | None = None,
                       omega: dict[str, np.ndarray] | None = None,
                       tie_caps: dict[str, tuple] | None = None,
                       phi_override: float | None = None,
                       method: str = "fast",
                       rel_gap: float = 1e-3, node_limit: int = 400,
                       prebuilt: tuple | None = None,
                       obj_patch: dict[int, float] | None = None,
                       rhs_patch: dict[int, float] | None = None
                       ) -> AdnSolution:
    """Solve the network subproblem; same two-round strategy as the CIESs."""
    from .strategy import solve_two_round

    T = grid.periods
    names = sorted(adn.cies_nodes.values())
    if atc_targets is None:
        atc_targets = {n: np.zeros(T) for n in names}
    if omega is None:
        omega = {n: np.zeros(T) for n in names}
    if tie_caps is None:
        tie_caps = {n: (1000.0, 1000.0) for n in names}
    if prebuilt is None:
        m, ids = build_adn_model(adn, grid, scenarios, fas_prices,
                                 atc_targets, omega, tie_caps, phi_override)
    else:
        m, ids = prebuilt

    prefer_sell = {name: np.array([adn.tou_price[t] >= fas_prices[name][t]
                                   for t in range(T)])
                   for name in names}

    def fix_dirs(lb, ub, x):
        for name, tv in ids.tie.items():
            lb, ub = fix_tie_directions_bounds(lb, ub, tv, x,
                                               prefer_sell[name])
        return lb, ub

    res = solve_two_round(
        m, on_vars=[ids.mt_on], p_vars=[ids.mt_power],
        p_mins=[adn.mt.p_min], min_ups=[adn.mt.min_up],
        min_downs=[adn.mt.min_down], fix_directions=fix_dirs, method=method,
        rel_gap=rel_gap, node_limit=node_limit,
        obj_patch=obj_patch, rhs_patch=rhs_patch)
    if res.x is None:
        raise DispatchInfeasible("adn", res.status)
    return extract_adn_solution(adn, grid, scenarios, ids, res, fas_prices,
                                omega, atc_targets)


def extract_adn_solution(adn: AdnNetwork, grid: TimeGrid,
                         scenarios: ScenarioSet, ids: AdnIds, res,
                         fas_prices: dict[str, tuple],
                         omega: dict[str, np.ndarray],
                         atc_targets: dict[str, np.ndarray]) -> AdnSolution:
    x = res.x
    T = grid.periods
    dt = grid.step_hours
    probs = np.asarray(scenarios.probabilities, dtype=float)
    z_base = adn.v_base_kv ** 2 / adn.s_base_mva

    buy, sell, expected = {}, {}, {}
    for name, tv in ids.tie.items():
        b = x[tv.buy].copy()
        sl = x[tv.sell].copy()
        churn = np.minimum(b, sl)
        if np.max(churn) > 1e-9:
            b -= churn
            sl -= churn
        buy[name], sell[name] = b, sl
        expected[name] = probs @ (b - sl)

    mt_power = x[ids.mt_power]
    main = x[ids.main]
    zeros = np.zeros_like(mt_power)
    used_total = sum((x[v] for v in ids.farm_used.values()), zeros)
    avail_total = sum((ids.farm_avail[k] for k in ids.farm_used), zeros)
    curtail = avail_total - used_total
    shed_total = sum((x[v] for v in ids.shed.values()), zeros)

    fuel = float(probs @ mt_power.sum(axis=1)) * dt * adn.mt.gas_price / (
        adn.mt.elec_eff * adn.mt.gas_calorific)
    om = float(probs @ mt_power.sum(axis=1)) * dt * adn.mt.om_cost
    om += float(probs @ (x[ids.bes_ch] + x[ids.bes_dc]).sum(axis=1)) \
        * dt * adn.bes.om_cost
    om += float(probs @ used_total.sum(axis=1)) * dt * adn.reg_om_cost
    interaction = 0.0
    for name in buy:
        for t in range(T):
            interaction += float(probs @ (
                buy[name][:, t] * fas_prices[name][t]
                - sell[name][:, t] * adn.tou_price[t])) * dt
    main_cost = sum(float(probs @ main[:, t]) * dt * adn.main_grid_price[t]
                    for t in range(T))
    penalty = float(probs @ curtail.sum(axis=1)) * dt * adn.curtail_penalty \
        + float(probs @ shed_total.sum(axis=1)) * dt * adn.shed_penalty
    loss_kw = np.zeros((len(probs), T))
    for bidx, br in enumerate(adn.branches):
        r_pu = br.r_ohm / z_base
        loss_kw += x[ids.branch_l[bidx]] * r_pu * 1000.0 * adn.s_base_mva
    loss_cost = float(probs @ loss_kw.sum(axis=1)) * dt * adn.loss_penalty
    atc_pen = 0.0
    for name in buy:
        target = np.asarray(atc_targets[name], dtype=float)
        if target.ndim == 1:
            target = np.tile(target, (len(probs), 1))
        net = buy[name] - sell[name]
        atc_pen += float(sum(
            omega[name][t] * float(probs @ np.abs(net[:, t] - target[:, t]))
            for t in range(T)))
    total = fuel + om + interaction + main_cost + penalty + loss_cost
    costs = {"fuel": fuel, "om": om, "interaction": interaction,
             "main": main_cost, "penalty": penalty, "loss": loss_cost,
             "total": total, "atc_penalty": atc_pen}

    resid = relaxation_residuals(adn, ids, x)
    return AdnSolution(
        objective=res.objective,
        cost_total=total,
        costs=costs,
        buy=buy, sell=sell, expected_tie=expected,
        mt_power=mt_power,
        mt_on=tuple(int(round(v)) for v in x[ids.mt_on]),
        main=main,
        curtail=curtail, shed=shed_total,
        cvar_ren=np.array([b.value(x) for b in ids.cvar_ren]),
        cvar_load=np.array([b.value(x) for b in ids.cvar_load]),
        cone_residual_max=float(resid.max()),
        cone_residual_mean=float(resid.mean()),
        relaxation_exact=bool(resid.max() <= 1e-3),
        voltages=x[ids.node_v],
        bes_soc=x[ids.bes_soc],
        bes_ch=x[ids.bes_ch],
        bes_dc=x[ids.bes_dc],
        branch_p=x[ids.branch_p],
        branch_q=x[ids.branch_q],
        branch_l=x[ids.branch_l],
        q_main=x[ids.q_main],
        farm_used={k: x[v] for k, v in ids.farm_used.items()},
        shed_nodes={n: x[v] for n, v in ids.shed.items()},
        solver={"status": res.status, "nodes": res.extra.get("nodes"),
                "gap": res.extra.get("gap"),
                "gap_proven": res.extra.get("gap_proven"),
                "heuristic": res.extra.get("heuristic", False)})


def relaxation_residuals(adn: AdnNetwork, ids: AdnIds, x: np.ndarray
                         ) -> np.ndarray:
    """Per-branch cone slack (l*v - P^2 - Q^2), relative; shape (B, S, T)."""
    p = x[ids.branch_p]
    q = x[ids.branch_q]
    l = x[ids.branch_l]
    v_from = np.stack([x[ids.node_v[br.from_node - 1]]
                       for br in adn.branches])
    flow2 = p ** 2 + q ** 2
    return (l * v_from - flow2) / (1.0 + flow2)


class PowerFlowError(RuntimeError):
    """Load beyond the maximum deliverable power of the branch."""


def two_node_flow(r_pu: float, x_pu: float, load_p_pu: float,
                  load_q_pu: float, v_root: float = 1.0,
                  tol: float = 1e-12) -> tuple[float, float, float, float]:
    """Exact single-branch radial power flow by bisection on squared current.

    Solves (P_L + l R)^2 + (Q_L + l X)^2 = l v_root for the low-current
    (high-voltage) root; returns (P, Q, l, v_leaf) in per-unit.  This is the
    independent oracle for relaxation-tightness tests.
    """
    def f(l):
        return ((load_p_pu + l * r_pu) ** 2 + (load_q_pu + l * x_pu) ** 2
                - l * v_root)

    if load_p_pu == 0.0 and load_q_pu == 0.0:
        return 0.0, 0.0, 0.0, v_root
    denom = r_pu ** 2 + x_pu ** 2
    if denom == 0.0:
        l_star = (load_p_pu ** 2 + load_q_pu ** 2) / v_root
        return load_p_pu, load_q_pu, l_star, v_root
    l_vertex = (v_root / 2.0 - r_pu * load_p_pu - x_pu * load_q_pu) / denom
    if l_vertex <= 0.0 or f(l_vertex) > 0.0:
        raise PowerFlowError("no physical flow: load beyond deliverable power")
    lo, hi = 0.0, l_vertex
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    l_star = 0.5 * (lo + hi)
    p = load_p_pu + l_star * r_pu
    q = load_q_pu + l_star * x_pu
    v_leaf = v_root - 2.0 * (r_pu * p + x_pu * q) + denom * l_star
    return p, q, l_star, v_leaf
