"""Shared constraint blocks for CIES and ADN optimization models.

One block = one bundle of variables plus the rows tying them together.
The CIES block covers the energy-producing device (commitment, ramps,
minimum up/down), coupling devices, storage dynamics, the shiftable load
and the three carrier balances; the deterministic pre-dispatch model uses
it with a single scenario and the stochastic dispatch model replicates the
recourse variables across scenarios (commitment and load shifts stay
first-stage).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.types import CiesConfig, MicroturbineParams, StorageParams, TimeGrid
from ..kernel import EQ, GE, INF, LE, ConicModel


class InfeasibleConfigError(ValueError):
    """Config that cannot satisfy a balance even at full device capacity."""


@dataclass
class CiesVars:
    """Variable ids of one CIES block; arrays indexed [s][t]."""
    mt_power: np.ndarray
    mt_on: np.ndarray                  # [t], binary, first stage
    coupling_in: dict[str, np.ndarray]
    storage_ch: dict[str, np.ndarray]
    storage_dc: dict[str, np.ndarray]
    storage_soc: dict[str, np.ndarray]
    tse: np.ndarray                    # [t], first stage
    dr_aux: np.ndarray                 # [t], >= max(-tse, 0)
    wt_used: np.ndarray
    pv_used: np.ndarray
    shed: np.ndarray
    elec_balance_rows: np.ndarray      # row ids, for attaching tie terms
    wt_avail: np.ndarray               # kW availability actually used
    pv_avail: np.ndarray


def add_commitment_rows(m: ConicModel, on: np.ndarray, min_up: int,
                        min_down: int, tag: str):
    """Minimum up/down linking; state transitions start at the second period."""
    T = len(on)
    for t in range(1, T):
        for tau in range(t + 1, min(t + min_up, T)):
            m.add_linear([(on[t], 1.0), (on[t - 1], -1.0), (on[tau], -1.0)],
                         LE, 0.0, f"{tag}.minup[{t},{tau}]")
        for tau in range(t + 1, min(t + min_down, T)):
            m.add_linear([(on[t - 1], 1.0), (on[t], -1.0), (on[tau], 1.0)],
                         LE, 1.0, f"{tag}.mindown[{t},{tau}]")


def add_mt_scenario(m: ConicModel, mt: MicroturbineParams, on: np.ndarray,
                    T: int, dt: float, tag: str) -> np.ndarray:
    """Output variables of the unit under an existing commitment."""
    p = np.array(m.add_vars(f"{tag}.p", T, 0.0, INF))
    for t in range(T):
        m.add_linear([(p[t], 1.0), (on[t], -mt.p_max)], LE, 0.0,
                     f"{tag}.cap[{t}]")
        m.add_linear([(p[t], 1.0), (on[t], -mt.p_min)], GE, 0.0,
                     f"{tag}.floor[{t}]")
        if t:
            m.add_linear([(p[t], 1.0), (p[t - 1], -1.0)], LE,
                         mt.ramp_up * dt, f"{tag}.rampup[{t}]")
            m.add_linear([(p[t], 1.0), (p[t - 1], -1.0)], GE,
                         -mt.ramp_down * dt, f"{tag}.rampdn[{t}]")
    return p


def add_storage_scenario(m: ConicModel, st: StorageParams, T: int, dt: float,
                         tag: str):
    """Charge/discharge/state variables with dynamics and cyclic terminal."""
    ch = np.array(m.add_vars(f"{tag}.ch", T, 0.0, st.p_ch_max))
    dc = np.array(m.add_vars(f"{tag}.dc", T, 0.0, st.p_dc_max))
    soc = np.array(m.add_vars(f"{tag}.soc", T, st.s_min, st.s_max))
    keep = 1.0 - st.loss_coeff
    for t in range(T):
        prev = [(soc[t - 1], -keep)] if t else []
        rhs = keep * st.s_init if not t else 0.0
        m.add_linear([(soc[t], 1.0), (ch[t], -st.eff_ch * dt),
                      (dc[t], dt / st.eff_dc)] + prev, EQ, rhs,
                     f"{tag}.soc[{t}]")
    m.add_linear([(soc[T - 1], 1.0)], EQ, st.s_init, f"{tag}.terminal")
    return ch, dc, soc


def add_ramped_input(m: ConicModel, dev, T: int, dt: float, tag: str) -> np.ndarray:
    v = np.array(m.add_vars(f"{tag}.in", T, dev.p_in_min, dev.p_in_max))
    for t in range(1, T):
        m.add_linear([(v[t], 1.0), (v[t - 1], -1.0)], LE,
                     dev.ramp_up * dt, f"{tag}.rampup[{t}]")
        m.add_linear([(v[t], 1.0), (v[t - 1], -1.0)], GE,
                     -dev.ramp_down * dt, f"{tag}.rampdn[{t}]")
    return v


def heat_supply_check(cies: CiesConfig, grid: TimeGrid):
    """Reject configs whose heat or cooling demand exceeds total capacity."""
    max_mt_heat = cies.mt.p_max * cies.mt.heat_per_kwh_elec
    hrb_eff = max((d.efficiency for d in cies.coupling_of("hrb")), default=0.0)
    heat_cap = hrb_eff * max_mt_heat
    heat_cap += sum(d.efficiency * d.p_in_max for d in cies.coupling_of("eb"))
    heat_cap += sum(s.p_dc_max for s in cies.storage_of("hes"))
    cool_cap = sum(d.efficiency * d.p_in_max
                   for d in cies.coupling_of("ac") + cies.coupling_of("ec"))
    cool_cap += sum(s.p_dc_max for s in cies.storage_of("ces"))
    ac_min_draw = sum(d.p_in_min for d in cies.coupling_of("ac"))
    for t in range(grid.periods):
        need_heat = cies.heat_load[t] + ac_min_draw
        if need_heat > heat_cap + 1e-9:
            raise InfeasibleConfigError(
                f"{cies.name}: heat demand {need_heat:.1f} kW at t={t} exceeds "
                f"total heat capacity {heat_cap:.1f} kW")
        if cies.cool_load[t] > cool_cap + 1e-9:
            raise InfeasibleConfigError(
                f"{cies.name}: cooling demand {cies.cool_load[t]:.1f} kW at "
                f"t={t} exceeds total cooling capacity {cool_cap:.1f} kW")


def add_cies_block(m: ConicModel, cies: CiesConfig, grid: TimeGrid,
                   wt_avail: np.ndarray, pv_avail: np.ndarray,
                   probs: np.ndarray, tag: str = "") -> CiesVars:
    """All device, balance and cost structure of one CIES.

    ``wt_avail``/``pv_avail`` are (S, T) availabilities; ``probs`` the S
    scenario weights applied to recourse costs.  Objective terms added here:
    fuel, O&M, demand-response compensation, curtailment and shedding
    penalties.  Tie-line terms are attached by the caller onto
    ``elec_balance_rows``.
    """
    heat_supply_check(cies, grid)
    T = grid.periods
    dt = grid.step_hours
    S = len(probs)
    tag = tag or cies.name
    mt = cies.mt

    on = np.array(m.add_vars(f"{tag}.on", T, 0.0, 1.0, binary=True))
    add_commitment_rows(m, on, mt.min_up, mt.min_down, tag)

    tse_cap = np.array([cies.tse.shift_ratio * v for v in cies.elec_load])
    tse = np.array([m.add_var(f"{tag}.tse[{t}]", -tse_cap[t], tse_cap[t])
                    for t in range(T)])
    m.add_linear([(v, 1.0) for v in tse], EQ, 0.0, f"{tag}.tse.cycle")
    dr = np.array(m.add_vars(f"{tag}.dr", T, 0.0, INF))
    for t in range(T):
        m.add_linear([(dr[t], 1.0), (tse[t], 1.0)], GE, 0.0, f"{tag}.dr[{t}]")
        m.add_obj(dr[t], cies.tse.dr_comp * dt)

    mt_power = np.empty((S, T), dtype=np.int64)
    coupling_in: dict[str, np.ndarray] = {}
    st_ch: dict[str, np.ndarray] = {}
    st_dc: dict[str, np.ndarray] = {}
    st_soc: dict[str, np.ndarray] = {}
    wt_used = np.empty((S, T), dtype=np.int64)
    pv_used = np.empty((S, T), dtype=np.int64)
    shed = np.empty((S, T), dtype=np.int64)
    balance_rows = np.empty((S, T), dtype=np.int64)

    kinds = {}
    for d in cies.coupling:
        kinds.setdefault(d.kind, []).append(d)
    storages = {}
    for s_par in cies.storage:
        storages.setdefault(s_par.kind, []).append(s_par)

    for s in range(S):
        w = float(probs[s])
        stag = f"{tag}.s{s}"
        p = add_mt_scenario(m, mt, on, T, dt, f"{stag}.mt")
        mt_power[s] = p
        fuel = mt.gas_price / (mt.elec_eff * mt.gas_calorific)
        for t in range(T):
            m.add_obj(p[t], w * dt * (fuel + mt.om_cost))

        cpl: dict[str, np.ndarray] = {}
        for kind, devs in kinds.items():
            for i, dev in enumerate(devs):
                key = f"{kind}{i}"
                v = add_ramped_input(m, dev, T, dt, f"{stag}.{key}")
                cpl[key] = v
                for t in range(T):
                    m.add_obj(v[t], w * dt * dev.om_cost)
        # recovery boiler consumes exactly the MT exhaust heat
        ratio = mt.heat_per_kwh_elec
        for key, v in cpl.items():
            if key.startswith("hrb"):
                for t in range(T):
                    m.add_linear([(v[t], 1.0), (p[t], -ratio)], EQ, 0.0,
                                 f"{stag}.{key}.mtheat[{t}]")

        sch: dict[str, np.ndarray] = {}
        sdc: dict[str, np.ndarray] = {}
        ssoc: dict[str, np.ndarray] = {}
        for kind, devs in storages.items():
            for i, st in enumerate(devs):
                key = f"{kind}{i}"
                ch, dc, soc = add_storage_scenario(m, st, T, dt, f"{stag}.{key}")
                sch[key], sdc[key], ssoc[key] = ch, dc, soc
                for t in range(T):
                    m.add_obj(ch[t], w * dt * st.om_cost)
                    m.add_obj(dc[t], w * dt * st.om_cost)

        wt = np.array([m.add_var(f"{stag}.wt[{t}]", 0.0, float(wt_avail[s, t]))
                       for t in range(T)])
        pv = np.array([m.add_var(f"{stag}.pv[{t}]", 0.0, float(pv_avail[s, t]))
                       for t in range(T)])
        cl = np.array([m.add_var(f"{stag}.shed[{t}]", 0.0, cies.elec_load[t])
                       for t in range(T)])
        wt_used[s], pv_used[s], shed[s] = wt, pv, cl
        for t in range(T):
            # curtailment = availability - use; penalize via negative use coef
            m.add_obj(wt[t], w * dt * (cies.reg_om_cost - cies.curtail_penalty))
            m.add_obj(pv[t], w * dt * (cies.reg_om_cost - cies.curtail_penalty))
            m.obj_const += w * dt * cies.curtail_penalty * float(
                wt_avail[s, t] + pv_avail[s, t])
            m.add_obj(cl[t], w * dt * cies.shed_penalty)

        for t in range(T):
            terms = [(p[t], 1.0), (wt[t], 1.0), (pv[t], 1.0), (cl[t], 1.0),
                     (tse[t], -1.0)]
            for key in sch:
                if key.startswith("bes"):
                    terms += [(sdc[key][t], 1.0), (sch[key][t], -1.0)]
            for key, v in cpl.items():
                if key.startswith(("eb", "ec")):
                    terms.append((v[t], -1.0))
            balance_rows[s, t] = m.add_linear(
                terms, EQ, cies.elec_load[t], f"{stag}.elec[{t}]")

            h_terms = []
            for key, v in cpl.items():
                if key.startswith("hrb"):
                    h_terms.append((v[t], _eff(cies, "hrb", key)))
                elif key.startswith("eb"):
                    h_terms.append((v[t], _eff(cies, "eb", key)))
                elif key.startswith("ac"):
                    h_terms.append((v[t], -1.0))
            for key in sch:
                if key.startswith("hes"):
                    h_terms += [(sdc[key][t], 1.0), (sch[key][t], -1.0)]
            m.add_linear(h_terms, EQ, cies.heat_load[t], f"{stag}.heat[{t}]")

            c_terms = []
            for key, v in cpl.items():
                if key.startswith("ac"):
                    c_terms.append((v[t], _eff(cies, "ac", key)))
                elif key.startswith("ec"):
                    c_terms.append((v[t], _eff(cies, "ec", key)))
            for key in sch:
                if key.startswith("ces"):
                    c_terms += [(sdc[key][t], 1.0), (sch[key][t], -1.0)]
            m.add_linear(c_terms, EQ, cies.cool_load[t], f"{stag}.cool[{t}]")

        if s == 0:
            coupling_in.update({k: np.empty((S, T), dtype=np.int64) for k in cpl})
            st_ch.update({k: np.empty((S, T), dtype=np.int64) for k in sch})
            st_dc.update({k: np.empty((S, T), dtype=np.int64) for k in sch})
            st_soc.update({k: np.empty((S, T), dtype=np.int64) for k in sch})
        for k, v in cpl.items():
            coupling_in[k][s] = v
        for k in sch:
            st_ch[k][s] = sch[k]
            st_dc[k][s] = sdc[k]
            st_soc[k][s] = ssoc[k]

    return CiesVars(mt_power, on, coupling_in, st_ch, st_dc, st_soc,
                    tse, dr, wt_used, pv_used, shed, balance_rows,
                    np.asarray(wt_avail, dtype=float),
                    np.asarray(pv_avail, dtype=float))


def _eff(cies: CiesConfig, kind: str, key: str) -> float:
    idx = int(key[len(kind):])
    return cies.coupling_of(kind)[idx].efficiency


@dataclass
class CvarIds:
    alpha: int
    z: np.ndarray          # [S]
    beta: float
    probs: np.ndarray

    def value(self, x: np.ndarray) -> float:
        tail = float(self.probs @ x[self.z]) / (1.0 - self.beta)
        return float(x[self.alpha]) + tail


def add_cvar_block(m: ConicModel, risk_terms: list[list[tuple[int, float]]],
                   risk_consts: list[float], probs: np.ndarray, beta: float,
                   cap: float, tag: str) -> CvarIds:
    """Tail-risk block: alpha + E[excess]/(1-beta) <= cap.

    ``risk_terms[s]``/``risk_consts[s]`` give the affine risk quantity of
    scenario s.  Alpha and the per-scenario excesses are decision variables.
    """
    S = len(probs)
    alpha = m.add_var(f"{tag}.alpha", -INF, INF)
    z = np.array(m.add_vars(f"{tag}.z", S, 0.0, INF))
    for s in range(S):
        m.add_linear([(z[s], 1.0), (alpha, 1.0)] +
                     [(vid, -c) for vid, c in risk_terms[s]],
                     GE, risk_consts[s], f"{tag}.excess[{s}]")
    w = 1.0 / (1.0 - beta)
    m.add_linear([(alpha, 1.0)] + [(z[s], w * float(probs[s]))
                                   for s in range(S)],
                 LE, cap, f"{tag}.cap")
    return CvarIds(alpha, z, beta, np.asarray(probs, dtype=float))


@dataclass
class TieVars:
    buy: np.ndarray        # [S, T]
    sell: np.ndarray
    buy_on: np.ndarray     # [S, T] direction indicators
    sell_on: np.ndarray


def add_tie_block(m: ConicModel, S: int, T: int, buy_max: float,
                  sell_max: float, tag: str) -> TieVars:
    """Buy/sell pair with exclusive-direction indicator variables."""
    buy = np.empty((S, T), dtype=np.int64)
    sell = np.empty((S, T), dtype=np.int64)
    b_on = np.empty((S, T), dtype=np.int64)
    s_on = np.empty((S, T), dtype=np.int64)
    for s in range(S):
        for t in range(T):
            buy[s, t] = m.add_var(f"{tag}.buy[{s},{t}]", 0.0, buy_max)
            sell[s, t] = m.add_var(f"{tag}.sell[{s},{t}]", 0.0, sell_max)
            b_on[s, t] = m.add_var(f"{tag}.buyon[{s},{t}]", 0.0, 1.0,
                                   binary=True)
            s_on[s, t] = m.add_var(f"{tag}.sellon[{s},{t}]", 0.0, 1.0,
                                   binary=True)
            m.add_linear([(buy[s, t], 1.0), (b_on[s, t], -buy_max)], LE, 0.0,
                         f"{tag}.buycap[{s},{t}]")
            m.add_linear([(sell[s, t], 1.0), (s_on[s, t], -sell_max)], LE, 0.0,
                         f"{tag}.sellcap[{s},{t}]")
            m.add_linear([(b_on[s, t], 1.0), (s_on[s, t], 1.0)], LE, 1.0,
                         f"{tag}.excl[{s},{t}]")
    return TieVars(buy, sell, b_on, s_on)


def add_abs_penalty(m: ConicModel, terms: list[tuple[int, float]],
                    const: float, weight: float, tag: str) -> int:
    """Aux u >= |expr|, objective weight * u; returns the aux variable id."""
    u = m.add_var(f"{tag}.abs", 0.0, INF, obj=weight)
    m.add_linear([(u, 1.0)] + [(v, -c) for v, c in terms], GE, const, tag + ".pos")
    m.add_linear([(u, 1.0)] + [(v, c) for v, c in terms], GE, -const, tag + ".neg")
    return u
