"""Stage 1: cost-minimal schedule of a CIES operating as an isolated network.

No tie line, no uncertainty: the CIES serves its own electric, heat and
cooling loads from its devices and renewable forecasts.  The result is the
reference operating point for the flexibility envelope.
"""

from __future__ import annotations

import numpy as np

from ..core.types import CiesConfig, PredispatchResult, TimeGrid
from ..dispatch.blocks import CiesVars, add_cies_block
from ..kernel import ConicModel, solve_mixed
from ..kernel.solve import SolveResult


class PredispatchInfeasible(RuntimeError):
    def __init__(self, cies_name: str, detail: str = ""):
        super().__init__(
            f"pre-dispatch of {cies_name} is infeasible"
            + (f": {detail}" if detail else ""))


def build_predispatch_model(cies: CiesConfig, grid: TimeGrid
                            ) -> tuple[ConicModel, CiesVars]:
    """Deterministic single-scenario model over the forecasts."""
    m = ConicModel(f"predispatch.{cies.name}")
    wt = np.asarray([cies.wt_forecast], dtype=float)
    pv = np.asarray([cies.pv_forecast], dtype=float)
    ids = add_cies_block(m, cies, grid, wt, pv, probs=np.array([1.0]))
    return m, ids


def solve_predispatch(cies: CiesConfig, grid: TimeGrid,
                      rel_gap: float = 1e-4) -> PredispatchResult:
    m, ids = build_predispatch_model(cies, grid)
    res = solve_mixed(m, rel_gap=rel_gap)
    if res.x is None:
        raise PredispatchInfeasible(cies.name, res.status)
    return extract_predispatch(cies, grid, ids, res)


def extract_predispatch(cies: CiesConfig, grid: TimeGrid, ids: CiesVars,
                        res: SolveResult) -> PredispatchResult:
    x = res.x
    dt = grid.step_hours
    T = grid.periods
    mt = cies.mt

    def series(vids) -> tuple[float, ...]:
        return tuple(float(v) for v in x[vids])

    mt_power = series(ids.mt_power[0])
    coupling = {k: series(v[0]) for k, v in ids.coupling_in.items()}
    ch = {k: series(v[0]) for k, v in ids.storage_ch.items()}
    dc = {k: series(v[0]) for k, v in ids.storage_dc.items()}
    soc = {k: series(v[0]) for k, v in ids.storage_soc.items()}
    tse = series(ids.tse)
    wt_used = series(ids.wt_used[0])
    pv_used = series(ids.pv_used[0])
    shed = series(ids.shed[0])
    curtail = tuple(float(ids.wt_avail[0, t] - wt_used[t]
                          + ids.pv_avail[0, t] - pv_used[t]) for t in range(T))

    fuel = sum(mt_power) * dt * mt.gas_price / (mt.elec_eff * mt.gas_calorific)
    om = sum(mt_power) * dt * mt.om_cost
    by_kind = {d.kind: d for d in cies.coupling}
    for k, s in coupling.items():
        om += sum(s) * dt * by_kind[k[:-1]].om_cost
    st_by_kind = {s.kind: s for s in cies.storage}
    for k in ch:
        om += (sum(ch[k]) + sum(dc[k])) * dt * st_by_kind[k[:-1]].om_cost
    om += (sum(wt_used) + sum(pv_used)) * dt * cies.reg_om_cost
    dr = sum(max(-v, 0.0) for v in tse) * dt * cies.tse.dr_comp
    penalty = (sum(curtail) * cies.curtail_penalty
               + sum(shed) * cies.shed_penalty) * dt
    costs = {"fuel": fuel, "om": om, "dr": dr, "penalty": penalty,
             "total": fuel + om + dr + penalty}

    return PredispatchResult(
        cies_name=cies.name,
        objective=res.objective,
        costs=costs,
        mt_power=mt_power,
        mt_on=tuple(int(round(v)) for v in x[ids.mt_on]),
        coupling_in=coupling,
        storage_ch=ch, storage_dc=dc, storage_soc=soc,
        tse_shift=tse,
        wt_used=wt_used, pv_used=pv_used,
        curtail=curtail, shed=shed,
        solver={"status": res.status, "nodes": res.extra.get("nodes"),
                "gap": res.extra.get("gap")})


def verify_predispatch(result: PredispatchResult, cies: CiesConfig,
                       grid: TimeGrid) -> float:
    """Worst residual of the operating constraints at the stored point."""
    T = grid.periods
    dt = grid.step_hours
    mt = cies.mt
    worst = 0.0

    def bump(v):
        nonlocal worst
        worst = max(worst, abs(v))

    bes_ch = [sum(result.storage_ch[k][t] for k in result.storage_ch
                  if k.startswith("bes")) for t in range(T)]
    bes_dc = [sum(result.storage_dc[k][t] for k in result.storage_dc
                  if k.startswith("bes")) for t in range(T)]

    for t in range(T):
        on = result.mt_on[t]
        p = result.mt_power[t]
        bump(max(0.0, p - mt.p_max * on))
        bump(max(0.0, mt.p_min * on - p))
        if t:
            step = p - result.mt_power[t - 1]
            bump(max(0.0, step - mt.ramp_up * dt))
            bump(max(0.0, -step - mt.ramp_down * dt))
        supply = (result.wt_used[t] + result.pv_used[t] + p
                  + bes_dc[t] - bes_ch[t] + result.shed[t])
        draw = (cies.elec_load[t] + result.tse_shift[t]
                + sum(result.coupling_in[k][t] for k in result.coupling_in
                      if k.startswith(("eb", "ec"))))
        bump(supply - draw)

        heat = sum(result.coupling_in[k][t] * cies.coupling_of("hrb")[int(k[3:])].efficiency
                   for k in result.coupling_in if k.startswith("hrb"))
        heat += sum(result.coupling_in[k][t] * cies.coupling_of("eb")[int(k[2:])].efficiency
                    for k in result.coupling_in if k.startswith("eb"))
        heat += sum(result.storage_dc[k][t] - result.storage_ch[k][t]
                    for k in result.storage_dc if k.startswith("hes"))
        heat_draw = cies.heat_load[t] + sum(
            result.coupling_in[k][t] for k in result.coupling_in
            if k.startswith("ac"))
        bump(heat - heat_draw)

        cool = sum(result.coupling_in[k][t] * cies.coupling_of("ac")[int(k[2:])].efficiency
                   for k in result.coupling_in if k.startswith("ac"))
        cool += sum(result.coupling_in[k][t] * cies.coupling_of("ec")[int(k[2:])].efficiency
                    for k in result.coupling_in if k.startswith("ec"))
        cool += sum(result.storage_dc[k][t] - result.storage_ch[k][t]
                    for k in result.storage_dc if k.startswith("ces"))
        bump(cool - cies.cool_load[t])

    for k, soc in result.storage_soc.items():
        st = next(s for s in cies.storage if k.startswith(s.kind))
        prev = st.s_init
        for t in range(T):
            expected = ((1.0 - st.loss_coeff) * prev
                        + (st.eff_ch * result.storage_ch[k][t]
                           - result.storage_dc[k][t] / st.eff_dc) * dt)
            bump(soc[t] - expected)
            prev = soc[t]
        bump(soc[T - 1] - st.s_init)

    bump(sum(result.tse_shift))
    return worst
