"""Bundled 69-node study case.

Network: the standard 12.66 kV, 69-node radial test feeder (68 branches,
3801.89 kW / 2694.1 kvar total base load); the table below is the commonly
reproduced version of that feeder.  Device placement: WT farms (800 kW) at
nodes 38 and 41, PV farms (600 kW) at nodes 60 and 61, an MT at node 17, a
BES at node 40, and residential/commercial/industrial CIESs at nodes 22, 31
and 44.

Time series (loads, renewable forecasts, tariffs) are synthetic 24-point
profiles: a diurnal PV bell (zero outside 06:00-19:00, peak 13:00), an
anti-correlated night-peaking WT profile, class-specific load shapes, and a
three-tier time-of-use tariff (valley 00:00-07:00, peak 11:00-15:00 and
18:00-21:00, flat otherwise).  All of it lives in the case data so studies
can substitute real measurements via the JSON case file.
"""

from __future__ import annotations

import math

from .types import (AdnNetwork, AtcParams, Branch, CaseConfig, CiesConfig,
                    CouplingDeviceParams, MicroturbineParams, PricingParams,
                    RegFarm, SamplingSpec, StorageParams, TimeGrid, TseParams)

# from, to, R (ohm), X (ohm), P load (kW), Q load (kvar) at the to-node
_FEEDER_69 = [
    (1, 2, 0.0005, 0.0012, 0.0, 0.0),
    (2, 3, 0.0005, 0.0012, 0.0, 0.0),
    (3, 4, 0.0015, 0.0036, 0.0, 0.0),
    (4, 5, 0.0251, 0.0294, 0.0, 0.0),
    (5, 6, 0.3660, 0.1864, 2.6, 2.2),
    (6, 7, 0.3811, 0.1941, 40.4, 30.0),
    (7, 8, 0.0922, 0.0470, 75.0, 54.0),
    (8, 9, 0.0493, 0.0251, 30.0, 22.0),
    (9, 10, 0.8190, 0.2707, 28.0, 19.0),
    (10, 11, 0.1872, 0.0619, 145.0, 104.0),
    (11, 12, 0.7114, 0.2351, 145.0, 104.0),
    (12, 13, 1.0300, 0.3400, 8.0, 5.0),
    (13, 14, 1.0440, 0.3450, 8.0, 5.5),
    (14, 15, 1.0580, 0.3496, 0.0, 0.0),
    (15, 16, 0.1966, 0.0650, 45.5, 30.0),
    (16, 17, 0.3744, 0.1238, 60.0, 35.0),
    (17, 18, 0.0047, 0.0016, 60.0, 35.0),
    (18, 19, 0.3276, 0.1083, 0.0, 0.0),
    (19, 20, 0.2106, 0.0690, 1.0, 0.6),
    (20, 21, 0.3416, 0.1129, 114.0, 81.0),
    (21, 22, 0.0140, 0.0046, 5.0, 3.5),
    (22, 23, 0.1591, 0.0526, 0.0, 0.0),
    (23, 24, 0.3463, 0.1145, 28.0, 20.0),
    (24, 25, 0.7488, 0.2475, 0.0, 0.0),
    (25, 26, 0.3089, 0.1021, 14.0, 10.0),
    (26, 27, 0.1732, 0.0572, 14.0, 10.0),
    (3, 28, 0.0044, 0.0108, 26.0, 18.6),
    (28, 29, 0.0640, 0.1565, 26.0, 18.6),
    (29, 30, 0.3978, 0.1315, 0.0, 0.0),
    (30, 31, 0.0702, 0.0232, 0.0, 0.0),
    (31, 32, 0.3510, 0.1160, 0.0, 0.0),
    (32, 33, 0.8390, 0.2816, 14.0, 10.0),
    (33, 34, 1.7080, 0.5646, 19.5, 14.0),
    (34, 35, 1.4740, 0.4873, 6.0, 4.0),
    (3, 36, 0.0044, 0.0108, 26.0, 18.55),
    (36, 37, 0.0640, 0.1565, 26.0, 18.55),
    (37, 38, 0.1053, 0.1230, 0.0, 0.0),
    (38, 39, 0.0304, 0.0355, 24.0, 17.0),
    (39, 40, 0.0018, 0.0021, 24.0, 17.0),
    (40, 41, 0.7283, 0.8509, 1.2, 1.0),
    (41, 42, 0.3100, 0.3623, 0.0, 0.0),
    (42, 43, 0.0410, 0.0478, 6.0, 4.3),
    (43, 44, 0.0092, 0.0116, 0.0, 0.0),
    (44, 45, 0.1089, 0.1373, 39.22, 26.3),
    (45, 46, 0.0009, 0.0012, 39.22, 26.3),
    (4, 47, 0.0034, 0.0084, 0.0, 0.0),
    (47, 48, 0.0851, 0.2083, 79.0, 56.4),
    (48, 49, 0.2898, 0.7091, 384.7, 274.5),
    (49, 50, 0.0822, 0.2011, 384.7, 274.5),
    (8, 51, 0.0928, 0.0473, 40.5, 28.3),
    (51, 52, 0.3319, 0.1114, 3.6, 2.7),
    (9, 53, 0.1740, 0.0886, 4.35, 3.5),
    (53, 54, 0.2030, 0.1034, 26.4, 19.0),
    (54, 55, 0.2842, 0.1447, 24.0, 17.2),
    (55, 56, 0.2813, 0.1433, 0.0, 0.0),
    (56, 57, 1.5900, 0.5337, 0.0, 0.0),
    (57, 58, 0.7837, 0.2630, 0.0, 0.0),
    (58, 59, 0.3042, 0.1006, 100.0, 72.0),
    (59, 60, 0.3861, 0.1172, 0.0, 0.0),
    (60, 61, 0.5075, 0.2585, 1244.0, 888.0),
    (61, 62, 0.0974, 0.0496, 32.0, 23.0),
    (62, 63, 0.1450, 0.0738, 0.0, 0.0),
    (63, 64, 0.7105, 0.3619, 227.0, 162.0),
    (64, 65, 1.0410, 0.5302, 59.0, 42.0),
    (11, 66, 0.2012, 0.0611, 18.0, 13.0),
    (66, 67, 0.0047, 0.0014, 18.0, 13.0),
    (12, 68, 0.7394, 0.2444, 28.0, 20.0),
    (68, 69, 0.0047, 0.0016, 28.0, 20.0),
]

HOURS = range(24)


def _pv_shape() -> tuple[float, ...]:
    out = []
    for t in HOURS:
        if 6 <= t <= 18:
            out.append(math.exp(-((t - 13.0) / 3.2) ** 2))
        else:
            out.append(0.0)
    peak = max(out)
    return tuple(round(v / peak, 4) for v in out)


def _wt_shape() -> tuple[float, ...]:
    # night peak, midday lull; anti-correlated with the PV bell
    return tuple(round(0.55 + 0.35 * math.cos(2 * math.pi * (t - 1) / 24), 4)
                 for t in HOURS)


_RESIDENTIAL = (0.48, 0.44, 0.42, 0.42, 0.44, 0.50, 0.62, 0.72, 0.68, 0.60,
                0.56, 0.55, 0.56, 0.54, 0.52, 0.55, 0.65, 0.80, 0.95, 1.00,
                0.98, 0.88, 0.70, 0.55)
_COMMERCIAL = (0.35, 0.33, 0.32, 0.32, 0.34, 0.40, 0.55, 0.75, 0.90, 0.97,
               1.00, 1.00, 0.98, 0.97, 0.95, 0.90, 0.85, 0.78, 0.68, 0.58,
               0.50, 0.45, 0.40, 0.37)
_INDUSTRIAL = (0.58, 0.56, 0.55, 0.55, 0.57, 0.65, 0.85, 0.97, 1.00, 1.00,
               1.00, 0.98, 0.96, 0.98, 1.00, 1.00, 0.98, 0.95, 0.85, 0.75,
               0.70, 0.66, 0.62, 0.60)
_ADN_SHAPE = (0.52, 0.49, 0.47, 0.47, 0.49, 0.55, 0.66, 0.78, 0.84, 0.86,
              0.88, 0.90, 0.89, 0.87, 0.86, 0.88, 0.91, 0.94, 0.95, 0.95,
              0.92, 0.84, 0.70, 0.58)

_RES_HEAT = (0.85, 0.85, 0.85, 0.85, 0.88, 0.95, 1.00, 0.95, 0.80, 0.65,
             0.55, 0.50, 0.48, 0.48, 0.50, 0.55, 0.65, 0.80, 0.92, 0.95,
             0.95, 0.92, 0.90, 0.88)
_COM_HEAT = (0.45, 0.45, 0.45, 0.45, 0.50, 0.65, 0.85, 1.00, 0.95, 0.85,
             0.75, 0.70, 0.68, 0.66, 0.66, 0.68, 0.70, 0.72, 0.70, 0.62,
             0.55, 0.50, 0.48, 0.46)
_IND_HEAT = (0.60, 0.60, 0.60, 0.60, 0.62, 0.72, 0.90, 1.00, 1.00, 0.98,
             0.96, 0.94, 0.92, 0.94, 0.96, 0.98, 0.96, 0.90, 0.80, 0.72,
             0.68, 0.65, 0.62, 0.60)
_RES_COOL = (0.40, 0.38, 0.36, 0.36, 0.38, 0.42, 0.50, 0.58, 0.66, 0.76,
             0.86, 0.94, 1.00, 1.00, 0.96, 0.90, 0.84, 0.78, 0.72, 0.66,
             0.58, 0.52, 0.46, 0.42)
_COM_COOL = (0.30, 0.28, 0.28, 0.28, 0.30, 0.36, 0.50, 0.68, 0.84, 0.94,
             1.00, 1.00, 1.00, 0.98, 0.96, 0.92, 0.84, 0.74, 0.62, 0.52,
             0.44, 0.38, 0.34, 0.32)
_IND_COOL = (0.50, 0.48, 0.48, 0.48, 0.50, 0.56, 0.70, 0.84, 0.92, 0.96,
             1.00, 1.00, 0.98, 0.98, 1.00, 0.98, 0.94, 0.86, 0.74, 0.66,
             0.60, 0.56, 0.52, 0.50)


def tou_price() -> tuple[float, ...]:
    """Three-tier tariff: valley 0-7h, peaks 11-15h and 18-21h, flat else."""
    out = []
    for t in HOURS:
        if t <= 6:
            out.append(0.08)
        elif 11 <= t <= 14 or 18 <= t <= 20:
            out.append(0.16)
        else:
            out.append(0.12)
    return tuple(out)


def main_grid_price() -> tuple[float, ...]:
    out = []
    for t in HOURS:
        if t <= 6:
            out.append(0.10)
        elif 11 <= t <= 14 or 18 <= t <= 20:
            out.append(0.155)
        else:
            out.append(0.13)
    return tuple(out)


def _scale(shape, peak_kw) -> tuple[float, ...]:
    return tuple(round(peak_kw * v, 3) for v in shape)


def _mt(p_max, p_min, ramp, gas_price) -> MicroturbineParams:
    # elec_eff/heat_loss and O&M are engineering defaults; min_down = min_up
    return MicroturbineParams(
        p_max=p_max, p_min=p_min, ramp_up=ramp, ramp_down=ramp,
        min_up=4, min_down=4, elec_eff=0.35, heat_loss=0.15,
        gas_price=gas_price, gas_calorific=9.7, om_cost=0.02)


def _cies(name, node, mt_caps, eb, ac, ec, phi, gas_price,
          elec_peak, heat_peak, cool_peak, shapes, wt_cap, pv_cap,
          bes_kw, bes_kwh) -> CiesConfig:
    e_shape, h_shape, c_shape = shapes
    coupling = (
        CouplingDeviceParams("hrb", p_in_max=6000.0, p_in_min=0.0,
                             ramp_up=6000.0, ramp_down=6000.0,
                             efficiency=0.9, om_cost=0.01),
        CouplingDeviceParams("eb", p_in_max=eb[0], p_in_min=0.0,
                             ramp_up=eb[1], ramp_down=eb[1],
                             efficiency=0.95, om_cost=0.01),
        CouplingDeviceParams("ac", p_in_max=ac[0], p_in_min=ac[1],
                             ramp_up=ac[2], ramp_down=ac[2],
                             efficiency=0.8, om_cost=0.01),
        CouplingDeviceParams("ec", p_in_max=ec[0], p_in_min=0.0,
                             ramp_up=ec[1], ramp_down=ec[1],
                             efficiency=3.0, om_cost=0.01),
    )
    storage = (
        StorageParams("bes", p_ch_max=bes_kw, p_dc_max=bes_kw,
                      s_min=0.2 * bes_kwh, s_max=bes_kwh, s_init=0.5 * bes_kwh,
                      loss_coeff=0.001, eff_ch=0.95, eff_dc=0.95, om_cost=0.01),
        StorageParams("hes", p_ch_max=200.0, p_dc_max=200.0,
                      s_min=80.0, s_max=400.0, s_init=200.0,
                      loss_coeff=0.01, eff_ch=0.95, eff_dc=0.95, om_cost=0.01),
        StorageParams("ces", p_ch_max=150.0, p_dc_max=150.0,
                      s_min=60.0, s_max=300.0, s_init=150.0,
                      loss_coeff=0.01, eff_ch=0.95, eff_dc=0.95, om_cost=0.01),
    )
    return CiesConfig(
        name=name, node=node,
        mt=_mt(mt_caps[0], mt_caps[1], mt_caps[2], gas_price),
        coupling=coupling, storage=storage,
        tse=TseParams(shift_ratio=0.15, dr_comp=0.05),
        elec_load=_scale(e_shape, elec_peak),
        heat_load=_scale(h_shape, heat_peak),
        cool_load=_scale(c_shape, cool_peak),
        wt_forecast=_scale(_wt_shape(), wt_cap),
        pv_forecast=_scale(_pv_shape(), pv_cap),
        wt_capacity=wt_cap, pv_capacity=pv_cap,
        curtail_penalty=0.1, shed_penalty=2.0, reg_om_cost=0.01,
        cvar_beta=0.95, cvar_up_limit=phi, cvar_down_limit=phi,
        tie_buy_max=1000.0, tie_sell_max=1000.0)


def bundled_case_69() -> CaseConfig:
    """The full 69-node study case with three CIESs."""
    branches = tuple(Branch(f, t, r, x, 400.0) for f, t, r, x, _, _ in _FEEDER_69)
    load_p = {t: p for _, t, _, _, p, _ in _FEEDER_69 if p > 0}
    load_q = {t: q for _, t, _, _, _, q in _FEEDER_69 if q > 0}

    adn = AdnNetwork(
        node_count=69, root=1, v_base_kv=12.66, s_base_mva=1.0,
        u_min_pu=0.88, u_max_pu=1.07,
        branches=branches, load_p_kw=load_p, load_q_kvar=load_q,
        load_shape=_ADN_SHAPE,
        mt_node=17,
        mt=_mt(2500.0, 200.0, 1200.0, 0.4),
        bes_node=40,
        bes=StorageParams("bes", p_ch_max=350.0, p_dc_max=350.0,
                          s_min=300.0, s_max=1500.0, s_init=750.0,
                          loss_coeff=0.0, eff_ch=0.96, eff_dc=0.96,
                          om_cost=0.005),
        wt_farms=(RegFarm(38, 800.0, _scale(_wt_shape(), 800.0)),
                  RegFarm(41, 800.0, _scale(_wt_shape(), 800.0))),
        pv_farms=(RegFarm(60, 600.0, _scale(_pv_shape(), 600.0)),
                  RegFarm(61, 600.0, _scale(_pv_shape(), 600.0))),
        cies_nodes={22: "residential", 31: "commercial", 44: "industrial"},
        tou_price=tou_price(), main_grid_price=main_grid_price(),
        # weak upstream link: internal resources carry the afternoon peak
        main_import_max=500.0,
        curtail_penalty=0.1, shed_penalty=0.2, loss_penalty=0.11,
        reg_om_cost=0.01,
        cvar_beta=0.95, cvar_up_limit=500.0, cvar_down_limit=500.0)

    cies = (
        _cies("residential", 22,
              mt_caps=(1000.0, 200.0, 500.0), eb=(400.0, 200.0),
              ac=(500.0, 60.0, 200.0), ec=(100.0, 50.0), phi=200.0,
              gas_price=0.45, elec_peak=650.0, heat_peak=420.0, cool_peak=180.0,
              shapes=(_RESIDENTIAL, _RES_HEAT, _RES_COOL),
              wt_cap=300.0, pv_cap=200.0, bes_kw=150.0, bes_kwh=300.0),
        _cies("commercial", 31,
              mt_caps=(650.0, 100.0, 300.0), eb=(400.0, 200.0),
              ac=(500.0, 60.0, 200.0), ec=(200.0, 100.0), phi=200.0,
              gas_price=0.55, elec_peak=550.0, heat_peak=350.0, cool_peak=300.0,
              shapes=(_COMMERCIAL, _COM_HEAT, _COM_COOL),
              wt_cap=200.0, pv_cap=300.0, bes_kw=150.0, bes_kwh=300.0),
        _cies("industrial", 44,
              mt_caps=(1400.0, 200.0, 700.0), eb=(900.0, 400.0),
              ac=(800.0, 80.0, 400.0), ec=(500.0, 200.0), phi=500.0,
              gas_price=0.55, elec_peak=900.0, heat_peak=700.0, cool_peak=420.0,
              shapes=(_INDUSTRIAL, _IND_HEAT, _IND_COOL),
              wt_cap=400.0, pv_cap=300.0, bes_kw=250.0, bes_kwh=500.0),
    )

    return CaseConfig(
        time_grid=TimeGrid(24, 1.0),
        adn=adn, cies=cies,
        sampling=SamplingSpec(n_samples=1000, sigma_rel=0.10,
                              n_scenarios=5, seed=20240601),
        atc=AtcParams(omega0=0.02, chi0=1e-4, lam=2.5,
                      eps1=0.01, eps2=0.01, k_max=100),
        pricing=PricingParams(fas_price_cap=None, unit_basis_kwh=1.0,
                              eb_eff_for_credit=None))


def scarcity_tightened(case: CaseConfig) -> CaseConfig:
    """Variant with an even weaker upstream link.

    The evening residual (load minus renewables minus the derated import)
    then exceeds what the grid can serve alone: at time-of-use prices the
    communities lean on the grid and it sheds load, while margin-based
    flexibility prices keep their generators carrying the shortage.
    """
    from dataclasses import replace
    adn = replace(case.adn, main_import_max=400.0)
    return replace(case, adn=adn)
