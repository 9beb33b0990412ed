"""Shared fixtures: bundled-case artifacts are computed once per session."""

import dataclasses

import numpy as np
import pytest

ACCEPTANCE: dict[int, str] = {}


def record_criterion(n: int, ok: bool, detail: str = ""):
    ACCEPTANCE[n] = (f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}"
                     + (f" - {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])

from flexgrid.core import (Branch, CaseConfig, CiesConfig,
                           CouplingDeviceParams, MicroturbineParams,
                           AdnNetwork, AtcParams, PricingParams, RegFarm,
                           SamplingSpec, StorageParams, TimeGrid, TseParams,
                           bundled_case_69)
from flexgrid.flex.envelope import margins
from flexgrid.flex.predispatch import solve_predispatch
from flexgrid.pricing import cies_prices
from flexgrid.scenarios import generate_scenarios


@pytest.fixture(scope="session")
def case69():
    return bundled_case_69()


@pytest.fixture(scope="session")
def scen69(case69):
    return generate_scenarios(case69)


@pytest.fixture(scope="session")
def flex69(case69):
    envelopes, curves = {}, {}
    for c in case69.cies:
        pre = solve_predispatch(c, case69.time_grid)
        env = margins(c, pre, case69.time_grid)
        envelopes[c.name] = env
        curves[c.name] = cies_prices(c, env, case69.pricing,
                                     case69.adn.tou_price)
    return envelopes, curves


def small_case(seed: int = 0, T: int = 6) -> CaseConfig:
    """Tiny 4-node feeder with one community, for randomized sweeps."""
    rng = np.random.default_rng(seed)
    shape = tuple(float(v) for v in rng.uniform(0.6, 1.0, T))
    wt_shape = tuple(float(v) for v in rng.uniform(0.3, 0.9, T))
    mt = MicroturbineParams(600.0, 100.0, 400.0, 400.0, 2, 2, 0.35, 0.15,
                            0.4, 9.7, 0.02)
    cies_mt = MicroturbineParams(400.0, 80.0, 300.0, 300.0, 2, 2, 0.35, 0.15,
                                 0.5, 9.7, 0.02)
    heat_peak = float(rng.uniform(150.0, 250.0))
    cies = CiesConfig(
        name="c1", node=4, mt=cies_mt,
        coupling=(
            CouplingDeviceParams("hrb", 3000.0, 0.0, 3000.0, 3000.0, 0.9, 0.0),
            CouplingDeviceParams("eb", 300.0, 0.0, 300.0, 300.0, 0.95, 0.01),
        ),
        storage=(StorageParams("bes", 80.0, 80.0, 30.0, 150.0, 75.0,
                               0.0, 0.95, 0.95, 0.01),),
        tse=TseParams(0.1, 0.05),
        elec_load=tuple(float(rng.uniform(120.0, 260.0)) for _ in range(T)),
        heat_load=tuple(heat_peak * v for v in shape),
        cool_load=tuple(0.0 for _ in range(T)),
        wt_forecast=tuple(150.0 * v for v in wt_shape),
        pv_forecast=tuple(0.0 for _ in range(T)),
        wt_capacity=150.0, pv_capacity=1.0,
        curtail_penalty=0.1, shed_penalty=2.0, reg_om_cost=0.01,
        cvar_beta=0.9, cvar_up_limit=150.0, cvar_down_limit=150.0,
        tie_buy_max=400.0, tie_sell_max=400.0)

    branches = (Branch(1, 2, 0.08, 0.05, 400.0),
                Branch(2, 3, 0.10, 0.06, 400.0),
                Branch(2, 4, 0.06, 0.04, 400.0))
    adn = AdnNetwork(
        node_count=4, root=1, v_base_kv=12.66, s_base_mva=1.0,
        u_min_pu=0.93, u_max_pu=1.07,
        branches=branches,
        load_p_kw={2: float(rng.uniform(150.0, 400.0)),
                   3: float(rng.uniform(150.0, 400.0))},
        load_q_kvar={2: 80.0, 3: 90.0},
        load_shape=shape,
        mt_node=2, mt=mt,
        bes_node=3,
        bes=StorageParams("bes", 100.0, 100.0, 40.0, 200.0, 100.0,
                          0.0, 0.96, 0.96, 0.005),
        wt_farms=(RegFarm(3, 300.0, tuple(300.0 * v for v in wt_shape)),),
        pv_farms=(),
        cies_nodes={4: "c1"},
        tou_price=tuple(float(v) for v in rng.uniform(0.08, 0.16, T)),
        main_grid_price=tuple(float(v) for v in rng.uniform(0.09, 0.15, T)),
        main_import_max=float(rng.uniform(300.0, 700.0)),
        curtail_penalty=0.1, shed_penalty=1.0, loss_penalty=0.15,
        reg_om_cost=0.01,
        cvar_beta=0.9, cvar_up_limit=300.0, cvar_down_limit=300.0)

    return CaseConfig(
        time_grid=TimeGrid(T, 1.0), adn=adn, cies=(cies,),
        sampling=SamplingSpec(n_samples=60, sigma_rel=0.15, n_scenarios=3,
                              seed=seed),
        atc=AtcParams(omega0=0.02, chi0=1e-4, lam=2.5, eps1=0.01, eps2=0.01,
                      k_max=40),
        pricing=PricingParams())
