"""Case and scenario files: a single JSON document per the reference schema.

Top-level keys: ``time_grid``, ``adn``, ``cies`` (list), ``scenario_gen``,
``atc``, ``pricing``; all time series are arrays of length T.  The bundled
69-node case serialized by ``save_case`` is the canonical example of the
schema.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .types import (AdnNetwork, AtcParams, Branch, CaseConfig, CiesConfig,
                    CouplingDeviceParams, MicroturbineParams, PricingParams,
                    RegFarm, SamplingSpec, ScenarioSet, StorageParams,
                    TimeGrid, TseParams)


class CaseFormatError(ValueError):
    """Malformed case document (missing keys, wrong types)."""


def _mt_dict(mt: MicroturbineParams) -> dict:
    return dataclasses.asdict(mt)


def _mt_from(d: dict) -> MicroturbineParams:
    return MicroturbineParams(**d)


def case_to_dict(case: CaseConfig) -> dict:
    adn = case.adn
    return {
        "time_grid": {"periods": case.time_grid.periods,
                      "step_hours": case.time_grid.step_hours},
        "adn": {
            "node_count": adn.node_count,
            "root": adn.root,
            "v_base_kv": adn.v_base_kv,
            "s_base_mva": adn.s_base_mva,
            "u_min_pu": adn.u_min_pu,
            "u_max_pu": adn.u_max_pu,
            "branches": [dataclasses.asdict(b) for b in adn.branches],
            "load_p_kw": {str(k): v for k, v in adn.load_p_kw.items()},
            "load_q_kvar": {str(k): v for k, v in adn.load_q_kvar.items()},
            "load_shape": list(adn.load_shape),
            "mt_node": adn.mt_node,
            "mt": _mt_dict(adn.mt),
            "bes_node": adn.bes_node,
            "bes": dataclasses.asdict(adn.bes),
            "wt_farms": [dataclasses.asdict(f) for f in adn.wt_farms],
            "pv_farms": [dataclasses.asdict(f) for f in adn.pv_farms],
            "cies_nodes": {str(k): v for k, v in adn.cies_nodes.items()},
            "tou_price": list(adn.tou_price),
            "main_grid_price": list(adn.main_grid_price),
            "main_import_max": adn.main_import_max,
            "curtail_penalty": adn.curtail_penalty,
            "shed_penalty": adn.shed_penalty,
            "loss_penalty": adn.loss_penalty,
            "reg_om_cost": adn.reg_om_cost,
            "cvar": {"beta": adn.cvar_beta, "phi_up_kw": adn.cvar_up_limit,
                     "phi_down_kw": adn.cvar_down_limit},
        },
        "cies": [_cies_to_dict(c) for c in case.cies],
        "scenario_gen": dataclasses.asdict(case.sampling),
        "atc": {"omega0": case.atc.omega0, "chi0": case.atc.chi0,
                "lambda": case.atc.lam, "eps1": case.atc.eps1,
                "eps2": case.atc.eps2, "k_max": case.atc.k_max},
        "pricing": dataclasses.asdict(case.pricing),
    }


def _cies_to_dict(c: CiesConfig) -> dict:
    return {
        "name": c.name,
        "node": c.node,
        "mt": _mt_dict(c.mt),
        "coupling": [dataclasses.asdict(d) for d in c.coupling],
        "storage": [dataclasses.asdict(s) for s in c.storage],
        "tse": dataclasses.asdict(c.tse),
        "elec_load": list(c.elec_load),
        "heat_load": list(c.heat_load),
        "cool_load": list(c.cool_load),
        "wt_forecast": list(c.wt_forecast),
        "pv_forecast": list(c.pv_forecast),
        "wt_capacity": c.wt_capacity,
        "pv_capacity": c.pv_capacity,
        "curtail_penalty": c.curtail_penalty,
        "shed_penalty": c.shed_penalty,
        "reg_om_cost": c.reg_om_cost,
        "cvar": {"beta": c.cvar_beta, "phi_up_kw": c.cvar_up_limit,
                 "phi_down_kw": c.cvar_down_limit},
        "tie": {"buy_max_kw": c.tie_buy_max, "sell_max_kw": c.tie_sell_max},
    }


def _series(d: dict, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in d[key])
    except (KeyError, TypeError) as e:
        raise CaseFormatError(f"bad or missing series {key!r}") from e


def _cies_from_dict(d: dict) -> CiesConfig:
    cvar = d.get("cvar", {})
    tie = d.get("tie", {})
    return CiesConfig(
        name=d["name"],
        node=int(d["node"]),
        mt=_mt_from(d["mt"]),
        coupling=tuple(CouplingDeviceParams(**x) for x in d.get("coupling", [])),
        storage=tuple(StorageParams(**x) for x in d.get("storage", [])),
        tse=TseParams(**d["tse"]),
        elec_load=_series(d, "elec_load"),
        heat_load=_series(d, "heat_load"),
        cool_load=_series(d, "cool_load"),
        wt_forecast=_series(d, "wt_forecast"),
        pv_forecast=_series(d, "pv_forecast"),
        wt_capacity=float(d.get("wt_capacity", max(d["wt_forecast"], default=0.0))),
        pv_capacity=float(d.get("pv_capacity", max(d["pv_forecast"], default=0.0))),
        curtail_penalty=float(d.get("curtail_penalty", 0.1)),
        shed_penalty=float(d.get("shed_penalty", 2.0)),
        reg_om_cost=float(d.get("reg_om_cost", 0.01)),
        cvar_beta=float(cvar.get("beta", 0.95)),
        cvar_up_limit=float(cvar.get("phi_up_kw", 200.0)),
        cvar_down_limit=float(cvar.get("phi_down_kw", 200.0)),
        tie_buy_max=float(tie.get("buy_max_kw", 1000.0)),
        tie_sell_max=float(tie.get("sell_max_kw", 1000.0)),
    )


def case_from_dict(doc: dict) -> CaseConfig:
    try:
        tg = doc["time_grid"]
        a = doc["adn"]
        cvar = a.get("cvar", {})
        adn = AdnNetwork(
            node_count=int(a["node_count"]),
            root=int(a.get("root", 1)),
            v_base_kv=float(a.get("v_base_kv", 12.66)),
            s_base_mva=float(a.get("s_base_mva", 1.0)),
            u_min_pu=float(a.get("u_min_pu", 0.93)),
            u_max_pu=float(a.get("u_max_pu", 1.07)),
            branches=tuple(Branch(**b) for b in a["branches"]),
            load_p_kw={int(k): float(v) for k, v in a["load_p_kw"].items()},
            load_q_kvar={int(k): float(v) for k, v in a["load_q_kvar"].items()},
            load_shape=_series(a, "load_shape"),
            mt_node=int(a["mt_node"]),
            mt=_mt_from(a["mt"]),
            bes_node=int(a["bes_node"]),
            bes=StorageParams(**a["bes"]),
            wt_farms=tuple(RegFarm(node=int(f["node"]),
                                   capacity_kw=float(f["capacity_kw"]),
                                   profile=tuple(f["profile"]))
                           for f in a.get("wt_farms", [])),
            pv_farms=tuple(RegFarm(node=int(f["node"]),
                                   capacity_kw=float(f["capacity_kw"]),
                                   profile=tuple(f["profile"]))
                           for f in a.get("pv_farms", [])),
            cies_nodes={int(k): v for k, v in a.get("cies_nodes", {}).items()},
            tou_price=_series(a, "tou_price"),
            main_grid_price=_series(a, "main_grid_price"),
            main_import_max=float(a["main_import_max"]),
            curtail_penalty=float(a.get("curtail_penalty", 0.1)),
            shed_penalty=float(a.get("shed_penalty", 0.2)),
            loss_penalty=float(a.get("loss_penalty", 0.15)),
            reg_om_cost=float(a.get("reg_om_cost", 0.01)),
            cvar_beta=float(cvar.get("beta", 0.95)),
            cvar_up_limit=float(cvar.get("phi_up_kw", 500.0)),
            cvar_down_limit=float(cvar.get("phi_down_kw", 500.0)),
        )
        atc_d = doc.get("atc", {})
        pricing_d = doc.get("pricing", {})
        return CaseConfig(
            time_grid=TimeGrid(int(tg["periods"]), float(tg["step_hours"])),
            adn=adn,
            cies=tuple(_cies_from_dict(c) for c in doc.get("cies", [])),
            sampling=SamplingSpec(**doc.get("scenario_gen", {})),
            atc=AtcParams(
                omega0=float(atc_d.get("omega0", 0.02)),
                chi0=float(atc_d.get("chi0", 1e-4)),
                lam=float(atc_d.get("lambda", 2.5)),
                eps1=float(atc_d.get("eps1", 0.01)),
                eps2=float(atc_d.get("eps2", 0.01)),
                k_max=int(atc_d.get("k_max", 100))),
            pricing=PricingParams(**pricing_d),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, CaseFormatError):
            raise
        raise CaseFormatError(f"malformed case document: {e}") from e


def save_case(case: CaseConfig, path: str | Path):
    Path(path).write_text(json.dumps(case_to_dict(case), indent=1, sort_keys=True))


def load_case(path: str | Path) -> CaseConfig:
    return case_from_dict(json.loads(Path(path).read_text()))


def scenarios_to_dict(ss: ScenarioSet) -> dict:
    return {
        "probabilities": list(ss.probabilities),
        "counts": list(ss.counts),
        "scenarios": [{k: list(v) for k, v in sc.items()} for sc in ss.scenarios],
    }


def scenarios_from_dict(doc: dict) -> ScenarioSet:
    return ScenarioSet(
        scenarios=tuple({k: tuple(v) for k, v in sc.items()}
                        for sc in doc["scenarios"]),
        probabilities=tuple(float(p) for p in doc["probabilities"]),
        counts=tuple(int(c) for c in doc.get("counts", [])),
    )


def save_scenarios(ss: ScenarioSet, path: str | Path):
    Path(path).write_text(json.dumps(scenarios_to_dict(ss), indent=1, sort_keys=True))


def load_scenarios(path: str | Path) -> ScenarioSet:
    return scenarios_from_dict(json.loads(Path(path).read_text()))
