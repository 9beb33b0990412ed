"""Run artifacts and plot-data emission.

A dispatch run writes machine-readable JSON artifacts into its run
directory; ``emit_report`` turns them into flat CSV files (one per figure
family) plus a plain-text summary table.  All CSV output is UTF-8, comma
separated, ``.`` decimal, one header row; floats are written with
``repr``-stable formatting so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .core.types import FLEX_RESOURCES, FasPriceCurve, FlexEnvelope

PROBE_PERIODS = (2, 20)   # tie-line iteration traces at 02:00 and 20:00


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list]):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def envelope_csv(env: FlexEnvelope, path: Path):
    header = ["t", "max_supply_kw", "min_supply_kw"]
    for r in FLEX_RESOURCES:
        header += [f"margin_up_{r}_kw", f"margin_down_{r}_kw"]
    header += ["margin_up_total_kw", "margin_down_total_kw"]
    rows = []
    for t in range(len(env.max_supply)):
        row = [t, env.max_supply[t], env.min_supply[t]]
        for r in FLEX_RESOURCES:
            row += [env.margin_up[r][t], env.margin_down[r][t]]
        row += [env.aggregate_up[t], env.aggregate_down[t]]
        rows.append(row)
    write_csv(path, header, rows)


def price_csv(curve: FasPriceCurve, path: Path):
    rows = [[t, curve.margins[t], curve.prices[t]]
            for t in range(len(curve.prices))]
    write_csv(path, ["t", "margin_up_kw", "fas_price"], rows)


def envelope_to_dict(env: FlexEnvelope) -> dict:
    return {
        "cies": env.cies_name,
        "max_supply": list(env.max_supply),
        "min_supply": list(env.min_supply),
        "margin_up": {r: list(v) for r, v in env.margin_up.items()},
        "margin_down": {r: list(v) for r, v in env.margin_down.items()},
        "aggregate_up": list(env.aggregate_up),
        "aggregate_down": list(env.aggregate_down),
        "diagnostics": list(env.diagnostics),
    }


def curve_to_dict(curve: FasPriceCurve) -> dict:
    return {"cies": curve.cies_name, "prices": list(curve.prices),
            "adjustment_cost": curve.adjustment_cost,
            "price_cap": curve.price_cap, "margins": list(curve.margins),
            "degenerate": curve.degenerate}


def cies_solution_to_dict(sol) -> dict:
    return {
        "cies": sol.cies_name,
        "objective": sol.objective,
        "cost_total": sol.cost_total,
        "costs": sol.costs,
        "buy": np.asarray(sol.buy).tolist(),
        "sell": np.asarray(sol.sell).tolist(),
        "expected_tie": np.asarray(sol.expected_tie).tolist(),
        "mt_power": np.asarray(sol.mt_power).tolist(),
        "mt_on": list(sol.mt_on),
        "tse_shift": np.asarray(sol.tse_shift).tolist(),
        "curtail": np.asarray(sol.curtail).tolist(),
        "shed": np.asarray(sol.shed).tolist(),
        "cvar_ren": np.asarray(sol.cvar_ren).tolist(),
        "cvar_load": np.asarray(sol.cvar_load).tolist(),
        "coupling_in": {k: np.asarray(v).tolist()
                        for k, v in sol.coupling_in.items()},
        "storage_soc": {k: np.asarray(v).tolist()
                        for k, v in sol.storage_soc.items()},
        "solver": sol.solver,
    }


def adn_solution_to_dict(sol) -> dict:
    return {
        "objective": sol.objective,
        "cost_total": sol.cost_total,
        "costs": sol.costs,
        "buy": {k: np.asarray(v).tolist() for k, v in sol.buy.items()},
        "sell": {k: np.asarray(v).tolist() for k, v in sol.sell.items()},
        "expected_tie": {k: np.asarray(v).tolist()
                         for k, v in sol.expected_tie.items()},
        "mt_power": np.asarray(sol.mt_power).tolist(),
        "mt_on": list(sol.mt_on),
        "main": np.asarray(sol.main).tolist(),
        "curtail": np.asarray(sol.curtail).tolist(),
        "shed": np.asarray(sol.shed).tolist(),
        "cvar_ren": np.asarray(sol.cvar_ren).tolist(),
        "cvar_load": np.asarray(sol.cvar_load).tolist(),
        "cone_residual_max": sol.cone_residual_max,
        "cone_residual_mean": sol.cone_residual_mean,
        "relaxation_exact": sol.relaxation_exact,
        "solver": sol.solver,
    }


def trace_to_dict(trace) -> list[dict]:
    out = []
    for it in trace:
        out.append({
            "k": it.k,
            "max_gap": it.max_gap,
            "cost_adn": it.cost_adn,
            "cost_cies": it.cost_cies,
            "cost_total": it.cost_total,
            "rel_cost_change": it.rel_cost_change,
            "f_adn": {n: np.asarray(v).tolist() for n, v in it.f_adn.items()},
            "f_cies": {n: np.asarray(v).tolist() for n, v in it.f_cies.items()},
            "gap": {n: np.asarray(v).tolist() for n, v in it.gap.items()},
            "omega": {n: np.asarray(v).tolist() for n, v in it.omega.items()},
            "chi": {n: np.asarray(v).tolist() for n, v in it.chi.items()},
            "converged": it.converged,
        })
    return out


def insufficient_flexibility(adn_sol, cies_sols, probabilities) -> float:
    """Expected curtailment plus shedding over all parties, kW."""
    p = np.asarray(probabilities, dtype=float)
    total = float((p @ adn_sol.curtail).sum() + (p @ adn_sol.shed).sum())
    for sol in cies_sols.values():
        total += float((p @ sol.curtail).sum() + (p @ sol.shed).sum())
    return total


def write_manifest(out_dir: Path, case_path: Path, seed, mode: str,
                   extra: dict | None = None):
    from importlib.metadata import version
    try:
        ver = version("flexgrid")
    except Exception:
        ver = "unknown"
    digest = hashlib.sha256(Path(case_path).read_bytes()).hexdigest()
    doc = {"case_file": str(case_path), "case_sha256": digest,
           "seed": seed, "mode": mode, "package_version": ver}
    if extra:
        doc.update(extra)
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=1,
                                                      sort_keys=True))


SUMMARY_COLUMNS = ["mode", "cost_adn", "cost_mcies", "cost_total",
                   "insufficient_flexibility_kw", "wall_time_s"]


def summary_line(mode: str, cost_adn: float, cost_mcies: float,
                 total: float, insuff: float, wall: float) -> dict:
    return {"mode": mode, "cost_adn": cost_adn, "cost_mcies": cost_mcies,
            "cost_total": total, "insufficient_flexibility_kw": insuff,
            "wall_time_s": wall}


def write_summary_text(path: Path, lines: list[dict]):
    widths = [12, 12, 12, 12, 28, 12]
    header = "".join(c.ljust(w) for c, w in zip(SUMMARY_COLUMNS, widths))
    out = [header, "-" * len(header)]
    for ln in lines:
        out.append("".join(
            (f"{ln[c]:.2f}" if isinstance(ln[c], float) else str(ln[c])).ljust(w)
            for c, w in zip(SUMMARY_COLUMNS, widths)))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def emit_report(run_dir: Path, out_dir: Path | None = None) -> list[str]:
    """Emit plot-data CSVs from a finished run directory.

    Returns the list of missing artifacts (empty when the bundle is
    complete); present artifacts are always emitted.
    """
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    missing = []

    def load(name):
        p = run_dir / name
        if not p.exists():
            missing.append(name)
            return None
        return json.loads(p.read_text())

    envelopes = load("envelopes.json")
    if envelopes:
        for env in envelopes:
            name = env["cies"]
            header = ["t", "max_supply_kw", "min_supply_kw"]
            for r in FLEX_RESOURCES:
                header += [f"margin_up_{r}_kw", f"margin_down_{r}_kw"]
            header += ["margin_up_total_kw", "margin_down_total_kw"]
            rows = []
            for t in range(len(env["max_supply"])):
                row = [t, env["max_supply"][t], env["min_supply"][t]]
                for r in FLEX_RESOURCES:
                    row += [env["margin_up"][r][t], env["margin_down"][r][t]]
                row += [env["aggregate_up"][t], env["aggregate_down"][t]]
                rows.append(row)
            write_csv(out_dir / f"envelope_{name}.csv", header, rows)

    prices = load("prices.json")
    if prices:
        for cur in prices:
            rows = [[t, cur["margins"][t], cur["prices"][t]]
                    for t in range(len(cur["prices"]))]
            write_csv(out_dir / f"fas_price_{cur['cies']}.csv",
                      ["t", "margin_up_kw", "fas_price"], rows)

    solution = load("solution.json")
    if solution:
        for name, sol in solution.get("cies", {}).items():
            S = len(sol["buy"])
            T = len(sol["buy"][0])
            coupling = sorted(sol.get("coupling_in", {}))
            storage = sorted(sol.get("storage_soc", {}))
            header = ["t", "s", "mt_kw"]
            header += [f"{k}_in_kw" for k in coupling]
            header += [f"{k}_soc_kwh" for k in storage]
            header += ["buy_kw", "sell_kw", "curtail_kw", "shed_kw"]
            rows = []
            for s in range(S):
                for t in range(T):
                    row = [t, s, sol["mt_power"][s][t]]
                    row += [sol["coupling_in"][k][s][t] for k in coupling]
                    row += [sol["storage_soc"][k][s][t] for k in storage]
                    row += [sol["buy"][s][t], sol["sell"][s][t],
                            sol["curtail"][s][t], sol["shed"][s][t]]
                    rows.append(row)
            write_csv(out_dir / f"dispatch_{name}.csv", header, rows)
            rows = [[t, sol["cvar_ren"][t], sol["cvar_load"][t]]
                    for t in range(T)]
            write_csv(out_dir / f"cvar_{name}.csv",
                      ["t", "cvar_curtailment_kw", "cvar_shedding_kw"], rows)
        adn = solution.get("adn")
        if adn:
            T = len(adn["mt_power"][0])
            S = len(adn["mt_power"])
            rows = []
            for s in range(S):
                for t in range(T):
                    rows.append([t, s, adn["mt_power"][s][t],
                                 adn["main"][s][t], adn["curtail"][s][t],
                                 adn["shed"][s][t]])
            write_csv(out_dir / "dispatch_adn.csv",
                      ["t", "s", "mt_kw", "main_import_kw", "curtail_kw",
                       "shed_kw"], rows)
            rows = [[t, adn["cvar_ren"][t], adn["cvar_load"][t]]
                    for t in range(T)]
            write_csv(out_dir / "cvar_adn.csv",
                      ["t", "cvar_curtailment_kw", "cvar_shedding_kw"], rows)

    trace = load("trace.json")
    if trace:
        rows = [[it["k"], it["max_gap"], it["cost_adn"],
                 sum(it["cost_cies"].values()), it["cost_total"],
                 it["rel_cost_change"] if it["rel_cost_change"] is not None
                 else ""] for it in trace]
        write_csv(out_dir / "atc_gap.csv",
                  ["k", "max_gap_kw", "cost_adn", "cost_mcies", "cost_total",
                   "rel_cost_change"], rows)
        names = sorted(trace[0]["f_adn"])
        horizon = len(trace[0]["f_adn"][names[0]])
        for t in (p for p in PROBE_PERIODS if p < horizon):
            rows = []
            for it in trace:
                row = [it["k"]]
                for n in names:
                    row += [it["f_adn"][n][t], it["f_cies"][n][t]]
                rows.append(row)
            header = ["k"]
            for n in names:
                header += [f"adn_{n}_kw", f"cies_{n}_kw"]
            write_csv(out_dir / f"tie_trace_t{t:02d}.csv", header, rows)

    summary = load("summary.json")
    if summary:
        write_summary_text(out_dir / "summary.txt", summary)

    return missing
