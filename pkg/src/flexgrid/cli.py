"""Command-line entry points.

    flexgrid evaluate-flex --case case.json --out runs/flex
    flexgrid gen-scenarios --case case.json --seed 7 --out runs/s
    flexgrid dispatch --case case.json --mode mode4 --out runs/m4
    flexgrid report --run runs/m4

Exit codes: 0 success, 1 invalid input, 2 infeasible model,
3 non-convergence.  All randomness flows through --seed; a dispatch run
stores its scenario set so downstream steps never re-sample.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import reporting
from .atc import run_atc, solve_centralized
from .core import (bundled_case_69, load_case, load_scenarios, save_case,
                   save_scenarios, validate_case, validate_scenarios)
from .core.io import CaseFormatError
from .dispatch.cies import DispatchInfeasible
from .flex.envelope import margins
from .flex.predispatch import PredispatchInfeasible, solve_predispatch
from .pricing import cies_prices
from .scenarios import generate_scenarios

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_NONCONVERGED = 3

MODES = ("mode1", "mode2", "mode4", "centralized")


def _load_valid_case(path: str):
    case = load_case(path)
    report = validate_case(case)
    if not report.ok:
        raise CaseFormatError(f"case validation failed:\n{report}")
    return case


def _apply_atc_overrides(case, args):
    changes = {}
    if getattr(args, "atc_lambda", None) is not None:
        changes["lam"] = args.atc_lambda
    if getattr(args, "eps1", None) is not None:
        changes["eps1"] = args.eps1
    if getattr(args, "eps2", None) is not None:
        changes["eps2"] = args.eps2
    if changes:
        case = dataclasses.replace(
            case, atc=dataclasses.replace(case.atc, **changes))
    return case


def _flex_artifacts(case):
    """Pre-dispatch, envelope and price curve per community."""
    envelopes, curves = {}, {}
    for c in case.cies:
        pre = solve_predispatch(c, case.time_grid)
        env = margins(c, pre, case.time_grid)
        envelopes[c.name] = env
        curves[c.name] = cies_prices(c, env, case.pricing, case.adn.tou_price)
    return envelopes, curves


def cmd_evaluate_flex(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    case = _load_valid_case(args.case)
    envelopes, curves = _flex_artifacts(case)
    for name, env in envelopes.items():
        reporting.envelope_csv(env, out / f"envelope_{name}.csv")
        reporting.price_csv(curves[name], out / f"fas_price_{name}.csv")
    (out / "envelopes.json").write_text(json.dumps(
        [reporting.envelope_to_dict(envelopes[n]) for n in sorted(envelopes)],
        indent=1))
    (out / "prices.json").write_text(json.dumps(
        [reporting.curve_to_dict(curves[n]) for n in sorted(curves)],
        indent=1))
    reporting.write_manifest(out, Path(args.case), args.seed, "evaluate-flex")
    print(f"wrote {2 * len(envelopes)} envelope/price files to {out}")
    return EXIT_OK


def cmd_gen_scenarios(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    case = _load_valid_case(args.case)
    ss = generate_scenarios(case, seed=args.seed)
    save_scenarios(ss, out / "scenarios.json")
    reporting.write_manifest(out, Path(args.case), args.seed, "gen-scenarios")
    print("scenario probabilities:")
    for i, (p, n) in enumerate(zip(ss.probabilities, ss.counts)):
        print(f"  s{i}: p={p:.4f} ({n} samples)")
    print(f"wrote {out / 'scenarios.json'}")
    return EXIT_OK


def _scenarios_for(case, args):
    if getattr(args, "scenarios", None):
        ss = load_scenarios(args.scenarios)
        report = validate_scenarios(ss, case)
        if not report.ok:
            raise CaseFormatError(f"scenario validation failed:\n{report}")
        return ss
    return generate_scenarios(case, seed=args.seed)


def cmd_dispatch(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    case = _load_valid_case(args.case)
    case = _apply_atc_overrides(case, args)
    ss = _scenarios_for(case, args)
    save_scenarios(ss, out / "scenarios.json")
    tou = case.adn.tou_price

    t0 = time.time()
    envelopes, curves = {}, {}
    if args.mode == "mode1":
        prices = {c.name: tou for c in case.cies}
    else:
        envelopes, curves = _flex_artifacts(case)
        prices = curves
    phi = 1e9 if args.mode == "mode2" else None

    probs = np.asarray(ss.probabilities)
    summary = []
    artifacts = {}
    nonconverged = False
    if args.mode == "centralized":
        cent = solve_centralized(case, ss, prices, phi_override=phi)
        insuff = reporting.insufficient_flexibility(cent.adn, cent.cies, probs)
        summary.append(reporting.summary_line(
            "centralized", cent.cost_adn, sum(cent.cost_cies.values()),
            cent.total_cost, insuff, time.time() - t0))
        artifacts["solution"] = {
            "adn": reporting.adn_solution_to_dict(cent.adn),
            "cies": {n: reporting.cies_solution_to_dict(s)
                     for n, s in cent.cies.items()}}
    else:
        run = run_atc(case, ss, prices, phi_override=phi)
        insuff = reporting.insufficient_flexibility(run.adn, run.cies, probs)
        summary.append(reporting.summary_line(
            args.mode, run.adn.cost_total,
            sum(c.cost_total for c in run.cies.values()),
            run.total_cost, insuff, time.time() - t0))
        artifacts["solution"] = {
            "adn": reporting.adn_solution_to_dict(run.adn),
            "cies": {n: reporting.cies_solution_to_dict(s)
                     for n, s in run.cies.items()}}
        artifacts["trace"] = reporting.trace_to_dict(run.trace)
        artifacts["rules"] = {n: r.tolist()
                              for n, r in run.interaction_rules.items()}
        nonconverged = not run.converged

    if envelopes:
        artifacts["envelopes"] = [reporting.envelope_to_dict(envelopes[n])
                                  for n in sorted(envelopes)]
        artifacts["prices"] = [reporting.curve_to_dict(curves[n])
                               for n in sorted(curves)]
    for name, doc in artifacts.items():
        (out / f"{name}.json").write_text(json.dumps(doc, indent=1))
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    reporting.write_manifest(out, Path(args.case), args.seed, args.mode)
    line = summary[0]
    print(f"{args.mode}: total={line['cost_total']:.2f} "
          f"adn={line['cost_adn']:.2f} mcies={line['cost_mcies']:.2f} "
          f"insufficient={line['insufficient_flexibility_kw']:.2f} kW "
          f"({line['wall_time_s']:.1f}s)")
    if nonconverged:
        print("warning: coordination did not converge within k_max",
              file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        print(f"no run directory {run_dir}", file=sys.stderr)
        return EXIT_INVALID
    missing = reporting.emit_report(run_dir, args.out)
    if missing:
        print("missing artifacts (partial bundle emitted): "
              + ", ".join(missing), file=sys.stderr)
    print(f"report written to {args.out or run_dir}")
    return EXIT_OK


def cmd_init_case(args) -> int:
    save_case(bundled_case_69(), args.out)
    print(f"wrote bundled 69-node case to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="flexgrid",
        description="Hierarchical dispatch with community flexibility services")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--case", required=True, help="case file (JSON)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=out_default, help="output directory")

    sp = sub.add_parser("evaluate-flex",
                        help="pre-dispatch, envelopes and price curves")
    common(sp, "flexgrid-flex")
    sp.set_defaults(func=cmd_evaluate_flex)

    sp = sub.add_parser("gen-scenarios", help="sample and reduce scenarios")
    common(sp, "flexgrid-scenarios")
    sp.set_defaults(func=cmd_gen_scenarios)

    sp = sub.add_parser("dispatch", help="run one dispatch mode")
    common(sp, "flexgrid-run")
    sp.add_argument("--mode", choices=MODES, default="mode4")
    sp.add_argument("--scenarios", help="reuse a scenario file")
    sp.add_argument("--atc-lambda", type=float, dest="atc_lambda")
    sp.add_argument("--eps1", type=float)
    sp.add_argument("--eps2", type=float)
    sp.set_defaults(func=cmd_dispatch)

    sp = sub.add_parser("report", help="emit plot-data CSVs from a run")
    sp.add_argument("--run", required=True, help="run directory")
    sp.add_argument("--out", help="output directory (default: run dir)")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("init-case", help="write the bundled 69-node case")
    sp.add_argument("--out", default="case69.json")
    sp.set_defaults(func=cmd_init_case)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CaseFormatError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (DispatchInfeasible, PredispatchInfeasible) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
