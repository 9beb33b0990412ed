"""Debug dump of a ConicModel to LP-style text.

Linear parts use the CPLEX LP grammar so external solvers can cross-check;
second-order cones have no LP encoding and are emitted as comment lines.
"""

from __future__ import annotations

from .model import EQ, GE, LE, ConicModel

_SENSE_TXT = {LE: "<=", GE: ">=", EQ: "="}


def _term(coef: float, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    return f" {sign} {abs(coef):.12g} {name}".rstrip()


def write_lp(model: ConicModel, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"\\ model {model.name}\n")
        fh.write("Minimize\n obj:")
        first = True
        for vid in range(model.num_vars):
            c = model._obj.get(vid, 0.0)
            if c:
                fh.write(_term(c, model.var_name(vid), first))
                first = False
        if model.obj_const:
            fh.write(_term(model.obj_const, "", first).rstrip())
        fh.write("\nSubject To\n")
        for i in range(model.num_rows):
            name = model._rows_name[i] or f"c{i}"
            fh.write(f" {name}:")
            ids = model._rows_ids[i]
            coefs = model._rows_coefs[i]
            for k, (vid, c) in enumerate(zip(ids, coefs)):
                fh.write(_term(c, model.var_name(int(vid)), k == 0))
            fh.write(f" {_SENSE_TXT[model._rows_sense[i]]} {model._rows_rhs[i]:.12g}\n")
        for k in range(model.num_cones):
            exprs = model._cones[k]
            parts = []
            for ids, coefs, const in exprs:
                txt = " + ".join(f"{c:.12g} {model.var_name(int(v))}"
                                 for v, c in zip(ids, coefs))
                if const or not txt:
                    txt = (txt + f" + {const:.12g}") if txt else f"{const:.12g}"
                parts.append(txt)
            fh.write(f"\\ soc{k}: ||(" + "; ".join(parts[1:]) + f")|| <= {parts[0]}\n")
        fh.write("Bounds\n")
        lb, ub = model.lower_bounds(), model.upper_bounds()
        for vid in range(model.num_vars):
            lo = f"{lb[vid]:.12g}" if lb[vid] != float("-inf") else "-inf"
            hi = f"{ub[vid]:.12g}" if ub[vid] != float("inf") else "+inf"
            fh.write(f" {lo} <= {model.var_name(vid)} <= {hi}\n")
        if model.binaries:
            fh.write("Binaries\n")
            for vid in model.binaries:
                fh.write(f" {model.var_name(vid)}\n")
        fh.write("End\n")
