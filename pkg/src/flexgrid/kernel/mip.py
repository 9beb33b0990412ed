"""Best-first branch and bound over continuous conic relaxations.

Branching rule: most-fractional binary, ties broken by lowest variable id.
The search is deterministic: nodes are popped in (bound, insertion order).
Interior-point relaxations leave cost-free binaries anywhere inside their
feasible interval, so before testing integrality each fractional zero-cost
binary is snapped to an integer value when that keeps every row and cone it
touches feasible; snapping never changes the objective.
"""

from __future__ import annotations

import heapq

import numpy as np

from .model import ConicModel
from .solve import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED,
                    DEFAULT_TOL, SolveResult, solve_continuous)

DEFAULT_REL_GAP = 1e-4
DEFAULT_NODE_LIMIT = 1_000_000
INT_TOL = 1e-6


def _gap_slack(incumbent: float, rel_gap: float) -> float:
    return rel_gap * max(1.0, abs(incumbent))


def _snap(c, x: np.ndarray, free: np.ndarray, tol: float, q: np.ndarray,
          rhs_patch: dict[int, float] | None) -> np.ndarray:
    """Round cost-free fractional binaries in place where rows permit."""
    lin_adj, cone_adj = c.var_rows()
    rhs_patch = rhs_patch or {}
    x = x.copy()
    for vid in free:
        v = x[vid]
        if min(v, 1.0 - v) <= INT_TOL:
            x[vid] = round(v)
            continue
        if q[vid] != 0.0:
            continue
        for cand in (round(v), 1.0 - round(v)):
            x[vid] = cand
            ok = all(c.row_ok(i, x, tol, rhs=rhs_patch.get(i))
                     for i in lin_adj[vid]) and \
                all(c.cone_ok(k, x, tol) for k in cone_adj[vid])
            if ok:
                break
            x[vid] = v
    return x


def solve_mixed(model: ConicModel, rel_gap: float = DEFAULT_REL_GAP,
                node_limit: int = DEFAULT_NODE_LIMIT, tol: float = DEFAULT_TOL,
                lb: np.ndarray | None = None, ub: np.ndarray | None = None,
                obj_patch: dict[int, float] | None = None,
                rhs_patch: dict[int, float] | None = None,
                ) -> SolveResult:
    """Solve to a proven relative gap, or return the flagged incumbent.

    ``lb``/``ub`` override declared bounds (callers may pre-fix binaries);
    ``obj_patch``/``rhs_patch`` are forwarded to every relaxation solve.
    Result extras: ``nodes`` explored, ``bound`` (best proven lower bound),
    ``gap`` (incumbent vs bound, relative), ``gap_proven`` (False when the
    node limit cut the search short).
    """
    c = model.compiled()
    lb0 = c.lb.copy() if lb is None else np.asarray(lb, dtype=float).copy()
    ub0 = c.ub.copy() if ub is None else np.asarray(ub, dtype=float).copy()
    bins = [v for v in c.binaries if lb0[v] != ub0[v]]
    q_eff, _, _ = c.patched(obj_patch, None)

    root = solve_continuous(model, tol=tol, lb=lb0, ub=ub0,
                            obj_patch=obj_patch, rhs_patch=rhs_patch)
    if not root.optimal:
        return root
    root_bound = root.objective

    incumbent: SolveResult | None = None
    inc_obj = np.inf
    # (bound, -depth, counter): best bound first, deepest first on ties so
    # equal-bound zero-cost branching dives to incumbents instead of sweeping
    heap: list[tuple[float, int, int, dict[int, float]]] = []
    counter = 0
    nodes = 0
    pending = (root, {})

    while True:
        if pending is not None:
            res, fixes = pending
            pending = None
        else:
            if not heap:
                break
            bound_est, _, _, fixes = heapq.heappop(heap)
            if bound_est >= inc_obj - _gap_slack(inc_obj, rel_gap):
                continue
            if nodes >= node_limit:
                break
            nlb, nub = lb0.copy(), ub0.copy()
            for vid, val in fixes.items():
                nlb[vid] = nub[vid] = val
            res = solve_continuous(model, tol=tol, lb=nlb, ub=nub,
                                   obj_patch=obj_patch, rhs_patch=rhs_patch)
            nodes += 1
            if res.status == INFEASIBLE:
                continue
            if res.status == UNBOUNDED:
                return SolveResult(UNBOUNDED, float("nan"), None)
            if res.status != OPTIMAL:
                continue  # numerically failed node: drop, bound stays valid via heap

        if res.objective >= inc_obj - _gap_slack(inc_obj, rel_gap):
            continue
        free = np.array([v for v in bins if v not in fixes], dtype=np.int64)
        x = _snap(c, res.x, free, tol, q_eff, rhs_patch) if len(free) else res.x
        frac = np.abs(x[free] - np.round(x[free])) if len(free) else np.empty(0)
        if not len(free) or np.max(frac) <= INT_TOL:
            xr = x.copy()
            if len(free):
                xr[free] = np.round(xr[free])
            obj = float(q_eff @ xr + c.obj_const)
            if obj < inc_obj:
                inc_obj = obj
                incumbent = SolveResult(OPTIMAL, obj, xr,
                                        max_residual=res.max_residual,
                                        iterations=res.iterations)
            continue
        # branch: most fractional, ties by lowest variable id
        dist = np.minimum(x[free], 1.0 - x[free])
        pick = int(free[int(np.argmax(dist))])
        for val in (round(x[pick]), 1.0 - round(x[pick])):
            child = dict(fixes)
            child[pick] = float(val)
            counter += 1
            heapq.heappush(heap, (res.objective, -len(child), counter, child))

    exhausted = bool(heap) and nodes >= node_limit
    lower = min([root_bound] + [h[0] for h in heap]) if heap else (
        inc_obj if incumbent is not None else root_bound)
    if incumbent is None:
        if exhausted:
            return SolveResult(ITERATION_LIMIT, float("nan"), None,
                               extra={"nodes": nodes, "bound": lower,
                                      "gap_proven": False})
        return SolveResult(INFEASIBLE, float("nan"), None,
                           extra={"nodes": nodes})

    if root_bound > inc_obj + 10.0 * tol * max(1.0, abs(inc_obj)):
        raise RuntimeError(
            f"relaxation bound {root_bound} above incumbent {inc_obj}")

    gap = (inc_obj - lower) / max(1.0, abs(inc_obj))
    incumbent.status = OPTIMAL if not exhausted else ITERATION_LIMIT
    incumbent.extra.update({
        "nodes": nodes,
        "bound": lower,
        "root_bound": root_bound,
        "gap": max(gap, 0.0),
        "gap_proven": not exhausted,
    })
    return incumbent
