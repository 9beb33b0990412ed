"""Solve strategy for the scenario dispatch models.

The dispatch models carry two binary families: trade-direction indicators
and unit-commitment states.  Both are cost-free in the objective, which
makes plain branch and bound prove bounds very slowly (fixing such a binary
rarely moves the relaxation).  The fast path therefore resolves them in two
deterministic rounds:

1. directions from the relaxed net trade (a de-churned witness point keeps
   the fixed model feasible);
2. commitment from the relaxed outputs, repaired to honor minimum up/down
   times, raced against the always-on pattern; the better feasible
   candidate wins.

The result is a feasible integer point whose optimality gap against the
direction-fixed relaxation is reported, not proven closed.  ``method="exact"``
runs the kernel's branch and bound instead (practical for small models).
"""

from __future__ import annotations

import numpy as np

from ..kernel import ConicModel, solve_continuous, solve_mixed
from ..kernel.solve import OPTIMAL, SolveResult


def repair_commitment(on: np.ndarray, min_up: int, min_down: int) -> np.ndarray:
    """Smallest 'more-on' pattern honoring minimum run lengths.

    Interior off-runs shorter than ``min_down`` are filled, then interior
    on-runs shorter than ``min_up`` are extended forward.  Runs touching the
    horizon ends are exempt, matching the clipped constraint windows.
    """
    on = np.asarray(on, dtype=bool).copy()
    T = len(on)
    for _ in range(T):
        changed = False
        runs = _runs(on)
        for val, a, b in runs:  # [a, b)
            if not val and a > 0 and b < T and (b - a) < min_down:
                on[a:b] = True
                changed = True
                break
        if changed:
            continue
        for val, a, b in _runs(on):
            if val and a > 0 and b < T and (b - a) < min_up:
                on[b:min(b + (min_up - (b - a)), T)] = True
                changed = True
                break
        if not changed:
            break
    return on


def _runs(mask: np.ndarray):
    runs = []
    start = 0
    for i in range(1, len(mask) + 1):
        if i == len(mask) or mask[i] != mask[start]:
            runs.append((bool(mask[start]), start, i))
            start = i
    return runs


def commitment_from_relaxation(p_relaxed: np.ndarray, on_relaxed: np.ndarray,
                               p_min: float, min_up: int, min_down: int
                               ) -> np.ndarray:
    """Candidate on/off pattern from relaxed outputs and indicator levels."""
    p_max_over_s = np.max(p_relaxed, axis=0)
    on = (p_max_over_s >= 0.5 * max(p_min, 1e-9)) | (on_relaxed >= 0.5)
    return repair_commitment(on, min_up, min_down)


def solve_two_round(model: ConicModel, on_vars: list[np.ndarray],
                    p_vars: list[np.ndarray], p_mins: list[float],
                    min_ups: list[int], min_downs: list[int],
                    fix_directions, method: str = "fast",
                    rel_gap: float = 1e-3, node_limit: int = 1500,
                    obj_patch: dict[int, float] | None = None,
                    rhs_patch: dict[int, float] | None = None) -> SolveResult:
    """Direction round, then commitment round; see module docstring.

    ``on_vars[i]``/``p_vars[i]`` are the commitment ids (T,) and output ids
    (S, T) of unit i.  ``fix_directions(lb, ub, relaxed_x)`` pins the trade
    indicators in place and returns the bounds.
    """
    relax = solve_continuous(model, obj_patch=obj_patch, rhs_patch=rhs_patch)
    if not relax.optimal:
        return relax
    lb = model.lower_bounds()
    ub = model.upper_bounds()
    lb, ub = fix_directions(lb, ub, relax.x)

    if method == "exact":
        return solve_mixed(model, rel_gap=rel_gap, node_limit=node_limit,
                           lb=lb, ub=ub, obj_patch=obj_patch,
                           rhs_patch=rhs_patch)

    fixed_relax = solve_continuous(model, lb=lb, ub=ub, obj_patch=obj_patch,
                                   rhs_patch=rhs_patch)
    if not fixed_relax.optimal:
        return fixed_relax
    bound = fixed_relax.objective

    candidates = []
    pattern = []
    for i, on_ids in enumerate(on_vars):
        pattern.append(commitment_from_relaxation(
            fixed_relax.x[p_vars[i]], fixed_relax.x[on_ids],
            p_mins[i], min_ups[i], min_downs[i]))
    candidates.append(pattern)
    candidates.append([np.ones(len(v), dtype=bool) for v in on_vars])

    best: SolveResult | None = None
    for cand in candidates:
        clb, cub = lb.copy(), ub.copy()
        for on_ids, mask in zip(on_vars, cand):
            vals = mask.astype(float)
            clb[on_ids] = vals
            cub[on_ids] = vals
        r = solve_continuous(model, lb=clb, ub=cub, obj_patch=obj_patch,
                             rhs_patch=rhs_patch)
        if r.optimal and (best is None or r.objective < best.objective):
            best = r
    if best is None:
        # repaired patterns infeasible: fall back to branch and bound
        return solve_mixed(model, rel_gap=rel_gap, node_limit=node_limit,
                           lb=lb, ub=ub, obj_patch=obj_patch,
                           rhs_patch=rhs_patch)
    gap = (best.objective - bound) / max(1.0, abs(best.objective))
    best.extra.update({"heuristic": True, "bound": bound,
                       "gap": max(gap, 0.0), "gap_proven": False,
                       "nodes": 0})
    best.status = OPTIMAL
    return best
