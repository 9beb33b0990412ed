"""Conic model container: variables, linear rows, second-order cones, linear objective.

The model is a plain data structure shared by all model builders and both
solver entry points.  It is mutable while being built and immutable once
sealed; solvers never modify it (per-node bound changes in branch and bound
are passed as overrides).
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

INF = float("inf")

LE = "<="
GE = ">="
EQ = "="

_SENSES = (LE, GE, EQ)


class ModelError(ValueError):
    """Raised for malformed model construction (bad ids, senses, bounds)."""


class ConicModel:
    """Linear/second-order-cone model with optional binary variables.

    Linear rows are stored as (ids, coefs, sense, rhs).  A cone constraint
    states ``||(e_1, ..., e_k)||_2 <= e_0`` where every ``e_i`` is affine in
    the variables, given as ``(ids, coefs, const)``.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._vnames: list[str] = []
        self._binary: list[int] = []
        self._obj: dict[int, float] = {}
        self.obj_const: float = 0.0
        # linear rows: parallel lists
        self._rows_ids: list[np.ndarray] = []
        self._rows_coefs: list[np.ndarray] = []
        self._rows_sense: list[str] = []
        self._rows_rhs: list[float] = []
        self._rows_name: list[str] = []
        # cones: list of (exprs,) where exprs[0] is the bound e_0
        self._cones: list[list[tuple[np.ndarray, np.ndarray, float]]] = []
        self._sealed = False
        self._compiled = None

    # -- construction -----------------------------------------------------

    def _check_open(self):
        if self._sealed:
            raise ModelError("model is sealed")

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF,
                binary: bool = False, obj: float = 0.0) -> int:
        self._check_open()
        if lb > ub:
            raise ModelError(f"variable {name}: lb {lb} > ub {ub}")
        if binary and not (lb >= 0.0 and ub <= 1.0):
            raise ModelError(f"binary variable {name} must have bounds within [0, 1]")
        vid = len(self._lb)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._vnames.append(name)
        if binary:
            self._binary.append(vid)
        if obj:
            self._obj[vid] = self._obj.get(vid, 0.0) + float(obj)
        return vid

    def add_vars(self, name: str, n: int, lb: float = 0.0, ub: float = INF,
                 binary: bool = False, obj: float = 0.0) -> list[int]:
        return [self.add_var(f"{name}[{i}]", lb, ub, binary, obj) for i in range(n)]

    def add_obj(self, vid: int, coef: float):
        self._check_open()
        self._obj[vid] = self._obj.get(vid, 0.0) + float(coef)

    def add_linear(self, terms, sense: str, rhs: float, name: str = "") -> int:
        """Add a row  sum(coef * x_id)  <sense>  rhs."""
        self._check_open()
        if sense not in _SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        ids, coefs = self._pack_terms(terms)
        self._rows_ids.append(ids)
        self._rows_coefs.append(coefs)
        self._rows_sense.append(sense)
        self._rows_rhs.append(float(rhs))
        self._rows_name.append(name)
        return len(self._rows_rhs) - 1

    def extend_row(self, row: int, terms) -> None:
        """Append terms to an existing linear row (model still open)."""
        self._check_open()
        ids, coefs = self._pack_terms(terms)
        self._rows_ids[row] = np.concatenate([self._rows_ids[row], ids])
        self._rows_coefs[row] = np.concatenate([self._rows_coefs[row], coefs])

    def add_soc(self, bound, parts, name: str = "") -> int:
        """Add  ||(e_1..e_k)||_2 <= e_0.

        ``bound`` is the affine e_0, ``parts`` the list e_1..e_k; each given
        as (terms, const) with terms an iterable of (var_id, coef).
        """
        self._check_open()
        exprs = [self._pack_affine(bound)]
        for p in parts:
            exprs.append(self._pack_affine(p))
        if len(exprs) < 2:
            raise ModelError("cone needs at least one norm component")
        self._cones.append(exprs)
        return len(self._cones) - 1

    def _pack_terms(self, terms):
        ids, coefs = [], []
        n = len(self._lb)
        for vid, c in terms:
            if not 0 <= vid < n:
                raise ModelError(f"undeclared variable id {vid}")
            if c != 0.0:
                ids.append(vid)
                coefs.append(float(c))
        return np.asarray(ids, dtype=np.int64), np.asarray(coefs, dtype=np.float64)

    def _pack_affine(self, expr):
        terms, const = expr
        ids, coefs = self._pack_terms(terms)
        return ids, coefs, float(const)

    def seal(self):
        self._sealed = True
        return self

    # -- introspection -----------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self._lb)

    @property
    def num_rows(self) -> int:
        return len(self._rows_rhs)

    @property
    def num_cones(self) -> int:
        return len(self._cones)

    @property
    def binaries(self) -> tuple[int, ...]:
        return tuple(self._binary)

    def var_name(self, vid: int) -> str:
        return self._vnames[vid]

    def lower_bounds(self) -> np.ndarray:
        return np.asarray(self._lb, dtype=np.float64)

    def upper_bounds(self) -> np.ndarray:
        return np.asarray(self._ub, dtype=np.float64)

    def objective_vector(self) -> np.ndarray:
        q = np.zeros(self.num_vars)
        for vid, c in self._obj.items():
            q[vid] = c
        return q

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective_vector() @ x + self.obj_const)

    # -- compiled form ------------------------------------------------------

    def compiled(self) -> "CompiledModel":
        """Sparse matrices plus adjacency, cached; seals the model."""
        if self._compiled is None:
            self._sealed = True
            self._compiled = CompiledModel(self)
        return self._compiled


class CompiledModel:
    """CSC blocks of a sealed ConicModel, in the geometry Clarabel wants.

    Row blocks: equalities, inequalities (as <=), cone rows (e_0 first, then
    parts, per cone).  Variable bounds are not materialized here; solvers
    append them per call so branch-and-bound can override them cheaply.
    """

    def __init__(self, model: ConicModel):
        self.model = model
        n = model.num_vars
        self.n = n
        self.q = model.objective_vector()
        self.obj_const = model.obj_const
        self.lb = model.lower_bounds()
        self.ub = model.upper_bounds()
        self.binaries = np.asarray(model.binaries, dtype=np.int64)

        eq_r, eq_c, eq_v, eq_b = [], [], [], []
        in_r, in_c, in_v, in_b = [], [], [], []
        self.eq_idx: list[int] = []
        self.in_idx: list[int] = []
        for i in range(model.num_rows):
            ids = model._rows_ids[i]
            coefs = model._rows_coefs[i]
            sense = model._rows_sense[i]
            rhs = model._rows_rhs[i]
            if sense == EQ:
                r = len(eq_b)
                eq_r.extend([r] * len(ids))
                eq_c.extend(ids.tolist())
                eq_v.extend(coefs.tolist())
                eq_b.append(rhs)
                self.eq_idx.append(i)
            else:
                sgn = 1.0 if sense == LE else -1.0
                r = len(in_b)
                in_r.extend([r] * len(ids))
                in_c.extend(ids.tolist())
                in_v.extend((sgn * coefs).tolist())
                in_b.append(sgn * rhs)
                self.in_idx.append(i)
        self.A_eq = sparse.csr_matrix(
            (eq_v, (eq_r, eq_c)), shape=(len(eq_b), n))
        self.b_eq = np.asarray(eq_b)
        self.A_in = sparse.csr_matrix(
            (in_v, (in_r, in_c)), shape=(len(in_b), n))
        self.b_in = np.asarray(in_b)

        # cone rows: s = b - Ax must equal the affine expressions
        co_r, co_c, co_v, co_b = [], [], [], []
        self.cone_dims: list[int] = []
        r = 0
        for exprs in model._cones:
            self.cone_dims.append(len(exprs))
            for ids, coefs, const in exprs:
                co_r.extend([r] * len(ids))
                co_c.extend(ids.tolist())
                co_v.extend((-coefs).tolist())
                co_b.append(const)
                r += 1
        self.A_soc = sparse.csr_matrix((co_v, (co_r, co_c)), shape=(r, n))
        self.b_soc = np.asarray(co_b)

        # original row id -> (block, position, sign) for rhs patching
        self.row_map: dict[int, tuple[str, int, float]] = {}
        for pos, i in enumerate(self.eq_idx):
            self.row_map[i] = ("eq", pos, 1.0)
        for pos, i in enumerate(self.in_idx):
            sgn = 1.0 if model._rows_sense[i] == LE else -1.0
            self.row_map[i] = ("in", pos, sgn)

        self._adjacency = None

    def patched(self, obj_patch: dict[int, float] | None,
                rhs_patch: dict[int, float] | None):
        """(q, b_eq, b_in) with per-variable objective and per-row rhs overrides."""
        q = self.q
        if obj_patch:
            q = q.copy()
            for vid, val in obj_patch.items():
                q[vid] = val
        b_eq, b_in = self.b_eq, self.b_in
        if rhs_patch:
            b_eq, b_in = b_eq.copy(), b_in.copy()
            for row, val in rhs_patch.items():
                block, pos, sgn = self.row_map[row]
                if block == "eq":
                    b_eq[pos] = val
                else:
                    b_in[pos] = sgn * val
        return q, b_eq, b_in

    def var_rows(self) -> tuple[list[list[int]], list[list[int]]]:
        """(linear rows, cones) touching each variable, for bound snapping."""
        if self._adjacency is None:
            m = self.model
            lin: list[list[int]] = [[] for _ in range(self.n)]
            con: list[list[int]] = [[] for _ in range(self.n)]
            for i in range(m.num_rows):
                for vid in m._rows_ids[i]:
                    lin[vid].append(i)
            for k, exprs in enumerate(m._cones):
                seen = set()
                for ids, _, _ in exprs:
                    seen.update(ids.tolist())
                for vid in seen:
                    con[vid].append(k)
            self._adjacency = (lin, con)
        return self._adjacency

    def eval_row(self, i: int, x: np.ndarray) -> float:
        m = self.model
        return float(m._rows_coefs[i] @ x[m._rows_ids[i]])

    def row_ok(self, i: int, x: np.ndarray, tol: float,
               rhs: float | None = None) -> bool:
        m = self.model
        vals = m._rows_coefs[i] * x[m._rows_ids[i]]
        lhs = float(vals.sum())
        rhs = m._rows_rhs[i] if rhs is None else rhs
        slack = tol * (1.0 + abs(rhs) + float(np.abs(vals).sum()))
        s = m._rows_sense[i]
        if s == LE:
            return lhs <= rhs + slack
        if s == GE:
            return lhs >= rhs - slack
        return abs(lhs - rhs) <= slack

    def cone_ok(self, k: int, x: np.ndarray, tol: float) -> bool:
        e = self.eval_cone(k, x)
        norm = float(np.linalg.norm(e[1:]))
        return norm <= e[0] + tol * (1.0 + abs(e[0]) + norm)

    def eval_cone(self, k: int, x: np.ndarray) -> np.ndarray:
        exprs = self.model._cones[k]
        return np.array([coefs @ x[ids] + const for ids, coefs, const in exprs])

    def _abs_mat(self, name: str):
        cached = getattr(self, "_abs_" + name, None)
        if cached is None:
            cached = getattr(self, name).copy()
            cached.data = np.abs(cached.data)
            setattr(self, "_abs_" + name, cached)
        return cached

    def max_residual(self, x: np.ndarray, lb: np.ndarray | None = None,
                     ub: np.ndarray | None = None,
                     b_eq: np.ndarray | None = None,
                     b_in: np.ndarray | None = None) -> float:
        """Worst violation over rows, bounds and cones, relative to row scale
        (1 + |rhs| + sum_j |a_ij x_j|)."""
        lb = self.lb if lb is None else lb
        ub = self.ub if ub is None else ub
        b_eq = self.b_eq if b_eq is None else b_eq
        b_in = self.b_in if b_in is None else b_in
        ax = np.abs(x)
        worst = 0.0
        if self.A_eq.shape[0]:
            r = np.abs(self.A_eq @ x - b_eq)
            scale = 1.0 + np.abs(b_eq) + self._abs_mat("A_eq") @ ax
            worst = max(worst, float(np.max(r / scale)))
        if self.A_in.shape[0]:
            r = self.A_in @ x - b_in
            scale = 1.0 + np.abs(b_in) + self._abs_mat("A_in") @ ax
            worst = max(worst, float(np.max(r / scale)))
        fin = np.isfinite(ub)
        if fin.any():
            worst = max(worst, float(np.max(
                (x[fin] - ub[fin]) / (1.0 + np.abs(ub[fin])))))
        fin = np.isfinite(lb)
        if fin.any():
            worst = max(worst, float(np.max(
                (lb[fin] - x[fin]) / (1.0 + np.abs(lb[fin])))))
        off = 0
        s = self.b_soc - self.A_soc @ x if self.A_soc.shape[0] else np.empty(0)
        for d in self.cone_dims:
            e = s[off:off + d]
            viol = float(np.linalg.norm(e[1:])) - e[0]
            worst = max(worst, viol / (1.0 + abs(e[0]) + float(np.sum(np.abs(e[1:])))))
            off += d
        return worst
