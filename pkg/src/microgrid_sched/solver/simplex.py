"""Bounded-variable primal revised simplex.

The LP is taken from a :class:`MilpModel` with integrality ignored::

    min c'x   s.t.  lo <= A x <= hi,  lb <= x <= ub

Internally each row gets a logical ``w = A x`` with bounds ``[lo, hi]``, so the
working system is ``[A  -I] (x, w) = 0``. Phase 1 starts from the all-logical
basis and adds one artificial per row whose logical starts out of bounds.

Pricing is Dantzig's rule with a Harris ratio test. After ``stall_threshold``
consecutive pivots without objective decrease the method switches to Bland's
rule (smallest eligible index enters, smallest basic index leaves on ties) until
the objective decreases again.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..formulation.model import MilpModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
TIME_LIMIT = "time_limit"

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
DENSE_LIMIT = 400


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    max_violation: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class LpData:
    """Column/row arrays of a model, with optional bound overrides."""

    A: sp.csr_matrix
    lo: np.ndarray
    hi: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    constant: float = 0.0

    @classmethod
    def from_model(cls, model: MilpModel, lb=None, ub=None) -> "LpData":
        mlb, mub = model.bounds()
        lo, hi = model.row_bounds()
        return cls(
            A=model.matrix(),
            lo=lo,
            hi=hi,
            c=model.cost_vector(),
            lb=mlb if lb is None else np.asarray(lb, dtype=float),
            ub=mub if ub is None else np.asarray(ub, dtype=float),
            constant=model.objective_constant,
        )


# ---------------------------------------------------------------------------
# presolve and scaling


@dataclass
class _Reduced:
    A: sp.csr_matrix
    lo: np.ndarray
    hi: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    free_cols: np.ndarray
    fixed_x: np.ndarray
    constant: float
    infeasible: bool = False


def _presolve(data: LpData) -> _Reduced:
    n = data.A.shape[1]
    lb, ub = data.lb, data.ub
    x_fixed = np.zeros(n)
    if np.any(lb > ub + FEAS_TOL):
        return _Reduced(data.A, data.lo, data.hi, data.c, lb, ub, np.arange(n), x_fixed, 0.0, infeasible=True)
    fixed = lb >= ub
    x_fixed[fixed] = lb[fixed]
    keep = np.flatnonzero(~fixed)
    shift = data.A @ x_fixed
    lo = data.lo - shift
    hi = data.hi - shift
    A = data.A[:, keep].tocsr()
    constant = data.constant + float(data.c @ x_fixed)
    nnz_row = np.diff(A.indptr)
    empty = nnz_row == 0
    if np.any(empty & ((lo > FEAS_TOL * np.maximum(1, np.abs(lo))) | (hi < -FEAS_TOL * np.maximum(1, np.abs(hi))))):
        return _Reduced(A, lo, hi, data.c[keep], lb[keep], ub[keep], keep, x_fixed, constant, infeasible=True)
    rows = np.flatnonzero(~empty)
    return _Reduced(A[rows], lo[rows], hi[rows], data.c[keep], lb[keep], ub[keep], keep, x_fixed, constant)


def _pow2(v: np.ndarray) -> np.ndarray:
    return np.exp2(np.round(np.log2(v)))


def _equilibrate(A: sp.csr_matrix, passes: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Geometric-mean row/column scaling followed by row max-norm equilibration (powers of two)."""
    m, n = A.shape
    r = np.ones(m)
    s = np.ones(n)
    if A.nnz == 0:
        return r, s
    absA = abs(A).tocsr()
    for _ in range(passes):
        B = sp.diags(r) @ absA @ sp.diags(s)
        B = B.tocsr()
        rmax = np.asarray(B.max(axis=1).todense()).ravel()
        rmin = _row_min_nonzero(B)
        ok = rmax > 0
        r[ok] /= np.sqrt(rmax[ok] * rmin[ok])
        B = (sp.diags(r) @ absA @ sp.diags(s)).tocsc()
        cmax = np.asarray(B.max(axis=0).todense()).ravel()
        cmin = _row_min_nonzero(B.T.tocsr())
        ok = cmax > 0
        s[ok] /= np.sqrt(cmax[ok] * cmin[ok])
    B = (sp.diags(r) @ absA @ sp.diags(s)).tocsr()
    rmax = np.asarray(B.max(axis=1).todense()).ravel()
    ok = rmax > 0
    r[ok] /= rmax[ok]
    return _pow2(r), _pow2(s)


def _row_min_nonzero(B: sp.csr_matrix) -> np.ndarray:
    out = np.ones(B.shape[0])
    data, indptr = B.data, B.indptr
    nz = np.diff(indptr) > 0
    if data.size:
        mins = np.minimum.reduceat(np.where(data > 0, data, np.inf), indptr[:-1][nz])
        out[nz] = mins
    out[~np.isfinite(out)] = 1.0
    return out


# ---------------------------------------------------------------------------
# basis factorisation


class _Basis:
    """LU of the basis matrix plus a product-form eta file."""

    def __init__(self, m: int):
        self.m = m
        self.etas: list[tuple[int, np.ndarray, float]] = []
        self._lu = None
        self._splu = None

    def factor(self, B: sp.csc_matrix) -> bool:
        self.etas = []
        try:
            if self.m <= DENSE_LIMIT:
                self._lu = la.lu_factor(B.toarray(), check_finite=False)
                self._splu = None
                diag = np.abs(np.diag(self._lu[0]))
                if diag.size and diag.min() < 1e-13 * max(1.0, diag.max()):
                    return False
            else:
                self._splu = spla.splu(B.tocsc(), permc_spec="COLAMD", options={"SymmetricMode": False})
                self._lu = None
        except (RuntimeError, la.LinAlgError, ValueError):
            return False
        return True

    def _solve(self, b: np.ndarray, trans: bool) -> np.ndarray:
        if self._lu is not None:
            return la.lu_solve(self._lu, b, trans=1 if trans else 0, check_finite=False)
        return self._splu.solve(b, trans="T" if trans else "N")

    def ftran(self, a: np.ndarray) -> np.ndarray:
        x = self._solve(a, False)
        for r, eta, eta_r in self.etas:
            xr = x[r]
            if xr != 0.0:
                x += eta * xr
                x[r] = eta_r * xr
        return x

    def btran(self, c: np.ndarray) -> np.ndarray:
        c = c.copy()
        for r, eta, eta_r in reversed(self.etas):
            c[r] = float(np.dot(c, eta)) + eta_r * c[r]
        return self._solve(c, True)

    def update(self, r: int, alpha: np.ndarray) -> None:
        ar = alpha[r]
        eta = -alpha / ar
        eta[r] = 0.0
        self.etas.append((r, eta, 1.0 / ar))


# ---------------------------------------------------------------------------
# the simplex itself


@dataclass
class _State:
    A: sp.csc_matrix  # [A_scaled  -I  artificials]
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    x: np.ndarray
    basis: np.ndarray  # column index per row position
    is_basic: np.ndarray
    iterations: int = 0
    refactors: int = 0
    extra: dict = field(default_factory=dict)


class _Simplex:
    def __init__(self, st: _State, max_iter: int, deadline: float | None, stall_threshold: int):
        self.st = st
        self.m = st.A.shape[0]
        self.basis_f = _Basis(self.m)
        self.max_iter = max_iter
        self.deadline = deadline
        self.stall_threshold = stall_threshold
        self.AT = st.A.T.tocsr()

    def refactor(self) -> None:
        st = self.st
        B = st.A[:, st.basis]
        if not self.basis_f.factor(B):
            self._repair_basis()
        st.refactors += 1
        self.recompute_basics()

    def _repair_basis(self) -> None:
        """Replace dependent basic columns by logicals until the basis factors."""
        st = self.st
        n_struct = st.extra["n_struct"]
        B = st.A[:, st.basis].toarray()
        q, r, piv = la.qr(B, pivoting=True, mode="economic")
        diag = np.abs(np.diag(r))
        rank = int(np.sum(diag > 1e-11 * max(1.0, diag.max() if diag.size else 1.0)))
        dependent_pos = piv[rank:]
        used_rows = set()
        # rows covered by independent columns: pick logicals for rows not yet covered
        for pos in dependent_pos:
            col = st.basis[pos]
            st.is_basic[col] = False
            st.x[col] = _nearest_bound(st.lb[col], st.ub[col], st.x[col])
        candidates = [i for i in range(self.m) if not st.is_basic[n_struct + i]]
        for pos in dependent_pos:
            for i in candidates:
                if i in used_rows:
                    continue
                trial = st.basis.copy()
                trial[pos] = n_struct + i
                if np.linalg.matrix_rank(st.A[:, trial].toarray()) > np.linalg.matrix_rank(
                        st.A[:, st.basis].toarray()):
                    st.basis[pos] = n_struct + i
                    st.is_basic[n_struct + i] = True
                    used_rows.add(i)
                    break
        if not self.basis_f.factor(st.A[:, st.basis]):
            raise RuntimeError("basis repair failed")

    def recompute_basics(self) -> None:
        st = self.st
        xn = st.x.copy()
        xn[st.basis] = 0.0
        rhs = -(st.A @ xn)
        st.x[st.basis] = self.basis_f.ftran(rhs)

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        a = self.st.A
        start, end = a.indptr[j], a.indptr[j + 1]
        col[a.indices[start:end]] = a.data[start:end]
        return col

    def run(self, cost: np.ndarray) -> str:
        """Iterate to optimality for ``cost`` from the current (primal feasible) basis."""
        st = self.st
        self.refactor()
        bland = False
        stall = 0
        best_obj = float(cost @ st.x)
        since_refactor = 0
        while True:
            if st.iterations >= self.max_iter:
                return ITERATION_LIMIT
            if self.deadline is not None and st.iterations % 16 == 0 and time.monotonic() > self.deadline:
                return TIME_LIMIT
            y = self.basis_f.btran(cost[st.basis])
            d = cost - self.AT @ y
            lb, ub, x = st.lb, st.ub, st.x
            can_inc = (~st.is_basic) & (x < ub - FEAS_TOL)
            can_dec = (~st.is_basic) & (x > lb + FEAS_TOL)
            eligible_inc = can_inc & (d < -OPT_TOL)
            eligible_dec = can_dec & (d > OPT_TOL)
            eligible = eligible_inc | eligible_dec
            if not eligible.any():
                return OPTIMAL
            if bland:
                q = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                q = int(np.argmax(score))
            direction = 1.0 if eligible_inc[q] else -1.0

            alpha = self.basis_f.ftran(self.column(q))
            rate = -direction * alpha  # d x_B / d theta
            xb = x[st.basis]
            lbb = lb[st.basis]
            ubb = ub[st.basis]
            r, theta, to_upper = self._ratio_test(rate, xb, lbb, ubb, bland)
            flip = ub[q] - lb[q]
            if r is None and not math.isfinite(flip):
                return UNBOUNDED
            if r is None or flip <= theta:
                # bound flip of the entering column
                x[q] = ub[q] if direction > 0 else lb[q]
                x[st.basis] = xb + rate * flip
                st.iterations += 1
            else:
                x[st.basis] = xb + rate * theta
                x[q] = x[q] + direction * theta
                leaving = st.basis[r]
                x[leaving] = ubb[r] if to_upper else lbb[r]
                st.is_basic[leaving] = False
                st.is_basic[q] = True
                st.basis[r] = q
                self.basis_f.update(r, alpha)
                st.iterations += 1
                since_refactor += 1
                if since_refactor >= REFACTOR_EVERY:
                    self.refactor()
                    since_refactor = 0
            obj = float(cost @ x)
            if obj < best_obj - 1e-12 * max(1.0, abs(best_obj)):
                best_obj = obj
                stall = 0
                bland = False
            else:
                stall += 1
                if stall >= self.stall_threshold:
                    bland = True

    def _ratio_test(self, rate, xb, lbb, ubb, bland):
        dec = rate < -PIVOT_TOL
        inc = rate > PIVOT_TOL
        if not (dec.any() or inc.any()):
            return None, math.inf, False
        slack = np.full(rate.shape, np.inf)
        slack[dec] = (xb[dec] - lbb[dec]) / -rate[dec]
        slack[inc] = (ubb[inc] - xb[inc]) / rate[inc]
        slack = np.maximum(slack, 0.0)
        if not np.isfinite(slack).any():
            return None, math.inf, False
        if bland:
            theta = slack.min()
            ties = np.flatnonzero(slack <= theta + 1e-12)
            r = int(min(ties, key=lambda i: self.st.basis[i]))
        else:
            relaxed = np.full(rate.shape, np.inf)
            relaxed[dec] = (xb[dec] - lbb[dec] + FEAS_TOL) / -rate[dec]
            relaxed[inc] = (ubb[inc] - xb[inc] + FEAS_TOL) / rate[inc]
            cap = relaxed.min()
            cand = np.flatnonzero(slack <= cap)
            r = int(cand[np.argmax(np.abs(rate[cand]))])
            theta = slack[r]
        return r, float(theta), bool(rate[r] > 0)


def _nearest_bound(lb: float, ub: float, v: float = 0.0) -> float:
    if math.isfinite(lb) and math.isfinite(ub):
        return lb if abs(v - lb) <= abs(v - ub) else ub
    if math.isfinite(lb):
        return lb
    if math.isfinite(ub):
        return ub
    return 0.0


def _initial_value(lb: float, ub: float) -> float:
    if math.isfinite(lb) and math.isfinite(ub):
        return lb if abs(lb) <= abs(ub) else ub
    if math.isfinite(lb):
        return lb
    if math.isfinite(ub):
        return ub
    return 0.0


def solve_lp_data(data: LpData, *, max_iter: int | None = None, deadline: float | None = None,
                  stall_threshold: int = 50, scale: bool = True) -> LpSolution:
    """Solve the LP described by ``data``; see :func:`solve_lp`."""
    red = _presolve(data)
    n_orig = data.A.shape[1]
    if red.infeasible:
        return LpSolution(INFEASIBLE)

    def full_x(xr: np.ndarray) -> np.ndarray:
        x = red.fixed_x.copy()
        x[red.free_cols] = xr
        return x

    m, n = red.A.shape
    if n == 0:
        x = full_x(np.zeros(0))
        return LpSolution(OPTIMAL, x, float(data.c @ x) + data.constant, 0)

    if scale and m:
        r, s = _equilibrate(red.A)
    else:
        r, s = np.ones(m), np.ones(n)
    A = (sp.diags(r) @ red.A @ sp.diags(s)).tocsc()
    c = red.c * s
    cmax = float(np.max(np.abs(c))) if c.size else 0.0
    cscale = float(_pow2(np.array([1.0 / cmax]))[0]) if cmax > 0 else 1.0
    c = c * cscale
    lb = red.lb / s
    ub = red.ub / s
    lo = red.lo * r
    hi = red.hi * r

    x0 = np.array([_initial_value(a, b) for a, b in zip(lb, ub)])
    w0 = A @ x0
    # artificials for rows whose logical would start out of bounds
    w_start = np.clip(w0, lo, hi)
    viol = w0 - w_start
    art_rows = np.flatnonzero(np.abs(viol) > FEAS_TOL)
    n_art = art_rows.size
    sign = np.sign(-viol[art_rows])
    # system: A x - w + E a = 0, with E a = w - A x  => a = |viol| when E = -sign(viol)
    art = sp.csc_matrix((sign, (art_rows, np.arange(n_art))), shape=(m, n_art))
    full = sp.hstack([A, -sp.identity(m, format="csc"), art], format="csc")
    full.sort_indices()
    lb_all = np.concatenate([lb, lo, np.zeros(n_art)])
    ub_all = np.concatenate([ub, hi, np.full(n_art, np.inf)])
    x_all = np.concatenate([x0, w_start, np.abs(viol[art_rows])])
    basis = np.arange(n, n + m)
    basis[art_rows] = n + m + np.arange(n_art)
    is_basic = np.zeros(n + m + n_art, dtype=bool)
    is_basic[basis] = True
    st = _State(full, np.concatenate([c, np.zeros(m + n_art)]), lb_all, ub_all, x_all, basis, is_basic)
    st.extra["n_struct"] = n
    limit = max_iter if max_iter is not None else 50 * (n + m) + 1000
    spx = _Simplex(st, limit, deadline, stall_threshold)

    if n_art:
        phase1_cost = np.concatenate([np.zeros(n + m), np.ones(n_art)])
        status = spx.run(phase1_cost)
        if status in (ITERATION_LIMIT, TIME_LIMIT):
            return LpSolution(status, iterations=st.iterations)
        infeas = float(np.sum(st.x[n + m:]))
        if infeas > 1e-7:
            return LpSolution(INFEASIBLE, iterations=st.iterations)
        st.ub[n + m:] = 0.0
        st.x[n + m:] = np.clip(st.x[n + m:], 0.0, 0.0)

    status = spx.run(st.c)
    if status != OPTIMAL:
        return LpSolution(status, iterations=st.iterations)
    xr = st.x[:n] * s
    x = full_x(xr)
    lb_o, ub_o = data.lb, data.ub
    x = np.minimum(np.maximum(x, lb_o), ub_o)
    act = data.A @ x
    viol = max(float(np.max(np.maximum(data.lo - act, 0.0), initial=0.0)),
               float(np.max(np.maximum(act - data.hi, 0.0), initial=0.0)))
    obj = float(data.c @ x) + data.constant
    return LpSolution(OPTIMAL, x, obj, st.iterations, viol)


def solve_lp(model: MilpModel, lb=None, ub=None, **kwargs) -> LpSolution:
    """Solve the continuous relaxation of ``model`` (binaries relaxed to their bounds).

    ``lb``/``ub`` override column bounds, e.g. to fix binaries.
    Raises :class:`ModelError` on malformed input.
    """
    model.check()
    return solve_lp_data(LpData.from_model(model, lb, ub), **kwargs)
