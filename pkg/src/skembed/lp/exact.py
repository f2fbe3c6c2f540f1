"""Exact LP solves with dual and Farkas certificates.

Programs are first brought to standard form ``A_s x_s = b_s, x_s >= 0,
min c_s.x_s`` (shift finite lower bounds, split free variables, add one slack
per inequality row). The standard form is solved either by HiGHS (dual
simplex) or by the in-house dense Bland-rule simplex; both paths return the
same certificate vocabulary and are re-verified here, independently of the
solver that produced them.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import NumericalBreakdown, SizeCapExceeded
from .program import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, LpSolution

log = logging.getLogger(__name__)

DEFAULT_NNZ_CAP = 200_000
FEAS_TOL = 1e-9
GAP_TOL = 1e-8
PIVOT_TOL = 1e-11

class StandardForm:
    """min c_s.x_s  s.t.  A_s x_s = b_s,  x_s >= 0, with the map back to the original."""

    def __init__(self, prog: LinearProgram):
        self.prog = prog
        n, m = prog.n_vars, prog.n_rows
        A = prog.A.tocsc()
        lb = prog.lb
        free = ~np.isfinite(lb)
        if np.any(np.isposinf(lb)):
            raise ValueError("lower bound +inf")
        shift = np.where(free, 0.0, lb)
        sign = -1.0 if prog.sense == "max" else 1.0
        cmin = sign * prog.c

        free_idx = np.flatnonzero(free)
        slack_rows = [i for i, s in enumerate(prog.senses) if s != "="]
        slack_sign = np.array([1.0 if prog.senses[i] == "<=" else -1.0 for i in slack_rows])
        S = sp.csc_matrix((slack_sign, (slack_rows, np.arange(len(slack_rows)))),
                          shape=(m, len(slack_rows)))
        self.A_s = sp.hstack([A, -A[:, free_idx], S], format="csc")
        self.b_s = prog.rhs - A @ shift
        self.c_s = np.concatenate([cmin, -cmin[free_idx], np.zeros(len(slack_rows))])
        self.offset = float(cmin @ shift)
        self.sign = sign
        self.shift = shift
        self.free_idx = free_idx
        self.n = n
        self.n_s = self.A_s.shape[1]

    def to_original(self, x_s: np.ndarray) -> np.ndarray:
        x = self.shift + x_s[: self.n]
        x[self.free_idx] -= x_s[self.n: self.n + len(self.free_idx)]
        return x

    def objective(self, x_s) -> float:
        """Objective in the original sense."""
        return self.sign * (float(self.c_s @ x_s) + self.offset)


def primal_residual(prog: LinearProgram, x: np.ndarray) -> float:
    Ax = prog.A @ x
    worst = 0.0
    for i, s in enumerate(prog.senses):
        r = Ax[i] - prog.rhs[i]
        if s == "=":
            worst = max(worst, abs(r))
        elif s == "<=":
            worst = max(worst, r)
        else:
            worst = max(worst, -r)
    finite = np.isfinite(prog.lb)
    if finite.any():
        worst = max(worst, float(np.max(prog.lb[finite] - x[finite], initial=0.0)))
    return float(worst)


def verify_farkas(prog: LinearProgram, y: np.ndarray, tol: float = 1e-9) -> tuple[bool, float, float]:
    """Check an infeasibility certificate from scratch.

    Returns (ok, worst positive entry of A_s^T y, y.b_s). The standard form is
    rebuilt here so the check shares no state with the solver.
    """
    std = StandardForm(prog)
    ya = std.A_s.T @ y
    worst = float(np.max(ya, initial=0.0))
    yb = float(y @ std.b_s)
    scale = max(1.0, float(np.max(np.abs(y), initial=0.0)))
    return (worst <= tol * scale and yb > tol * scale), worst, yb


def _certify(std: StandardForm, x_s, y_s, status, iterations=0, message="") -> LpSolution:
    prog = std.prog
    x = std.to_original(x_s)
    d_s = std.c_s - std.A_s.T @ y_s
    primal_obj = std.objective(x_s)
    dual_obj = std.sign * (float(std.b_s @ y_s) + std.offset)
    res = {
        "primal": primal_residual(prog, x),
        "dual": float(max(0.0, -np.min(d_s, initial=0.0))),
        "gap": abs(primal_obj - dual_obj),
        "complementarity": float(np.max(np.abs(x_s * d_s), initial=0.0)),
    }
    d = d_s[: std.n].copy()
    return LpSolution(status, x=x, duals=std.sign * y_s, objective=primal_obj,
                      dual_objective=dual_obj, reduced_costs=std.sign * d,
                      residuals=res, iterations=iterations, message=message)


def _highs(A: sp.csc_matrix, b, c, ftol: float = 1e-10):
    """Run HiGHS on min c.x, A x = b, x >= 0. Returns (status, x, y, basic_cols, basic_rows)."""
    import highspy

    m, n = A.shape
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("primal_feasibility_tolerance", ftol)
    h.setOptionValue("dual_feasibility_tolerance", ftol)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("threads", 1)
    lp = highspy.HighsLp()
    lp.num_col_, lp.num_row_ = n, m
    lp.col_cost_ = np.asarray(c, dtype=float)
    lp.col_lower_ = np.zeros(n)
    lp.col_upper_ = np.full(n, highspy.kHighsInf)
    lp.row_lower_ = np.asarray(b, dtype=float)
    lp.row_upper_ = np.asarray(b, dtype=float)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = A.indptr.astype(np.int32)
    lp.a_matrix_.index_ = A.indices.astype(np.int32)
    lp.a_matrix_.value_ = A.data.astype(float)
    h.passModel(lp)
    h.run()
    status = h.getModelStatus()
    MS = highspy.HighsModelStatus
    if status == MS.kOptimal:
        sol = h.getSolution()
        basis = h.getBasis()
        B = highspy.HighsBasisStatus.kBasic
        basic_cols = np.array([j for j, st in enumerate(basis.col_status) if st == B], dtype=np.int64)
        basic_rows = np.array([i for i, st in enumerate(basis.row_status) if st == B], dtype=np.int64)
        return (OPTIMAL, np.asarray(sol.col_value), np.asarray(sol.row_dual),
                basic_cols, basic_rows)
    if status == MS.kInfeasible:
        return INFEASIBLE, None, None, None, None
    if status in (MS.kUnbounded, MS.kUnboundedOrInfeasible):
        return UNBOUNDED, None, None, None, None
    return h.modelStatusToString(status), None, None, None, None


def _basis_lu(A, basic, m):
    """LU of the basis; indices >= n denote artificial unit columns e_(j-n)."""
    n = A.shape[1]
    struct = basic[basic < n]
    art = basic[basic >= n] - n
    cols = sp.hstack([A[:, struct], sp.csc_matrix((np.ones(len(art)), (art, np.arange(len(art)))),
                                                   shape=(m, len(art)))], format="csc")
    order = np.concatenate([np.flatnonzero(basic < n), np.flatnonzero(basic >= n)])
    return spla.splu(cols), order


def revised_cleanup(A: sp.csc_matrix, b, c, basic, max_iter: int = 20_000,
                    rc_tol: float = 1e-12):
    """Finish an (almost) optimal basis with revised-simplex pivots and exact refactorization.

    ``basic`` lists m basic indices; index n + i is the artificial column of
    row i, which is fixed at zero (it may leave but never enters). Entering
    variable: lowest index with negative reduced cost; leaving variable: min
    ratio, ties to the lowest index. Returns (x, y, basic, iterations).
    """
    m, n = A.shape
    basic = np.asarray(basic, dtype=np.int64).copy()
    scale_c = max(1.0, float(np.max(np.abs(c), initial=0.0)))
    AT = A.T.tocsr()
    for it in range(max_iter + 1):
        lu, order = _basis_lu(A, basic, m)
        bvars = basic[order]
        xb = lu.solve(b)
        cb = np.where(bvars < n, c[np.minimum(bvars, n - 1)], 0.0)
        y = lu.solve(cb, trans="T")
        d = c - AT @ y
        d[bvars[bvars < n]] = 0.0
        cand = np.flatnonzero(d < -rc_tol * scale_c)
        if not len(cand) or it == max_iter:
            x = np.zeros(n)
            x[bvars[bvars < n]] = xb[bvars < n]
            return x, y, basic, it
        j = int(cand[0])
        w = lu.solve(A[:, j].toarray().ravel())
        is_art = bvars >= n
        ratios = np.full(m, np.inf)
        pos = (~is_art) & (w > PIVOT_TOL)
        ratios[pos] = np.maximum(xb[pos], 0.0) / w[pos]
        ratios[is_art & (np.abs(w) > PIVOT_TOL)] = 0.0
        if not np.isfinite(ratios).any():
            raise NumericalBreakdown("unbounded direction during basis cleanup")
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-15)
        leave = int(min(ties, key=lambda i: bvars[i]))
        basic[order[leave]] = j
    raise NumericalBreakdown("basis cleanup did not terminate")


def _run_refined(A, b, c):
    out = None
    for ftol in (1e-9, 1e-7):
        out = _highs(A, b, c, ftol)
        if out[0] in (OPTIMAL, INFEASIBLE, UNBOUNDED):
            break
        log.info("HiGHS status %s at tolerance %g, retrying looser", out[0], ftol)
    status, x, y, _, _ = out
    if status != OPTIMAL:
        return status, None, None
    return status, np.maximum(x, 0.0), y


def _farkas_highs(std: StandardForm) -> np.ndarray:
    """Phase-one program min 1.(a+ + a-) s.t. A x + a+ - a- = b; its duals form a Farkas ray."""
    m = std.A_s.shape[0]
    eye = sp.identity(m, format="csc")
    A1 = sp.hstack([std.A_s, eye, -eye], format="csc")
    c1 = np.concatenate([np.zeros(std.n_s), np.ones(2 * m)])
    status, _, y = _run_refined(A1, std.b_s, c1)
    if status != OPTIMAL:
        raise RuntimeError(f"phase-one program ended with status {status}")
    return y


def _solve_highs(std: StandardForm) -> LpSolution:
    status, x_s, y_s = _run_refined(std.A_s, std.b_s, std.c_s)
    if status == OPTIMAL:
        return _certify(std, x_s, y_s, OPTIMAL)
    if status == INFEASIBLE:
        return LpSolution(INFEASIBLE, certificate=_farkas_highs(std))
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED)
    raise RuntimeError(f"HiGHS failed with model status {status}")


def solve_exact(prog: LinearProgram, method: str = "highs",
                nnz_cap: int = DEFAULT_NNZ_CAP) -> LpSolution:
    """Solve to optimality (or certify infeasibility/unboundedness).

    method "highs" uses the HiGHS dual simplex; "simplex" uses the dense
    Bland-rule tableau solver in :mod:`skembed.lp.simplex`, meant for small
    programs and as an independent cross-check.
    """
    if prog.nnz > nnz_cap:
        raise SizeCapExceeded(f"{prog.nnz} nonzeros exceeds cap {nnz_cap}")
    std = StandardForm(prog)
    if method == "highs":
        sol = _solve_highs(std)
    elif method == "simplex":
        from .simplex import bland_simplex

        out = bland_simplex(std.A_s.toarray(), std.b_s, std.c_s)
        if out.status == OPTIMAL:
            sol = _certify(std, out.x, out.y, OPTIMAL, out.iterations)
        elif out.status == INFEASIBLE:
            sol = LpSolution(INFEASIBLE, certificate=out.y, iterations=out.iterations)
        else:
            sol = LpSolution(UNBOUNDED, iterations=out.iterations)
    else:
        raise ValueError(f"unknown method {method!r}")
    if sol.status == OPTIMAL:
        r = sol.residuals
        if r["primal"] > FEAS_TOL or r["dual"] > FEAS_TOL or r["gap"] > GAP_TOL:
            log.info("LP certificate residuals above tolerance: %s", r)
    elif sol.status == INFEASIBLE:
        ok, worst, yb = verify_farkas(prog, sol.certificate)
        sol.residuals = {"farkas_ya": worst, "farkas_yb": yb, "farkas_ok": ok}
        if not ok:
            log.warning("Farkas certificate failed re-verification: %s", sol.residuals)
    return sol
