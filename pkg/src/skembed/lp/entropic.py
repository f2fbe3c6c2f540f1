"""Entropy-regularized solver for embedding-shaped programs.

Solves  min c.x + eps * sum x (log x - 1)  s.t.  A x = b  through its smooth
concave dual  max b.y - eps * sum exp((A^T y - c)/eps), whose maximizer gives
x = exp((A^T y - c)/eps). Balance rows mix signs, so plain alternating
row scaling does not apply; we run damped Newton on the dual with an eps
continuation schedule instead. ``eps`` is relative to max |c|.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import NotEmbeddingShaped
from .program import MAX_ITER, OPTIMAL, LinearProgram, LpSolution

log = logging.getLogger(__name__)

_EXP_CAP = 600.0


def _forced_zero_columns(A: sp.csr_matrix, b: np.ndarray):
    """Presolve: a row with rhs 0 and same-signed coefficients pins its columns to 0."""
    m, n = A.shape
    active_cols = np.ones(n, dtype=bool)
    active_rows = np.ones(m, dtype=bool)
    changed = True
    while changed:
        changed = False
        for i in np.flatnonzero(active_rows & (b == 0.0)):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            cols = A.indices[lo:hi]
            vals = A.data[lo:hi]
            live = active_cols[cols] & (vals != 0.0)
            if not live.any():
                active_rows[i] = False
                continue
            v = vals[live]
            if np.all(v > 0) or np.all(v < 0):
                active_cols[cols[live]] = False
                active_rows[i] = False
                changed = True
    return active_cols, active_rows


def _dual_value(y, A_T, b, c, eps):
    z = np.minimum((A_T @ y - c) / eps, _EXP_CAP)
    v = np.exp(z)
    return float(b @ y - eps * v.sum()), v


def solve_entropic(prog: LinearProgram, eps: float = 1e-2, max_iter: int = 500,
                   tol: float = 1e-9, schedule: bool = True) -> LpSolution:
    if prog.meta.get("kind") != "embedding":
        raise NotEmbeddingShaped("entropic solver accepts programs from embed.build_problem only")
    if any(s != "=" for s in prog.senses) or np.any(prog.lb != 0):
        raise NotEmbeddingShaped("expected equality rows and nonnegative variables")
    A = prog.A.tocsr()
    b = prog.rhs.copy()
    sign = -1.0 if prog.sense == "max" else 1.0
    c_full = sign * prog.c
    cols, rows = _forced_zero_columns(A, b)
    A_r = A[rows][:, cols].tocsr()
    b_r = b[rows]
    scale = float(np.max(np.abs(c_full[cols]), initial=0.0)) or 1.0
    c_r = c_full[cols] / scale
    A_T = A_r.T.tocsr()
    m = A_r.shape[0]

    levels = [eps]
    if schedule:
        e = 1.0
        levels = []
        while e > eps * (1 + 1e-12):
            levels.append(e)
            e /= 10.0
        levels.append(eps)
    y = np.zeros(m)
    it = 0
    status = MAX_ITER
    g = b_r.copy()
    v = np.zeros(len(c_r))
    for k, e in enumerate(levels):
        final = k == len(levels) - 1
        level_tol = tol if final else max(tol, 1e-6)
        D, v = _dual_value(y, A_T, b_r, c_r, e)
        while it < max_iter:
            g = b_r - A_r @ v
            if np.max(np.abs(g), initial=0.0) <= level_tol:
                if final:
                    status = OPTIMAL
                break
            H = (A_r @ sp.diags(v / e) @ A_T).tocsc()
            H = H + sp.identity(m, format="csc") * (1e-12 * max(1.0, H.diagonal().max()))
            try:
                step = spla.spsolve(H, g)
            except RuntimeError:
                step = g
            if not np.all(np.isfinite(step)):
                step = g
            slope = float(g @ step)
            t = 1.0
            while t > 1e-12:
                D_new, v_new = _dual_value(y + t * step, A_T, b_r, c_r, e)
                if D_new >= D + 1e-4 * t * slope:
                    break
                t *= 0.5
            y = y + t * step
            D, v = D_new, v_new
            it += 1
        if it >= max_iter:
            break

    x = np.zeros(prog.n_vars)
    x[cols] = v
    y_full = np.zeros(prog.n_rows)
    y_full[rows] = y * scale
    Ax = A @ x
    primal_obj = float(prog.c @ x)
    dual_obj = sign * float(b @ y_full)
    res = {"primal": float(np.max(np.abs(Ax - b), initial=0.0)),
           "gap": abs(primal_obj - dual_obj)}
    if status != OPTIMAL:
        log.info("entropic solve stopped after %d Newton steps, residual %.3e",
                 it, res["primal"])
    return LpSolution(status, x=x, duals=sign * y_full, objective=primal_obj,
                      dual_objective=dual_obj,
                      reduced_costs=sign * (c_full - A.T @ (y_full)), residuals=res,
                      iterations=it, message=f"eps={eps}")
