"""Dense two-phase tableau simplex with Bland's rule.

Only for small standard-form programs (a few hundred rows); used as an
independent oracle against the HiGHS path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalBreakdown
from .program import INFEASIBLE, OPTIMAL, UNBOUNDED

PIVOT_MIN = 1e-13
_RC_TOL = 1e-11


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray | None
    y: np.ndarray | None
    iterations: int


def _pivot(T, basis, r, col):
    p = T[r, col]
    if abs(p) < PIVOT_MIN:
        raise NumericalBreakdown(f"pivot magnitude {abs(p):.3e} below {PIVOT_MIN}")
    T[r] /= p
    for i in range(T.shape[0]):
        if i != r and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[r]
    basis[r] = col


def _run(T, basis, allowed, max_iter):
    """Bland iterations on tableau T whose last row holds reduced costs."""
    it = 0
    m = T.shape[0] - 1
    while it < max_iter:
        rc = T[-1, :-1]
        cand = np.flatnonzero((rc < -_RC_TOL) & allowed)
        if not len(cand):
            return "done", it
        col = int(cand[0])
        colv = T[:m, col]
        pos = np.flatnonzero(colv > PIVOT_MIN)
        if not len(pos):
            return "unbounded", it
        ratios = T[pos, -1] / colv[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, basis, r, col)
        it += 1
    raise NumericalBreakdown("simplex iteration limit reached (cycling?)")


def _duals(A, basis, c, rows):
    B = A[np.ix_(rows, basis)]
    y = np.zeros(A.shape[0])
    y[rows] = np.linalg.solve(B.T, c[basis])
    return y


def bland_simplex(A, b, c, max_iter: int = 50_000) -> SimplexResult:
    """min c.x s.t. A x = b, x >= 0 (dense)."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    m, n = A.shape
    flip = np.where(b < 0, -1.0, 1.0)
    A = A * flip[:, None]
    b = b * flip
    Aa = np.hstack([A, np.eye(m)])
    T = np.zeros((m + 1, n + m + 1))
    T[:m, : n + m] = Aa
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    _, it1 = _run(T, basis, allowed, max_iter)
    phase1 = -T[-1, -1]
    if phase1 > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        y = _duals(Aa, basis, c1, list(range(m)))
        return SimplexResult(INFEASIBLE, None, y * flip, it1)
    # drive artificials out of the basis; rows that cannot pivot are redundant
    redundant = []
    for r in range(m):
        if basis[r] >= n:
            nz = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
            if len(nz):
                _pivot(T, basis, r, int(nz[0]))
            else:
                redundant.append(r)
    keep = [r for r in range(m) if r not in redundant]
    T2 = np.zeros((len(keep) + 1, n + 1))
    T2[:-1, :n] = T[keep, :n]
    T2[:-1, -1] = T[keep, -1]
    basis2 = [basis[r] for r in keep]
    T2[-1, :n] = c
    for i, j in enumerate(basis2):
        T2[-1] -= c[j] * T2[i]
    status, it2 = _run(T2, basis2, np.ones(n, dtype=bool), max_iter)
    if status == "unbounded":
        return SimplexResult(UNBOUNDED, None, None, it1 + it2)
    x = np.zeros(n)
    x[basis2] = T2[:-1, -1]
    # duals from the final basis, expressed on the original (unflipped) rows
    y = _duals(A, basis2, c, keep)
    return SimplexResult(OPTIMAL, np.maximum(x, 0.0), y * flip, it1 + it2)
