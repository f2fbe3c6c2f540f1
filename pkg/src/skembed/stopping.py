"""Optimal stopping of the lattice walk by Howard policy iteration.

``stopping_value(P, interior, f)`` returns the smallest function v with
v >= f everywhere and v >= P v at interior nodes, i.e. the value of stopping
the walk optimally with reward f (boundary nodes stop). Each policy
evaluation is a sparse solve of (I - P) v = 0 on the continuation set, so the
result is exact to solver precision rather than to an iteration tolerance.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotConverged

_TIE = 1e-14


def evaluate_policy(P: sp.csr_matrix, cont: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Value of 'continue on cont, stop elsewhere': v = f off cont, v = P v on cont."""
    v = np.array(f, dtype=float)
    idx = np.flatnonzero(cont)
    if len(idx):
        M = (sp.identity(len(f), format="csr") - P)[idx][:, idx].tocsc()
        v[idx] = 0.0
        rhs = P[idx] @ v
        v[idx] = spla.spsolve(M, rhs) if len(idx) > 1 else rhs / M.toarray().ravel()
    return v


def stopping_value(P, interior, f, max_iter: int = 1000, return_set: bool = False,
                   cont0=None):
    P = sp.csr_matrix(P)
    f = np.asarray(f, dtype=float)
    interior = np.asarray(interior, dtype=bool)
    slack = _TIE * np.maximum(1.0, np.abs(f))
    if cont0 is None:
        cont = np.zeros(len(f), dtype=bool)
        v = f.copy()
    else:
        cont = np.asarray(cont0, dtype=bool) & interior
        v = evaluate_policy(P, cont, f)
    for _ in range(max_iter):
        Pv = P @ v
        # strict improvement enters; ties keep the previous action
        new = interior & ((Pv > f + slack) | (cont & (Pv >= f - slack)))
        if np.array_equal(new, cont):
            return (v, cont) if return_set else v
        cont = new
        v = evaluate_policy(P, cont, f)
    raise NotConverged("policy iteration did not settle", last=v)


def replay(P: sp.csr_matrix, rho: np.ndarray, start: np.ndarray):
    """Linear replay of a Markov stopping rule.

    ``rho[z]`` is the stop probability on arrival at z; nodes whose row of P
    is empty (the absorbing boundary) stop with probability 1 whatever rho
    says. Arrival mass solves a = start + P^T ((1 - rho) a); returns
    (stop law rho*a, occupation (1-rho)*a).
    """
    P = sp.csr_matrix(P)
    rho = np.asarray(rho, dtype=float).copy()
    rho[np.diff(P.indptr) == 0] = 1.0
    keep = 1.0 - rho
    n = P.shape[0]
    A = (sp.identity(n, format="csc") - (P.T @ sp.diags(keep)).tocsc())
    a = spla.spsolve(A.tocsc(), np.asarray(start, dtype=float))
    a = np.atleast_1d(a)
    return rho * a, keep * a
