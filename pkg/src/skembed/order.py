"""Subharmonic order on the lattice, decided two ways.

LP route: mu < nu iff some killed stopping rule embeds nu from mu; when none
exists the Farkas ray of the embedding program yields a subharmonic f with
sum f dmu > sum f dnu.

Potential route: the aggregate occupation M of a Markov filling scheme solves
(I - P^T) M = mu - nu on interior nodes with M = 0 on the boundary. If M >= 0
and the inflow into the boundary matches nu there, the rule "stop at z with
probability nu(z) / (M(z) + nu(z))" embeds nu, so the two routes agree.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .embed import feasibility
from .errors import SingularSystem
from .lattice import LatticeSpec, WalkKernel
from .measures import DiscreteMeasure
from .stopping import stopping_value

log = logging.getLogger(__name__)

M_TOL = 1e-10
SUBHARMONIC_TOL = 1e-9
MARGIN_TOL = 1e-10

IN_ORDER = "InOrder"
NOT_IN_ORDER = "NotInOrder"


@dataclass
class OrderVerdict:
    verdict: str
    witness: np.ndarray | None = None
    M: np.ndarray | None = None
    route: str = ""
    details: dict | None = None

    @property
    def in_order(self) -> bool:
        return self.verdict == IN_ORDER

    @property
    def witness_max_violation(self):
        if self.details is None:
            return None
        return self.details.get("subharmonic_residual")

    def to_json(self) -> str:
        return json.dumps({"in_order": self.in_order,
                           "witness_max_violation": self.witness_max_violation})


def check_witness(spec: LatticeSpec, kernel: WalkKernel, f, mu: DiscreteMeasure,
                  nu: DiscreteMeasure) -> dict:
    """Re-verify a witness from scratch: f <= P f on interior nodes and sum f dmu > sum f dnu."""
    f = np.asarray(f, dtype=float)
    res = f - kernel.P @ f
    sub = float(np.max(res[spec.interior], initial=0.0))
    margin = float(f @ mu.to_array(spec) - f @ nu.to_array(spec))
    return {"subharmonic_residual": max(sub, 0.0), "margin": margin,
            "ok": sub <= SUBHARMONIC_TOL and margin > MARGIN_TOL}


def witness_from_certificate(prob, y: np.ndarray) -> np.ndarray:
    """Subharmonic witness from a Farkas ray of the embedding program.

    With u the balance-row multipliers, J_x = -u_x / mu(x) is superharmonic for
    every start and g = min_x J_x dominates the marginal multipliers, so
    sum g dnu > sum g dmu. The witness is f = -g, rescaled to max |f| = 1 after
    replacing g by its smallest superharmonic majorant (removes round-off).
    """
    spec = prob.spec
    K, n = len(prob.starts), spec.n
    u = np.asarray(y[: K * n]).reshape(K, n)
    J = -u / prob.weights[:, None]
    g = J.min(axis=0)
    g = stopping_value(prob.kernel.P, spec.interior, g)
    f = -g
    scale = float(np.max(np.abs(f), initial=0.0))
    return f / scale if scale > 0 else f


def check_order_lp(spec: LatticeSpec, kernel: WalkKernel, mu: DiscreteMeasure,
                   nu: DiscreteMeasure) -> OrderVerdict:
    feas = feasibility(spec, kernel, mu, nu, allow_boundary_nu=True)
    if feas.feasible:
        return OrderVerdict(IN_ORDER, route="lp")
    f = witness_from_certificate(feas.problem, feas.certificate)
    chk = check_witness(spec, kernel, f, mu, nu)
    if not chk["ok"]:
        log.warning("order witness failed re-verification: %s", chk)
    return OrderVerdict(NOT_IN_ORDER, witness=f, route="lp", details=chk)


def aggregate_potential(spec: LatticeSpec, kernel: WalkKernel, mu: DiscreteMeasure,
                        nu: DiscreteMeasure):
    """Solve (I - P^T) M = mu - nu on interior nodes, M = 0 on the boundary.

    Returns (M, boundary_defect) with boundary_defect = nu - mu - inflow on
    boundary nodes (zero elsewhere).
    """
    inter = np.flatnonzero(spec.interior)
    mu_a, nu_a = mu.to_array(spec), nu.to_array(spec)
    PT = kernel.P.T.tocsr()
    A = (sp.identity(spec.n, format="csr") - PT)[inter][:, inter].tocsc()
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularSystem(f"killed-chain Green system is singular: {exc}") from exc
    M = np.zeros(spec.n)
    M[inter] = lu.solve((mu_a - nu_a)[inter])
    if not np.all(np.isfinite(M)):
        raise SingularSystem("non-finite potential")
    defect = np.zeros(spec.n)
    bnd = spec.boundary
    defect[bnd] = (nu_a - mu_a - PT @ M)[bnd]
    return M, defect


def check_order_potential(spec: LatticeSpec, kernel: WalkKernel, mu: DiscreteMeasure,
                          nu: DiscreteMeasure) -> OrderVerdict:
    M, defect = aggregate_potential(spec, kernel, mu, nu)
    worst_defect = float(np.max(np.abs(defect), initial=0.0))
    ok = bool(M.min() >= -M_TOL and worst_defect <= M_TOL)
    details = {"min_M": float(M.min()), "boundary_defect": worst_defect}
    return OrderVerdict(IN_ORDER if ok else NOT_IN_ORDER, M=M, route="potential",
                        details=details)


def markov_policy(spec: LatticeSpec, M: np.ndarray, nu: DiscreteMeasure) -> np.ndarray:
    """rho = nu / (M + nu) from an aggregate potential (1 on the boundary and where both vanish)."""
    nu_a = nu.to_array(spec)
    den = np.maximum(M, 0.0) + nu_a
    rho = np.ones(spec.n)
    pos = den > 0
    rho[pos] = nu_a[pos] / den[pos]
    rho[spec.boundary] = 1.0
    return rho
