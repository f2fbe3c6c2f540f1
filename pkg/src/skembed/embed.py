"""Discrete optimal Skorokhod embedding as an occupation-measure LP.

For every start x with mu(x) > 0 the unknowns are the stop measure s_x (all
nodes) and the occupation measure m_x (expected continue-visits, interior
nodes only). Balance at node z for start x::

    m_x(z) + s_x(z) - sum_w P(w, z) m_x(w) = delta_x(z)

and the target marginal ``sum_x mu(x) s_x(z) = nu(z)``. The objective is
``sum_x mu(x) sum_z |x - z|^alpha s_x(z)`` (physical units).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (InfeasibleEmbedding, NonProbability, NotOptimal, SupportOffLattice)
from .lattice import LatticeSpec, WalkKernel
from .lp import (INFEASIBLE, OPTIMAL, LinearProgram, LpSolution, primal_residual,
                 solve_entropic, solve_exact)
from .measures import DiscreteMeasure, is_invariant
from .stopping import stopping_value

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
BOUNDED_DUAL_RATIO = 1e3


def cost_matrix(spec: LatticeSpec, starts, alpha: float) -> np.ndarray:
    """|x h - z h|^alpha for x in starts (rows) and every node z."""
    pos = spec.positions
    X = pos[np.asarray(starts)]
    dist = np.linalg.norm(X[:, None, :] - pos[None, :, :], axis=2)
    return dist ** alpha


@dataclass
class EmbeddingProblem:
    spec: LatticeSpec
    kernel: WalkKernel
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    alpha: float
    sense: str
    starts: np.ndarray            # node indices carrying LP blocks
    weights: np.ndarray           # mu(x) per LP start
    symmetry_reduction: bool = False
    # reduced builds: per LP start, list of (image node index, group element index)
    images: list = field(default_factory=list)
    zero_cost: bool = False
    lp: LinearProgram | None = None

    @property
    def n(self):
        return self.spec.n

    @property
    def interior_idx(self):
        return np.flatnonzero(self.spec.interior)

    @property
    def block(self):
        return self.spec.n + int(self.spec.interior.sum())

    def s_col(self, k, z):
        return k * self.block + z

    def m_col(self, k, j):
        return k * self.block + self.spec.n + j

    def balance_row(self, k, z):
        return k * self.spec.n + z

    def marginal_row(self, z):
        return len(self.starts) * self.spec.n + z


def _validate(spec, mu, nu, allow_boundary_nu):
    for name, meas in (("mu", mu), ("nu", nu)):
        for z in meas:
            if z not in spec.index:
                raise SupportOffLattice(f"{name} charges {z}, outside the domain")
        if not meas.is_probability():
            raise NonProbability(f"{name} has total mass {meas.total}")
    if not allow_boundary_nu:
        bnd = spec.boundary
        for z in nu:
            if bnd[spec.index[z]]:
                raise SupportOffLattice(
                    f"nu charges boundary node {z}; pass allow_boundary_nu=True")


def _orbits(spec, support_idx):
    """Group support nodes into point-group orbits; representative = lowest index."""
    act = spec.group_action
    seen, out = set(), []
    for i in sorted(support_idx):
        if i in seen:
            continue
        imgs = {}
        for g in range(act.shape[0]):
            j = int(act[g, i])
            imgs.setdefault(j, g)
        seen.update(imgs)
        out.append((i, sorted(imgs.items())))
    return out


def build_problem(spec: LatticeSpec, kernel: WalkKernel, mu: DiscreteMeasure,
                  nu: DiscreteMeasure, alpha: float = 1.0, sense: str = "min",
                  symmetry_reduction: bool = False, allow_boundary_nu: bool = False,
                  zero_cost: bool = False) -> EmbeddingProblem:
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    _validate(spec, mu, nu, allow_boundary_nu)
    mu_arr = mu.to_array(spec)
    nu_arr = nu.to_array(spec)
    support = np.flatnonzero(mu_arr > 0)
    if symmetry_reduction:
        if not (is_invariant(mu, spec) and is_invariant(nu, spec)):
            raise ValueError("symmetry_reduction needs point-group-invariant mu and nu")
        orbits = _orbits(spec, support)
        starts = np.array([r for r, _ in orbits], dtype=np.int64)
        images = [imgs for _, imgs in orbits]
    else:
        starts = support.astype(np.int64)
        images = [[(int(i), 0)] for i in starts]
    weights = mu_arr[starts]
    prob = EmbeddingProblem(spec, kernel, mu, nu, float(alpha), sense, starts, weights,
                            symmetry_reduction, images, zero_cost)

    n = spec.n
    interior = prob.interior_idx
    n_int = len(interior)
    K = len(starts)
    P = kernel.P.tocsr()
    cost = np.zeros((K, n)) if zero_cost else cost_matrix(spec, starts, alpha)
    act = spec.group_action

    rows, cols, vals = [], [], []
    c = np.zeros(K * prob.block)
    rhs = np.zeros(K * n + n)
    # one-step flow of occupation mass: row z gets -P(w, z) from m(w)
    Pi = P[interior]
    w_loc, z_to = Pi.nonzero()
    p_vals = np.asarray(Pi[w_loc, z_to]).ravel()
    for k in range(K):
        base_row = k * n
        s0 = k * prob.block
        m0 = s0 + n
        # s_x(z) in balance row z
        rows.append(base_row + np.arange(n))
        cols.append(s0 + np.arange(n))
        vals.append(np.ones(n))
        # m_x(w) in its own balance row
        rows.append(base_row + interior)
        cols.append(m0 + np.arange(n_int))
        vals.append(np.ones(n_int))
        # - P(w, z) m_x(w) in balance row z
        rows.append(base_row + z_to)
        cols.append(m0 + w_loc)
        vals.append(-p_vals)
        rhs[base_row + starts[k]] = 1.0
        # marginal rows
        for img, g in images[k]:
            rows.append(K * n + act[g])
            cols.append(s0 + np.arange(n))
            vals.append(np.full(n, mu_arr[img]))
        orbit_mass = sum(mu_arr[img] for img, _ in images[k])
        c[s0:s0 + n] = orbit_mass * cost[k]
    rhs[K * n:] = nu_arr
    # Summing the balance rows of a block gives total(s_x) = 1, so the weighted
    # marginal rows add up to an implied equation. Drop the last marginal row
    # (its beta is pinned to 0) so that the constraint matrix has full row rank.
    rows, cols, vals = (np.concatenate(a) for a in (rows, cols, vals))
    keep = rows != K * n + n - 1
    prob.lp = LinearProgram(
        n_vars=K * prob.block,
        rows=rows[keep], cols=cols[keep], vals=vals[keep],
        senses=["="] * (K * n + n - 1), rhs=rhs[:-1], c=c, sense=sense,
        meta={"kind": "embedding", "n": n, "n_int": n_int, "K": K},
    )
    return prob


@dataclass
class StoppingSolution:
    """Per-start stop/occupation measures of an optimal discrete stopping rule.

    Arrays are indexed [start, node] over *all* starts with mu(x) > 0 (reduced
    builds are expanded by the point group). ``J`` and ``beta`` are the dual
    potentials: for min problems J_x >= beta - c(x, .) and J_x >= P J_x, for
    max problems both inequalities are reversed.
    """

    problem: EmbeddingProblem
    starts: np.ndarray
    weights: np.ndarray
    s: np.ndarray
    m: np.ndarray
    objective: float
    status: str
    method: str
    lp: LpSolution
    beta: np.ndarray | None = None
    J: np.ndarray | None = None

    @property
    def spec(self):
        return self.problem.spec

    @property
    def kernel(self):
        return self.problem.kernel

    @property
    def E_tau(self) -> float:
        return float(self.weights @ self.m.sum(axis=1))

    def coupling(self) -> np.ndarray:
        """pi(x, z) = mu(x) s_x(z), rows ordered as ``starts``."""
        return self.weights[:, None] * self.s

    def start_row(self, x) -> int:
        i = self.spec.node_index(x) if not np.isscalar(x) else int(x)
        hits = np.flatnonzero(self.starts == i)
        if not len(hits):
            raise KeyError(f"{x} is not a start of this solution")
        return int(hits[0])

    def stop_measure(self, k) -> DiscreteMeasure:
        return DiscreteMeasure.from_array(self.spec, self.s[k])

    def terminal_law(self) -> np.ndarray:
        return self.weights @ self.s

    def residuals(self) -> dict:
        spec, P = self.spec, self.kernel.P
        n = spec.n
        bal = 0.0
        for k, x in enumerate(self.starts):
            lhs = self.m[k] + self.s[k] - P.T @ self.m[k]
            lhs[x] -= 1.0
            bal = max(bal, float(np.max(np.abs(lhs))))
        marg = float(np.max(np.abs(self.terminal_law() - self.problem.nu.to_array(spec))))
        mass = float(np.max(np.abs(self.s.sum(axis=1) - 1.0)))
        neg = float(max(0.0, -self.s.min(), -self.m.min()))
        bnd_m = float(np.max(np.abs(self.m[:, spec.boundary]), initial=0.0)) if n else 0.0
        return {"balance": bal, "marginal": marg, "mass": mass, "negativity": neg,
                "boundary_occupation": bnd_m}


def _unpack(prob: EmbeddingProblem, x: np.ndarray):
    n, K, blk = prob.n, len(prob.starts), prob.block
    interior = prob.interior_idx
    s = np.zeros((K, n))
    m = np.zeros((K, n))
    for k in range(K):
        s[k] = x[k * blk: k * blk + n]
        m[k, interior] = x[k * blk + n: (k + 1) * blk]
    return np.maximum(s, 0.0), np.maximum(m, 0.0)


def _expand(prob: EmbeddingProblem, s, m, J):
    """Replicate reduced per-orbit blocks to every start by the point group."""
    act = prob.spec.group_action
    mu_arr = prob.mu.to_array(prob.spec)
    starts, S, M, JJ = [], [], [], []
    for k, imgs in enumerate(prob.images):
        for img, g in imgs:
            perm = act[g]
            s_img = np.empty_like(s[k])
            m_img = np.empty_like(m[k])
            s_img[perm] = s[k]
            m_img[perm] = m[k]
            starts.append(img)
            S.append(s_img)
            M.append(m_img)
            if J is not None:
                j_img = np.empty_like(J[k])
                j_img[perm] = J[k]
                JJ.append(j_img)
    order = np.argsort(starts)
    starts = np.array(starts)[order]
    return (starts, mu_arr[starts], np.array(S)[order], np.array(M)[order],
            np.array(JJ)[order] if J is not None else None)


def _polish_duals(prob: EmbeddingProblem, sol: LpSolution, beta, orbit_mass):
    """Replace the balance-row duals by exact per-start stopping values.

    Simplex bases of this program are often badly conditioned, which leaves
    ~1e-8 noise in duals read off the basis. Keeping the marginal duals beta
    and setting J_x to the optimal-stopping value of beta - c(x, .) gives a
    dual point that is feasible by construction; the duality gap then
    measures how good beta is. The LP duals are overwritten accordingly.
    """
    spec = prob.spec
    K, n = len(prob.starts), prob.n
    P = prob.kernel.P.tocsr()
    cost = np.zeros((K, n)) if prob.zero_cost else cost_matrix(spec, prob.starts, prob.alpha)
    sgn = 1.0 if prob.sense == "min" else -1.0
    J = np.array([sgn * stopping_value(P, spec.interior, sgn * (beta - cost[k]))
                  for k in range(K)])
    y = np.array(sol.duals, dtype=float)
    y[: K * n] = -(orbit_mass[:, None] * J).ravel()
    lp = prob.lp
    sol.duals = y
    red = lp.c - lp.A.T @ y                       # >= 0 for min, <= 0 for max
    sol.reduced_costs = red
    sol.dual_objective = float(lp.rhs @ y)
    res = dict(sol.residuals or {})
    res["dual"] = float(max(0.0, -np.min(sgn * red, initial=0.0)))
    res["gap"] = abs(sol.objective - sol.dual_objective)
    res["complementarity"] = float(np.max(np.abs(sol.x * red), initial=0.0))
    sol.residuals = res
    return J


def _bounded_dual_resolve(prob: EmbeddingProblem, sol: LpSolution, lp_method, scale):
    """Re-solve with elastic marginal rows priced at B, which boxes beta into [-B, B].

    The program has degenerate optima whose dual face is unbounded; a simplex
    vertex there can carry potentials of order 1e10 and lose all precision.
    The penalty is exact once B exceeds some optimal |beta|, so B is raised
    until no elastic mass is used. Returns the solution restricted to the
    original variables and rows.
    """
    lp = prob.lp
    K, n = len(prob.starts), prob.n
    nm = lp.n_rows - K * n
    sgn = 1.0 if prob.sense == "min" else -1.0
    rows = np.concatenate([lp.rows, K * n + np.arange(nm), K * n + np.arange(nm)])
    cols = np.concatenate([lp.cols, lp.n_vars + np.arange(2 * nm)])
    vals = np.concatenate([lp.vals, np.ones(nm), -np.ones(nm)])
    B = 10.0 * scale
    for _ in range(6):
        c = np.concatenate([lp.c, np.full(2 * nm, sgn * B)])
        elastic = LinearProgram(n_vars=lp.n_vars + 2 * nm, rows=rows, cols=cols, vals=vals,
                                senses=lp.senses, rhs=lp.rhs, c=c, sense=lp.sense)
        out = solve_exact(elastic, method=lp_method)
        if out.status == OPTIMAL and np.max(out.x[lp.n_vars:], initial=0.0) <= RESIDUAL_TOL:
            x = out.x[: lp.n_vars]
            res = dict(out.residuals or {})
            res["primal"] = primal_residual(lp, x)
            res["dual_bound"] = B
            fixed = LpSolution(OPTIMAL, x=x, duals=out.duals, objective=float(lp.c @ x),
                               dual_objective=out.dual_objective, residuals=res,
                               iterations=out.iterations, message="bounded-dual re-solve")
            return fixed, np.append(out.duals[K * n:], 0.0)
        B *= 10.0
    log.info("bounded-dual re-solve did not settle; keeping the first solution")
    return sol, np.append(sol.duals[K * n:], 0.0)


def solve(prob: EmbeddingProblem, method: str = "exact", eps: float = 1e-2,
          max_iter: int = 500, tol: float = 1e-9, lp_method: str = "highs") -> StoppingSolution:
    lp = prob.lp
    if method == "exact":
        sol = solve_exact(lp, method=lp_method)
    elif method == "entropic":
        sol = solve_entropic(lp, eps=eps, max_iter=max_iter, tol=tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    if sol.status == INFEASIBLE:
        raise InfeasibleEmbedding("no stopping rule embeds nu from mu on this domain",
                                  certificate=sol.certificate)
    if sol.x is None:
        raise NotOptimal(f"LP status {sol.status}")
    s, m = _unpack(prob, sol.x)
    K, n = len(prob.starts), prob.n
    y = sol.duals
    u = y[: K * n].reshape(K, n)
    beta = np.append(y[K * n:], 0.0)
    orbit_mass = np.array([sum(prob.mu.to_array(prob.spec)[i] for i, _ in imgs)
                           for imgs in prob.images])
    J = -u / orbit_mass[:, None]
    if method == "exact":
        J = _polish_duals(prob, sol, beta, orbit_mass)
        scale = max(1.0, float(np.max(np.abs(lp.c), initial=0.0) / max(orbit_mass.min(), 1e-300)))
        if max(np.max(np.abs(J)), np.max(np.abs(beta))) > BOUNDED_DUAL_RATIO * scale:
            sol, beta = _bounded_dual_resolve(prob, sol, lp_method, scale)
            J = _polish_duals(prob, sol, beta, orbit_mass)
    if prob.symmetry_reduction:
        starts, weights, s, m, J = _expand(prob, s, m, J)
    else:
        starts, weights = prob.starts, prob.weights
    return StoppingSolution(prob, starts, weights, s, m, float(sol.objective), sol.status,
                            method, sol, beta, J)


@dataclass
class FeasibilityResult:
    feasible: bool
    certificate: np.ndarray | None
    problem: EmbeddingProblem
    lp: LpSolution

    def __bool__(self):
        return self.feasible


def feasibility(spec, kernel, mu, nu, allow_boundary_nu: bool = True,
                lp_method: str = "highs") -> FeasibilityResult:
    """Does some (randomized) stopping rule, killed at the boundary, embed nu from mu?"""
    prob = build_problem(spec, kernel, mu, nu, alpha=1.0, sense="min",
                         allow_boundary_nu=allow_boundary_nu, zero_cost=True)
    sol = solve_exact(prob.lp, method=lp_method)
    if sol.status == OPTIMAL:
        return FeasibilityResult(True, None, prob, sol)
    return FeasibilityResult(False, sol.certificate, prob, sol)


@dataclass
class DualityReport:
    sense: str
    primal: float
    dual: float
    gap: float
    majorant_violation: float
    superharmonic_violation: float
    n_violations: int
    tol: float
    per_start_value: np.ndarray
    notes: str = ""

    @property
    def ok(self) -> bool:
        return self.gap <= 1e-8 and self.n_violations == 0

    def to_dict(self) -> dict:
        return {"sense": self.sense, "primal": self.primal, "dual": self.dual, "gap": self.gap,
                "majorant_violation": self.majorant_violation,
                "superharmonic_violation": self.superharmonic_violation,
                "n_violations": self.n_violations, "tol": self.tol, "ok": self.ok,
                "notes": self.notes}


def verify_dual(solution: StoppingSolution, tol: float | None = None) -> DualityReport:
    """Check the dual potentials against the cone constraints and the duality gap.

    min: J_x >= beta - c(x, .) everywhere and J_x >= P J_x at interior nodes.
    max: J_x <= beta - c(x, .) and J_x <= P J_x (the reversed inequalities).
    Dual value = sum beta dnu - sum_x mu(x) J_x(x).
    """
    if solution.method == "exact" and solution.status != OPTIMAL:
        raise NotOptimal(f"solution status {solution.status}")
    if solution.J is None:
        raise NotOptimal("solution carries no dual potentials")
    prob = solution.problem
    if prob.symmetry_reduction:
        raise NotOptimal("dual verification needs a full (non-reduced) build")
    spec, P = prob.spec, prob.kernel.P
    cost = np.zeros((len(solution.starts), spec.n)) if prob.zero_cost else \
        cost_matrix(spec, solution.starts, prob.alpha)
    scale = max(1.0, float(np.max(np.abs(cost), initial=0.0)))
    tol = 1e-8 * scale if tol is None else tol
    sgn = 1.0 if prob.sense == "min" else -1.0
    beta, J = solution.beta, solution.J
    interior = spec.interior
    worst_maj, worst_sh, count = 0.0, 0.0, 0
    for k in range(len(solution.starts)):
        maj = sgn * (beta - cost[k] - J[k])          # > 0 means violation
        sh = sgn * ((P @ J[k]) - J[k])
        sh[~interior] = 0.0
        worst_maj = max(worst_maj, float(maj.max()))
        worst_sh = max(worst_sh, float(sh.max()))
        count += int((maj > tol).sum() + (sh > tol).sum())
    nu_arr = prob.nu.to_array(spec)
    per_start = J[np.arange(len(solution.starts)), solution.starts]
    dual = float(beta @ nu_arr - solution.weights @ per_start)
    primal = float(solution.objective)
    return DualityReport(prob.sense, primal, dual, abs(primal - dual), max(worst_maj, 0.0),
                         max(worst_sh, 0.0), count, tol, per_start,
                         notes="min: J >= beta - c, J >= PJ; max: inequalities reversed")


def detect_multiple_optima(prob: EmbeddingProblem, solution: StoppingSolution,
                           delta: float = 1e-10, mass_tol: float = 1e-9) -> bool:
    """Heuristic: re-solve with the objective tilted by +-delta*|z|; differing supports flag ties."""
    lp = prob.lp
    norms = np.tile(np.concatenate([prob.spec.norms, np.zeros(int(prob.spec.interior.sum()))]),
                    len(prob.starts))
    base = solution.lp.x > mass_tol
    for sgn in (1.0, -1.0):
        tilted = solve_exact(lp.with_objective(lp.c + sgn * delta * norms))
        if tilted.status == OPTIMAL and np.any((tilted.x > mass_tol) != base):
            log.info("distinct optimal supports detected under objective tilt")
            return True
    return False


def group_average(solution: StoppingSolution) -> StoppingSolution:
    """Average the stopping rule over the point group: s'_x = avg_M M^{-1}_# s_{Mx}."""
    spec = solution.spec
    act = spec.group_action
    row_of = {int(x): k for k, x in enumerate(solution.starts)}
    s_new = np.zeros_like(solution.s)
    m_new = np.zeros_like(solution.m)
    for k, x in enumerate(solution.starts):
        for g in range(act.shape[0]):
            kk = row_of[int(act[g, x])]
            # s_{Mx}(M z) pulled back to z
            s_new[k] += solution.s[kk][act[g]]
            m_new[k] += solution.m[kk][act[g]]
    s_new /= act.shape[0]
    m_new /= act.shape[0]
    cost = cost_matrix(spec, solution.starts, solution.problem.alpha)
    obj = float(np.sum(solution.weights[:, None] * cost * s_new))
    return StoppingSolution(solution.problem, solution.starts, solution.weights, s_new, m_new,
                            obj, solution.status, solution.method + "+group_average",
                            solution.lp, None, None)
