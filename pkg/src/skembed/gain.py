"""Gain function G(x, psi_y) and its extremes over reachable measures with a fixed radial profile.

Positions are physical (node coordinates times h). For alpha = 2 the gain does
not depend on x (expand the square around the barycenter), which makes it the
degenerate case of the monotonicity statement.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMeasure, ProfileUnreachable, ZeroVector
from .lattice import LatticeSpec, WalkKernel, cos_angle
from .lp import INFEASIBLE, OPTIMAL, LinearProgram, solve_exact
from .measures import DiscreteMeasure, RadialProfile, barycenter, power_moment
from .stopping import replay

log = logging.getLogger(__name__)

STRICT_TOL = 1e-9
PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"


def gain(x, psi: DiscreteMeasure, alpha: float, h: float = 1.0) -> float:
    """int |x - z|^alpha dpsi(z) - |x - y|^alpha with y the barycenter of psi."""
    if not len(psi) or psi.total <= 0:
        raise EmptyMeasure("gain of an empty measure")
    psi = psi.normalized()
    y = barycenter(psi)
    xv = np.asarray(x, dtype=float)
    return power_moment(psi, xv, alpha, h) - float((h * np.linalg.norm(xv - y)) ** alpha)


def h_field(z, alpha: float) -> float:
    """h(z) = -alpha |z|^(alpha-2) z_d."""
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(z)
    if r == 0:
        raise ZeroVector("h_field is singular at the origin")
    return float(-alpha * r ** (alpha - 2) * z[-1])


def laplacian_h(z, alpha: float, d: int | None = None) -> float:
    """Closed form -alpha (alpha-2) (alpha+d-2) |z|^(alpha-4) z_d."""
    z = np.asarray(z, dtype=float)
    d = len(z) if d is None else d
    r = np.linalg.norm(z)
    if r == 0:
        raise ZeroVector("laplacian_h is singular at the origin")
    return float(-alpha * (alpha - 2) * (alpha + d - 2) * r ** (alpha - 4) * z[-1])


def fd_laplacian(fun, z, step: float) -> float:
    """Second-order central difference Laplacian of a scalar function."""
    z = np.asarray(z, dtype=float)
    f0 = fun(z)
    acc = 0.0
    for i in range(len(z)):
        e = np.zeros(len(z))
        e[i] = step
        acc += fun(z + e) - 2 * f0 + fun(z - e)
    return acc / step ** 2


@dataclass
class GainBounds:
    lower: float
    upper: float
    sigma_lower: DiscreteMeasure
    sigma_upper: DiscreteMeasure
    lp_lower: float
    lp_upper: float

    def check(self, x, alpha, h=1.0, tol=1e-10) -> bool:
        ok_l = abs(gain(x, self.sigma_lower, alpha, h) - self.lower) <= tol
        ok_u = abs(gain(x, self.sigma_upper, alpha, h) - self.upper) <= tol
        return ok_l and ok_u and self.lower <= self.upper + 1e-10


def _profile_rows(spec: LatticeSpec, profile):
    target = np.zeros(len(spec.shells))
    for r, mass in dict(profile).items():
        si = spec.shell_index_for_radius(float(r))
        if abs(spec.shells[si].radius - float(r)) > 1e-9 * max(1.0, float(r)):
            raise ValueError(f"profile radius {r} is not a shell radius of this lattice")
        target[si] += mass
    return target


def reachable_program(spec: LatticeSpec, kernel: WalkKernel, y: int, profile, cost):
    """Variables (s over all nodes, m over interior nodes) for the single start y."""
    n = spec.n
    interior = np.flatnonzero(spec.interior)
    n_int = len(interior)
    Pi = kernel.P.tocsr()[interior]
    w_loc, z_to = Pi.nonzero()
    pv = np.asarray(Pi[w_loc, z_to]).ravel()
    rows = [np.arange(n), interior, z_to]
    cols = [np.arange(n), n + np.arange(n_int), n + w_loc]
    vals = [np.ones(n), np.ones(n_int), -pv]
    rhs = np.zeros(n)
    rhs[y] = 1.0
    target = _profile_rows(spec, profile)
    # the shell rows sum to total(s) = 1, already implied by balance: drop the last
    n_sh = len(spec.shells) - 1
    keep = spec.shell_of < n_sh
    rows.append(n + spec.shell_of[keep])
    cols.append(np.flatnonzero(keep))
    vals.append(np.ones(int(keep.sum())))
    c = np.concatenate([cost, np.zeros(n_int)])
    return LinearProgram(n_vars=n + n_int, rows=np.concatenate(rows), cols=np.concatenate(cols),
                         vals=np.concatenate(vals), senses=["="] * (n + n_sh),
                         rhs=np.concatenate([rhs, target[:n_sh]]), c=c, sense="min",
                         meta={"kind": "reachable-profile"})


def _replayed_measure(spec, kernel, y, x_var):
    """Exact stopped law of the Markov rule read off an LP solution."""
    n = spec.n
    s = np.maximum(x_var[:n], 0.0)
    m = np.zeros(n)
    m[spec.interior] = np.maximum(x_var[n:], 0.0)
    arrive = s + m
    rho = np.ones(n)
    np.divide(s, arrive, out=rho, where=arrive > 0)
    rho[spec.boundary] = 1.0
    e = np.zeros(n)
    e[y] = 1.0
    stop, _ = replay(kernel.P, rho, e)
    return DiscreteMeasure.from_array(spec, np.where(stop > 1e-15, stop, 0.0))


def gain_bounds(x, y, profile, spec: LatticeSpec, kernel: WalkKernel, alpha: float) -> GainBounds:
    """G_lower / G_upper over stopped laws from delta_y with the given shell profile.

    Both extremes are reported from the exact replay of the optimal Markov
    rule, so re-evaluating ``gain`` at the attaining measures reproduces them.
    """
    xv = np.asarray(x, dtype=float)
    if not np.any(xv):
        raise ZeroVector("x must be nonzero")
    yi = spec.node_index(y)
    if not spec.interior[yi]:
        raise ValueError("y must be an interior node")
    cost = (spec.h * np.linalg.norm(spec.coords - xv, axis=1)) ** alpha
    prog = reachable_program(spec, kernel, yi, profile, cost)
    base = float((spec.h * np.linalg.norm(xv - spec.coords[yi])) ** alpha)
    out = {}
    for sense in ("min", "max"):
        sol = solve_exact(prog.with_objective(prog.c, sense))
        if sol.status == INFEASIBLE:
            raise ProfileUnreachable("no stopping rule from y realizes this profile",
                                     certificate=sol.certificate)
        if sol.status != OPTIMAL:
            raise RuntimeError(f"profile LP ended with {sol.status}")
        sigma = _replayed_measure(spec, kernel, yi, sol.x)
        out[sense] = (gain(xv, sigma, alpha, spec.h), sigma, sol.objective - base)
    lo, hi = out["min"], out["max"]
    gb = GainBounds(lo[0], hi[0], lo[1], hi[1], lo[2], hi[2])
    for name, a, b in (("lower", gb.lower, gb.lp_lower), ("upper", gb.upper, gb.lp_upper)):
        if abs(a - b) > 1e-8 * max(1.0, abs(b)):
            log.warning("replayed %s bound %.12g differs from LP value %.12g", name, a, b)
    return gb


@dataclass
class ScanTable:
    alpha: float
    rows: list            # (cos_angle, dist_xy, G_lower, G_upper, x)
    verdict_lower: str
    verdict_upper: str

    @property
    def verdict(self) -> str:
        vs = {self.verdict_lower, self.verdict_upper}
        if FAIL in vs:
            return FAIL
        if INCONCLUSIVE in vs:
            return INCONCLUSIVE
        return PASS

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cos_angle", "dist_xy", "G_lower", "G_upper", "verdict"])
        for c, dist, lo, hi, _ in self.rows:
            w.writerow([f"{c:.12g}", f"{dist:.12g}", f"{lo:.12g}", f"{hi:.12g}", self.verdict])
        return buf.getvalue()


def monotonicity_verdict(values, alpha: float, tol: float = STRICT_TOL) -> str:
    """Strict monotonicity in scan order: decreasing for alpha < 2, increasing for alpha > 2."""
    diffs = np.diff(np.asarray(values, dtype=float))
    if alpha == 2:
        return PASS if np.all(np.abs(diffs) <= tol) else FAIL
    if alpha > 2:
        diffs = -diffs
    if np.any(diffs > tol):
        return FAIL
    if np.any(diffs > -tol):
        return INCONCLUSIVE
    return PASS


def monotonicity_scan(r_x: float, y, profile, spec: LatticeSpec, kernel: WalkKernel,
                      alpha: float, tol: float = STRICT_TOL) -> ScanTable:
    """Gain bounds for starts x on the exact lattice sphere |x| = r_x, ordered by |x - y|.

    Starts at equal distance from y are merged after checking that they agree.
    """
    yv = np.asarray(y, dtype=float)
    norms = spec.norms
    cand = np.flatnonzero(np.abs(norms - r_x) <= 1e-9 * max(1.0, r_x))
    if not len(cand):
        raise ValueError(f"no lattice node has norm exactly {r_x}")
    dist = spec.h * np.linalg.norm(spec.coords[cand] - yv, axis=1)
    groups: dict = {}
    for i, dd in zip(cand, dist):
        groups.setdefault(round(float(dd), 9), []).append(int(i))
    rows = []
    for dd in sorted(groups):
        vals = []
        for i in groups[dd]:
            gb = gain_bounds(spec.coords[i], y, profile, spec, kernel, alpha)
            vals.append((gb.lower, gb.upper, i))
        lo = [v[0] for v in vals]
        hi = [v[1] for v in vals]
        if max(lo) - min(lo) > tol or max(hi) - min(hi) > tol:
            log.warning("starts at distance %.6g from y disagree beyond %g", dd, tol)
        i0 = vals[0][2]
        c = cos_angle(spec.coords[i0], yv) if np.any(yv) else float("nan")
        rows.append((c, dd, float(np.mean(lo)), float(np.mean(hi)), spec.nodes[i0]))
    vl = monotonicity_verdict([r[2] for r in rows], alpha, tol)
    vu = monotonicity_verdict([r[3] for r in rows], alpha, tol)
    return ScanTable(alpha, rows, vl, vu)
