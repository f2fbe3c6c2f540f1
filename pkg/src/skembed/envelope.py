"""Largest discretely-subharmonic minorant of a grid function.

Two notions: the multi-radius shell iteration f_n(x) = min_r avg_{|z-x|=r} f_{n-1}(z)
over balls contained in the domain, and the one-step kernel fixed point
g = min(f, P g) which matches the walk used by the embedding program. The
one-step version is the reference; the shell version is compared to it with
a Lipschitz-scaled tolerance.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import BallEscapesDomain, EmptyShell, NotConverged
from .lattice import LatticeSpec, WalkKernel
from .lp import OPTIMAL, LinearProgram, solve_exact
from .stopping import stopping_value

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10


@dataclass
class GridFunction:
    spec: LatticeSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.spec.n,):
            raise ValueError("grid function needs one value per node")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    @classmethod
    def from_callable(cls, spec: LatticeSpec, fun):
        return cls(spec, np.array([fun(p) for p in spec.positions]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"z{i + 1}" for i in range(self.spec.d)] + ["value"])
        for z, v in zip(self.spec.nodes, self.values):
            w.writerow(list(z) + [f"{v:.12g}"])
        return buf.getvalue()


def _values(f):
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


@dataclass
class SphereTable:
    """Admissible lattice spheres per node in CSR form.

    Node x owns spheres sph_ptr[x]:sph_ptr[x+1]; sphere s has radius radii[s]
    and members members[mem_ptr[s]:mem_ptr[s+1]].
    """
    sph_ptr: np.ndarray
    mem_ptr: np.ndarray
    members: np.ndarray
    radii: np.ndarray


@lru_cache(maxsize=16)
def sphere_table(spec: LatticeSpec) -> SphereTable:
    """Exact-distance spheres |z - x| = r whose closed ball lies in the node set."""
    d = spec.d
    R = int(np.ceil(2 * spec.R_O / spec.h)) + 1
    grid = np.stack(np.meshgrid(*[np.arange(-R, R + 1)] * d, indexing="ij"), -1).reshape(-1, d)
    sq = (grid ** 2).sum(axis=1)
    order = np.argsort(sq, kind="stable")
    grid, sq = grid[order], sq[order]
    levels, first = np.unique(sq, return_index=True)
    bounds = np.append(first, len(sq))
    idx = spec.index
    sph_ptr = [0]
    mem_ptr = [0]
    members, radii = [], []
    rmax_sq = (spec.R_O / spec.h) ** 2 + 1e-9
    for x in spec.coords:
        count = 0
        for li in range(1, len(levels)):
            if levels[li] > rmax_sq:
                break
            pts = grid[bounds[li]:bounds[li + 1]] + x
            ids = [idx.get(tuple(int(c) for c in p), -1) for p in pts]
            if min(ids) < 0:
                break          # this sphere, hence every larger ball, leaves the domain
            members.extend(ids)
            mem_ptr.append(len(members))
            radii.append(spec.h * np.sqrt(levels[li]))
            count += 1
        sph_ptr.append(sph_ptr[-1] + count)
    return SphereTable(np.array(sph_ptr, dtype=np.int64), np.array(mem_ptr, dtype=np.int64),
                       np.array(members, dtype=np.int64), np.array(radii))


def sphere_average(f, x, r: float, spec: LatticeSpec | None = None) -> float:
    """Mean of f over nodes at distance exactly r from x; r = 0 returns f(x)."""
    spec = f.spec if isinstance(f, GridFunction) else spec
    vals = _values(f)
    xi = spec.node_index(x)
    if r == 0:
        return float(vals[xi])
    xc = spec.coords[xi]
    k = (r / spec.h) ** 2
    R = int(np.floor(r / spec.h + 1e-9))
    rng = np.arange(-R, R + 1)
    offs = np.stack(np.meshgrid(*[rng] * spec.d, indexing="ij"), -1).reshape(-1, spec.d)
    sq = (offs ** 2).sum(axis=1)
    ball = offs[sq <= k + 1e-9]
    for p in ball:
        if not spec.contains(xc + p):
            raise BallEscapesDomain(f"closed ball of radius {r} around {tuple(xc)} leaves O")
    shell = offs[np.abs(sq - k) <= 1e-9]
    if not len(shell):
        raise EmptyShell(f"no lattice node at distance {r} from {tuple(xc)}")
    return float(np.mean([vals[spec.node_index(xc + p)] for p in shell]))


@dataclass
class EnvelopeResult:
    values: np.ndarray
    iterations: int
    max_delta: float
    converged: bool
    monotone: bool = True
    history: list = field(default_factory=list)

    def summary_json(self) -> str:
        return json.dumps({"iters": self.iterations, "max_delta": self.max_delta,
                           "converged": self.converged})


def envelope_iterate(f, spec: LatticeSpec | None = None, max_iter: int | None = None,
                     tol: float = DEFAULT_TOL, backend: str | None = None,
                     keep_history: bool = False) -> EnvelopeResult:
    """Shell iteration from f_0 = f until the largest change is <= tol."""
    spec = f.spec if isinstance(f, GridFunction) else spec
    g = _values(f).copy()
    max_iter = 10 * spec.n if max_iter is None else max_iter
    tab = sphere_table(spec)
    hist = [g.copy()] if keep_history else []
    monotone = True
    delta = np.inf
    for it in range(1, max_iter + 1):
        new = kernels.shell_sweep(g, tab.sph_ptr, tab.mem_ptr, tab.members, backend=backend)
        if np.any(new > g):
            monotone = False
        delta = float(np.max(g - new, initial=0.0))
        g = new
        if keep_history:
            hist.append(g.copy())
        if delta <= tol:
            return EnvelopeResult(g, it, delta, True, monotone, hist)
    log.info("shell envelope not converged after %d sweeps (delta %.3e)", max_iter, delta)
    return EnvelopeResult(g, max_iter, delta, False, monotone, hist)


def envelope_onestep_oracle(f, kernel: WalkKernel, max_iter: int | None = None,
                            tol: float = DEFAULT_TOL, polish: bool = True) -> EnvelopeResult:
    """Largest g <= f with g <= P g at interior nodes.

    Jacobi sweeps g <- min(f, P g) from g = f; once the change is below tol the
    continuation set {g < f} is read off and the fixed point is solved exactly
    by policy iteration (the sweeps alone approach it only geometrically).
    """
    spec = kernel.spec
    fv = _values(f)
    P = kernel.P
    interior = spec.interior
    max_iter = 10 * spec.n if max_iter is None else max_iter
    g = fv.copy()
    delta = np.inf
    monotone = True
    it = 0
    for it in range(1, max_iter + 1):
        new = np.where(interior, np.minimum(fv, P @ g), fv)
        if np.any(new > g):
            monotone = False
        delta = float(np.max(g - new, initial=0.0))
        g = new
        if delta <= tol:
            break
    else:
        raise NotConverged(f"one-step envelope not converged after {max_iter} sweeps", last=g)
    if polish:
        cont = interior & (g < fv - 1e-12 * np.maximum(1.0, np.abs(fv)))
        exact = -stopping_value(P, interior, -fv, cont0=cont)
        if np.max(np.abs(exact - g)) > 1e3 * tol * max(1.0, it):
            log.info("polish moved the envelope by %.3e", np.max(np.abs(exact - g)))
        g = np.minimum(exact, fv)
    return EnvelopeResult(g, it, delta, True, monotone)


def envelope_lp(f, kernel: WalkKernel) -> np.ndarray:
    """LP spot-check: maximize sum g subject to g <= f and g <= P g at interior nodes."""
    spec = kernel.spec
    fv = _values(f)
    n = spec.n
    inter = np.flatnonzero(spec.interior)
    P = kernel.P.tocsr()
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.ones(n)]
    Pi = P[inter]
    r_loc, c_to = Pi.nonzero()
    pv = np.asarray(Pi[r_loc, c_to]).ravel()
    rows += [n + np.arange(len(inter)), n + r_loc]
    cols += [inter, c_to]
    vals += [np.ones(len(inter)), -pv]
    prog = LinearProgram(n_vars=n, rows=np.concatenate(rows), cols=np.concatenate(cols),
                         vals=np.concatenate(vals), senses=["<="] * (n + len(inter)),
                         rhs=np.concatenate([fv, np.zeros(len(inter))]), c=np.ones(n),
                         sense="max", lb=np.full(n, -np.inf))
    sol = solve_exact(prog)
    if sol.status != OPTIMAL:
        raise RuntimeError(f"envelope LP ended with {sol.status}")
    return sol.x


def reward(beta, x, alpha: float, spec: LatticeSpec, zero_cost: bool = False) -> np.ndarray:
    bv = _values(beta)
    if zero_cost:
        return bv.copy()
    xi = spec.node_index(x)
    dist = spec.h * np.linalg.norm(spec.coords - spec.coords[xi], axis=1)
    return bv - dist ** alpha


def value_function(beta, x, alpha: float, sense: str, kernel: WalkKernel,
                   zero_cost: bool = False) -> np.ndarray:
    """J_x for reward R = beta - |x - .|^alpha.

    min: smallest superharmonic majorant of R, i.e. -envelope(-R).
    max: largest subharmonic minorant of R, i.e. envelope(R).
    """
    R = reward(beta, x, alpha, kernel.spec, zero_cost)
    if sense == "min":
        return -envelope_onestep_oracle(-R, kernel).values
    if sense == "max":
        return envelope_onestep_oracle(R, kernel).values
    raise ValueError("sense must be 'min' or 'max'")
