"""Stop/pass supports of a stopping rule, spherical-cap checks, and replayable policies.

Regimes (sign of the cap relative to the start x):

* ``min_alpha_lt2`` and ``max_alpha_gt2``: on every shell the walk stops on a
  cap pointing toward x, so every stop node makes a smaller angle with x than
  every pass node.
* ``min_alpha_gt2`` and ``max_alpha_lt2``: the barrier is reversed and the cap
  points away from x.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .embed import EmbeddingProblem, StoppingSolution
from .errors import NotOptimal, WrongRegime, ZeroStart
from .lattice import LatticeSpec, WalkKernel, cos_angle
from .lp import OPTIMAL
from .measures import DiscreteMeasure, common_mass
from .stopping import replay

log = logging.getLogger(__name__)

REPLAYED = "Replayed"
MASS_TOL = 1e-9
PARALLEL_EPS = 1e-12
RANDOM_EPS = 1e-9

TOWARD = ("min_alpha_lt2", "max_alpha_gt2")
AWAY = ("min_alpha_gt2", "max_alpha_lt2")
REGIMES = TOWARD + AWAY


def regime_for(sense: str, alpha: float) -> str:
    if alpha == 2:
        raise WrongRegime("alpha = 2 has no cap structure (every embedding costs the same)")
    return f"{sense}_alpha_{'lt2' if alpha < 2 else 'gt2'}"


def _require_solved(solution):
    if solution.status not in (OPTIMAL, REPLAYED):
        raise NotOptimal(f"solution status {solution.status}")


@dataclass
class Supports:
    start: int
    stop: np.ndarray      # node indices
    passing: np.ndarray   # interior node indices with outflow


def extract_supports(solution: StoppingSolution, mass_tol: float = MASS_TOL) -> list[Supports]:
    _require_solved(solution)
    if not mass_tol > 0:
        raise ValueError("mass_tol must be positive")
    out = []
    interior = solution.spec.interior
    for k, x in enumerate(solution.starts):
        stop = np.flatnonzero(solution.s[k] > mass_tol)
        passing = np.flatnonzero((solution.m[k] > mass_tol) & interior)
        out.append(Supports(int(x), stop, passing))
    return out


@dataclass
class CapRow:
    start: tuple
    shell_r: float
    stop_cos: float        # min (toward) or max (away) cos over stop nodes
    pass_cos: float        # max (toward) or min (away) cos over pass nodes
    violation: bool
    parallel_excluded: int
    n_stop: int
    n_pass: int


@dataclass
class CapReport:
    regime: str
    angular_tol: float | None
    mass_tol: float
    advisory: bool
    rows: list = field(default_factory=list)

    @property
    def n_violations(self) -> int:
        return sum(r.violation for r in self.rows)

    def violations_for(self, start) -> int:
        return sum(r.violation for r in self.rows if r.start == tuple(start))

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        d = len(self.rows[0].start)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"start_z{i + 1}" for i in range(d)] +
                   ["shell_r", "stop_min_cos" if self.regime in TOWARD else "stop_max_cos",
                    "pass_max_cos" if self.regime in TOWARD else "pass_min_cos",
                    "violation", "parallel_excluded"])
        for r in self.rows:
            w.writerow(list(r.start) + [f"{r.shell_r:.12g}", f"{r.stop_cos:.12g}",
                                        f"{r.pass_cos:.12g}", int(r.violation),
                                        r.parallel_excluded])
        return buf.getvalue()


def _cosines(spec: LatticeSpec, x: int, idx: np.ndarray) -> np.ndarray:
    pos = spec.coords[idx].astype(float)
    xv = spec.coords[x].astype(float)
    nz = np.linalg.norm(pos, axis=1)
    c = np.full(len(idx), np.nan)
    ok = nz > 0
    c[ok] = pos[ok] @ xv / (nz[ok] * np.linalg.norm(xv))
    return np.clip(c, -1.0, 1.0)


def _shell_tol(spec, r, angular_tol):
    if angular_tol is not None:
        return float(angular_tol)
    return spec.h / r


def _shell_groups(spec: LatticeSpec, x: int, sup: Supports):
    """Per nonzero shell: (radius, stop idx, pass idx) with parallel nodes split off."""
    shell_of = spec.shell_of
    for si in np.unique(np.concatenate([shell_of[sup.stop], shell_of[sup.passing]])):
        r = spec.shells[si].radius
        if r == 0:
            continue
        st = sup.stop[shell_of[sup.stop] == si]
        ps = sup.passing[shell_of[sup.passing] == si]
        yield si, r, st, ps


def _split_parallel(spec, x, idx):
    c = _cosines(spec, x, idx)
    par = np.abs(c) > 1 - PARALLEL_EPS
    return idx, c, par


def verify_cap_structure(solution: StoppingSolution, regime: str,
                         angular_tol: float | None = None,
                         mass_tol: float = MASS_TOL) -> CapReport:
    """Check that on every shell the stop cap is separated from the pass nodes.

    ``angular_tol`` is a tolerance on cosines; by default the one-cell angle
    h / r of the shell. In d = 3 nodes parallel to x are dropped; in d = 2 they
    are counted only and the report is advisory.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    spec = solution.spec
    toward = regime in TOWARD
    report = CapReport(regime, angular_tol, mass_tol, advisory=spec.d == 2)
    for sup in extract_supports(solution, mass_tol):
        x = sup.start
        if not np.any(spec.coords[x]):
            raise ZeroStart("cap structure is undefined for a start at the origin")
        for _, r, st, ps in _shell_groups(spec, x, sup):
            tol = _shell_tol(spec, r, angular_tol)
            _, cs, par_s = _split_parallel(spec, x, st)
            _, cp, par_p = _split_parallel(spec, x, ps)
            n_par = int(par_s.sum() + par_p.sum())
            if spec.d == 3:
                cs, cp = cs[~par_s], cp[~par_p]
            if toward:
                sc = float(cs.min()) if len(cs) else np.nan
                pc = float(cp.max()) if len(cp) else np.nan
                bad = bool(len(cs) and len(cp) and pc > sc + tol)
            else:
                sc = float(cs.max()) if len(cs) else np.nan
                pc = float(cp.min()) if len(cp) else np.nan
                bad = bool(len(cs) and len(cp) and pc < sc - tol)
            report.rows.append(CapRow(tuple(int(c) for c in spec.coords[x]), r, sc, pc, bad,
                                      n_par, len(cs), len(cp)))
    return report


def forbidden_pairs(solution: StoppingSolution, x, regime: str,
                    angular_tol: float | None = None, mass_tol: float = MASS_TOL):
    """Same-shell (pass node, stop node) pairs where the pass node sits inside the stop cap."""
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    spec = solution.spec
    k = solution.start_row(x)
    sup = extract_supports(solution, mass_tol)[k]
    xi = sup.start
    toward = regime in TOWARD
    pairs = []
    for _, r, st, ps in _shell_groups(spec, xi, sup):
        tol = _shell_tol(spec, r, angular_tol)
        _, cs, par_s = _split_parallel(spec, xi, st)
        _, cp, par_p = _split_parallel(spec, xi, ps)
        if spec.d == 3:
            st, cs = st[~par_s], cs[~par_s]
            ps, cp = ps[~par_p], cp[~par_p]
        for zp, c1 in zip(ps, cp):
            for zs, c2 in zip(st, cs):
                if (toward and c1 > c2 + tol) or (not toward and c1 < c2 - tol):
                    pairs.append((spec.nodes[zp], spec.nodes[zs]))
    return pairs


@dataclass
class BarrierPolicy:
    """rho[k, z]: probability of stopping on arrival at z for start k (NaN = never reached)."""
    spec: LatticeSpec
    starts: np.ndarray
    weights: np.ndarray
    rho: np.ndarray

    def rho_filled(self) -> np.ndarray:
        """rho with unreached nodes set to 1 (harmless: they carry no mass)."""
        return np.where(np.isnan(self.rho), 1.0, self.rho)

    def to_dict(self) -> dict:
        out = []
        for k, x in enumerate(self.starts):
            ok = np.flatnonzero(~np.isnan(self.rho[k]))
            out.append({"start": list(self.spec.nodes[x]), "mass": float(self.weights[k]),
                        "policy": [{"z": list(self.spec.nodes[i]),
                                    "rho": float(f"{self.rho[k, i]:.12g}")} for i in ok]})
        return {"lattice": self.spec.to_dict(), "starts": out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "BarrierPolicy":
        spec = LatticeSpec.from_dict(data["lattice"])
        starts, weights = [], []
        rho = np.full((len(data["starts"]), spec.n), np.nan)
        for k, entry in enumerate(data["starts"]):
            starts.append(spec.node_index(entry["start"]))
            weights.append(float(entry["mass"]))
            for atom in entry["policy"]:
                rho[k, spec.node_index(atom["z"])] = float(atom["rho"])
        return cls(spec, np.array(starts), np.array(weights), rho)


def build_policy(solution: StoppingSolution) -> BarrierPolicy:
    """rho = s / (s + outflow); 1 when s > 0 and nothing flows out, 1 on the boundary."""
    _require_solved(solution)
    s, m = solution.s, solution.m
    arrive = s + m
    rho = np.full(s.shape, np.nan)
    pos = arrive > 0
    rho[pos] = s[pos] / arrive[pos]
    rho[:, solution.spec.boundary] = 1.0
    return BarrierPolicy(solution.spec, solution.starts.copy(), solution.weights.copy(), rho)


def replay_policy(policy: BarrierPolicy, kernel: WalkKernel):
    """Exact linear replay: per start, (stop law, occupation)."""
    n = policy.spec.n
    S = np.zeros((len(policy.starts), n))
    M = np.zeros_like(S)
    rho = policy.rho_filled()
    for k, x in enumerate(policy.starts):
        e = np.zeros(n)
        e[x] = 1.0
        S[k], M[k] = replay(kernel.P, rho[k], e)
    return S, M


def replay_error(solution: StoppingSolution) -> float:
    S, _ = replay_policy(build_policy(solution), solution.kernel)
    return float(np.max(np.abs(S - solution.s)))


def replayed_solution(spec: LatticeSpec, kernel: WalkKernel, mu: DiscreteMeasure, rho,
                      alpha: float = 1.0, sense: str = "min") -> StoppingSolution:
    """StoppingSolution generated by a hand-written Markov policy (one rho row per start,
    or a single row shared by all starts)."""
    from .embed import cost_matrix

    mu_a = mu.to_array(spec)
    starts = np.flatnonzero(mu_a > 0)
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    if rho.shape[0] == 1:
        rho = np.repeat(rho, len(starts), axis=0)
    rho = rho.copy()
    rho[:, spec.boundary] = 1.0
    pol = BarrierPolicy(spec, starts, mu_a[starts], rho)
    S, M = replay_policy(pol, kernel)
    nu = DiscreteMeasure.from_array(spec, mu_a[starts] @ S, tol=1e-15)
    prob = EmbeddingProblem(spec, kernel, mu, nu, float(alpha), sense, starts, mu_a[starts])
    obj = float(np.sum(mu_a[starts][:, None] * cost_matrix(spec, starts, alpha) * S))
    return StoppingSolution(prob, starts, mu_a[starts], S, M, obj, REPLAYED, "replay", None)


@dataclass
class RandomizationProfile:
    per_start: np.ndarray          # fraction of stop mass at randomized nodes
    per_shell: dict                # shell radius -> fraction of mu-weighted stop mass
    overall: float                 # mu-weighted


def randomization_profile(solution: StoppingSolution, mass_tol: float = MASS_TOL) -> RandomizationProfile:
    spec = solution.spec
    s = np.where(solution.s > mass_tol, solution.s, 0.0)
    m = np.where(solution.m > mass_tol, solution.m, 0.0)
    arrive = s + m
    rho = np.zeros_like(s)
    np.divide(s, arrive, out=rho, where=arrive > 0)
    rand = (rho > 0) & (rho < 1 - RANDOM_EPS)
    rand[:, spec.boundary] = False
    rmass = np.where(rand, s, 0.0)
    tot = s.sum(axis=1)
    per_start = np.divide(rmass.sum(axis=1), tot, out=np.zeros_like(tot), where=tot > 0)
    w = solution.weights
    all_stop = w @ s
    all_rand = w @ rmass
    per_shell = {}
    for si, shell in enumerate(spec.shells):
        idx = list(shell.members)
        t = all_stop[idx].sum()
        if t > 0:
            per_shell[shell.radius] = float(all_rand[idx].sum() / t)
    overall = float(all_rand.sum() / all_stop.sum()) if all_stop.sum() > 0 else 0.0
    return RandomizationProfile(per_start, per_shell, overall)


@dataclass
class CommonMassResult:
    passed: bool
    worst_deficit: float
    deficits: np.ndarray


def common_mass_check(solution: StoppingSolution, mu: DiscreteMeasure | None = None,
                      nu: DiscreteMeasure | None = None, tol: float = 1e-8) -> CommonMassResult:
    """pi(z, z) >= (mu ^ nu)(z) - tol at every node (min problems with alpha <= 1 only)."""
    prob = solution.problem
    if prob.sense != "min" or prob.alpha > 1:
        raise WrongRegime("common mass stays put only for sense=min and alpha <= 1")
    spec = solution.spec
    mu = prob.mu if mu is None else mu
    nu = prob.nu if nu is None else nu
    cm = common_mass(mu, nu).to_array(spec)
    diag = np.zeros(spec.n)
    for k, x in enumerate(solution.starts):
        diag[x] = solution.weights[k] * solution.s[k, x]
    deficit = np.maximum(cm - diag, 0.0)
    worst = float(deficit.max(initial=0.0))
    return CommonMassResult(worst <= tol, worst, deficit)
