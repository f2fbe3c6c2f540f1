"""Monte Carlo replay of a barrier policy on the lattice walk.

Each path p owns a splitmix64 stream seeded from (seed, p), so a path's
trajectory does not depend on which worker simulates it; per-chunk results
are integer counts merged in chunk order, which makes reports bit-identical
for every thread count.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .barrier import BarrierPolicy, replay_policy
from .errors import ConfigError, MassMismatch, PolicyGap
from .lattice import LatticeSpec, WalkKernel
from .measures import DiscreteMeasure, wasserstein1

log = logging.getLogger(__name__)

CAP_FRACTION = 1e-3
CHUNK = 8192


def default_threads() -> int:
    env = os.environ.get("SKEMBED_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SKEMBED_THREADS must be an integer, got {env!r}") from exc
    return 1


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    seed: int = 0
    max_steps: int | None = None
    start: tuple | None = None       # fixed start node; None samples from the policy's mu
    condition_node: tuple | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")


@dataclass
class SimReport:
    spec: LatticeSpec
    terminal_counts: np.ndarray
    n_paths: int
    n_capped: int
    mean_steps: float
    var_steps: float
    shell_visits: np.ndarray
    w1: float | None = None
    target: DiscreteMeasure | None = None
    cap_flag: bool = False
    hit_counts: np.ndarray | None = None   # terminal counts of paths that reached the condition node
    n_hit: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def terminal(self) -> DiscreteMeasure:
        done = self.terminal_counts.sum()
        return DiscreteMeasure.from_array(self.spec, self.terminal_counts / max(done, 1))

    @property
    def steps_sem(self) -> float:
        return float(np.sqrt(self.var_steps / max(self.n_paths - self.n_capped, 1)))

    def to_dict(self) -> dict:
        return {"n_paths": self.n_paths, "n_capped": self.n_capped, "cap_flag": self.cap_flag,
                "mean_steps": float(f"{self.mean_steps:.12g}"),
                "var_steps": float(f"{self.var_steps:.12g}"),
                "w1": None if self.w1 is None else float(f"{self.w1:.12g}"),
                "shell_visits": {f"{r:.12g}": int(v) for r, v in
                                 zip(self.spec.shell_radii, self.shell_visits)},
                **self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def terminal_csv(self) -> str:
        return self.terminal.to_csv()


def _starts(policy: BarrierPolicy, config: SimConfig, spec: LatticeSpec, states):
    """Start node and policy row per path; sampling from mu consumes one draw."""
    n = config.n_paths
    if config.start is not None:
        node = spec.node_index(config.start)
        hits = np.flatnonzero(policy.starts == node)
        if len(hits):
            row = int(hits[0])
        elif len(policy.starts) == 1:
            row = 0
        else:
            raise PolicyGap(f"policy has no row for start {config.start}")
        return np.full(n, node, dtype=np.int64), np.full(n, row, dtype=np.int64)
    cdf = np.cumsum(policy.weights / policy.weights.sum())
    u = kernels.next_uniform(states)
    rows = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1).astype(np.int64)
    return policy.starts[rows].astype(np.int64), rows


def simulate(policy: BarrierPolicy, config: SimConfig, spec: LatticeSpec | None = None,
             kernel: WalkKernel | None = None, target: DiscreteMeasure | None = None,
             backend: str | None = None) -> SimReport:
    """Run n_paths walks: stop with probability rho on arrival (always on the boundary).

    ``target`` defaults to the exact replay law sum_x mu(x) s_x of the policy.
    """
    spec = policy.spec if spec is None else spec
    kernel = WalkKernel(spec) if kernel is None else kernel
    max_steps = config.max_steps
    if max_steps is None:
        max_steps = int(np.ceil(100 * (spec.R_O / spec.h) ** 2))
    threads = config.threads or default_threads()
    states = kernels.path_states(config.seed, np.arange(config.n_paths, dtype=np.uint64))
    start_node, start_row = _starts(policy, config, spec, states)
    cond = -1 if config.condition_node is None else spec.node_index(config.condition_node)
    rho = np.ascontiguousarray(policy.rho, dtype=np.float64)
    chunks = [(a, min(a + CHUNK, config.n_paths)) for a in range(0, config.n_paths, CHUNK)]

    def run(bounds):
        a, b = bounds
        st = states[a:b].copy()
        return kernels.walk_paths(spec.neighbors, spec.boundary, rho, start_node[a:b],
                                  start_row[a:b], st, max_steps, cond, backend=backend)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]

    n = spec.n
    counts = np.zeros(n, dtype=np.int64)
    hit_counts = np.zeros(n, dtype=np.int64)
    visits = np.zeros(n, dtype=np.int64)
    n_capped = n_gap = n_hit = 0
    s1 = s2 = 0
    for term, steps, status, hit, vis in results:
        ok = status == kernels.OK
        n_capped += int((status == kernels.CAPPED).sum())
        n_gap += int((status == kernels.GAP).sum())
        counts += np.bincount(term[ok], minlength=n)
        hsel = ok & (hit == 1)
        n_hit += int(hsel.sum())
        hit_counts += np.bincount(term[hsel], minlength=n)
        visits += vis
        s1 += int(steps[ok].sum())
        s2 += int((steps[ok].astype(np.int64) ** 2).sum())
    if n_gap:
        raise PolicyGap(f"{n_gap} paths reached nodes where the policy is undefined")
    done = config.n_paths - n_capped
    mean = s1 / done if done else float("nan")
    var = (s2 / done - mean ** 2) * done / max(done - 1, 1) if done else float("nan")
    shell_visits = np.bincount(spec.shell_of, weights=visits, minlength=len(spec.shells))
    cap_flag = n_capped >= CAP_FRACTION * config.n_paths
    if cap_flag:
        log.warning("%d of %d paths hit max_steps=%d", n_capped, config.n_paths, max_steps)
    rep = SimReport(spec, counts, config.n_paths, n_capped, float(mean), float(var),
                    shell_visits.astype(np.int64), cap_flag=cap_flag,
                    hit_counts=hit_counts if cond >= 0 else None, n_hit=n_hit,
                    meta={"seed": config.seed, "max_steps": max_steps,
                          "backend": kernels.BACKEND if backend is None else backend})
    if target is None and config.start is None:
        S, _ = replay_policy(policy, kernel)
        law = policy.weights @ S
        target = DiscreteMeasure.from_array(spec, np.where(law > 1e-15, law, 0.0)).normalized()
    if target is not None:
        rep.target = target
        if done:
            rep.w1 = wasserstein1(rep.terminal, target.normalized(), spec.h)
    return rep


def w1_envelope(target: DiscreteMeasure, n_paths: int, h: float = 1.0,
                support=None) -> float:
    """3-sigma bound on W1(empirical, target): (diam/2) * 3 * sum_z sqrt(p(1-p)/n)."""
    pts = np.array(list(support if support is not None else target.support), dtype=float)
    if len(pts) < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    diam = h * float(np.sqrt((diff ** 2).sum(-1)).max())
    p = np.array([target[z] for z in target.support]) / target.total
    return 0.5 * diam * 3.0 * float(np.sum(np.sqrt(p * (1 - p) / n_paths)))


@dataclass
class Comparison:
    passed: bool
    distance: float
    bound: float


def compare(report: SimReport, target: DiscreteMeasure) -> Comparison:
    emp = report.terminal
    if abs(emp.total - target.total) > 1e-9:
        raise MassMismatch(f"empirical total {emp.total} vs target {target.total}")
    dist = wasserstein1(emp, target, report.spec.h)
    done = report.n_paths - report.n_capped
    support = sorted(set(emp.support) | set(target.support))
    bound = w1_envelope(target, done, report.spec.h, support)
    return Comparison(dist <= bound, dist, bound)


def trace_csv(policy: BarrierPolicy, config: SimConfig, n_trace: int = 100) -> str:
    """Per-path trajectories of the first n_trace paths (at most 1e4), same streams as simulate."""
    spec = policy.spec
    n_trace = min(n_trace, config.n_paths, 10_000)
    states = kernels.path_states(config.seed, np.arange(config.n_paths, dtype=np.uint64))
    start_node, start_row = _starts(policy, config, spec, states)
    max_steps = config.max_steps or int(np.ceil(100 * (spec.R_O / spec.h) ** 2))
    d2 = 2 * spec.d
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path_id", "step"] + [f"z{i + 1}" for i in range(spec.d)] + ["stopped"])
    for p in range(n_trace):
        st = states[p:p + 1].copy()
        pos, row, t = int(start_node[p]), int(start_row[p]), 0
        while True:
            stop = bool(spec.boundary[pos]) or t >= max_steps
            if not stop:
                r = policy.rho[row, pos]
                if np.isnan(r):
                    raise PolicyGap(f"path {p} reached {spec.nodes[pos]} without a policy")
                stop = kernels.next_uniform(st)[0] < r
            w.writerow([p, t] + list(spec.nodes[pos]) + [int(stop)])
            if stop:
                break
            k = min(int(kernels.next_uniform(st)[0] * d2), d2 - 1)
            pos = int(spec.neighbors[pos, k])
            t += 1
    return buf.getvalue()


def conditioned_sublaw(policy: BarrierPolicy, config: SimConfig, node) -> tuple:
    """(terminal law of paths that visit node, direct simulation restarted at node).

    Both use the policy row of the (single) start in config; the second run
    starts every path at node. Returns the two normalized count vectors and
    their path counts.
    """
    if config.start is None:
        raise ConfigError("conditioning needs a fixed start")
    rep = simulate(policy, SimConfig(config.n_paths, config.seed, config.max_steps,
                                     config.start, node, config.threads))
    spec = policy.spec
    k = int(np.flatnonzero(policy.starts == spec.node_index(config.start))[0])
    sub = BarrierPolicy(spec, policy.starts[k:k + 1].copy(), np.ones(1), policy.rho[k:k + 1])
    direct = simulate(sub, SimConfig(config.n_paths, config.seed + 1, config.max_steps,
                                     node, None, config.threads))
    return rep.hit_counts, rep.n_hit, direct.terminal_counts, config.n_paths - direct.n_capped


def chi2_homogeneity(a: np.ndarray, b: np.ndarray):
    """Two-sample chi-square homogeneity test on count vectors; returns (stat, dof, p-value)."""
    from scipy.stats import chi2_contingency

    keep = (a + b) > 0
    table = np.vstack([a[keep], b[keep]])
    if table.shape[1] < 2:
        return 0.0, 0, 1.0
    stat, pval, dof, _ = chi2_contingency(table)
    return float(stat), int(dof), float(pval)
