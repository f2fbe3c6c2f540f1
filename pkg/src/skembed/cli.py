"""Batch front-end.

Every subcommand reads an instance JSON (written by ``gen``), writes JSON
summaries and CSV tables into ``--out`` and returns an exit code:
0 when everything checks out, 1 when the instance is infeasible or a check
finds a violation, 2 on configuration errors.

    skembed gen --preset annulus-pair -o inst.json
    skembed check-order inst.json --domain U --out res/
    skembed report inst.json --out res/
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import barrier, embed, envelope, gain, mc, order
from .errors import ConfigError, InfeasibleEmbedding, SkembedError, WrongRegime, ZeroStart
from .lattice import build_lattice
from .presets import PRESETS, Instance, make_preset

log = logging.getLogger("skembed")

OK, VIOLATION, CONFIG = 0, 1, 2
SUBCOMMANDS = ("gen", "check-order", "solve", "barrier", "gain-scan", "envelope",
               "simulate", "duality", "report")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags already; raise instead so run() stays in control."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


# -- config -------------------------------------------------------------------------

@dataclass
class RunConfig:
    subcommand: str = ""
    instance: str | None = None
    out: str = "."
    method: str = "exact"
    eps: float = 1e-2
    tol: float | None = None
    seed: int = 0
    alpha: float | None = None
    sense: str | None = None
    d: int | None = None
    threads: int | None = None
    domain: str | None = None
    preset: str | None = None
    params: dict = dataclasses.field(default_factory=dict)
    paths: int = 100_000
    max_steps: int | None = None
    angular_tol: float | None = None
    trace: int = 0
    function: str = "neg-norm"
    h: float | None = None
    R_O: float | None = None
    y: list | None = None
    r_x: float | None = None
    profile: dict | None = None
    policy: str | None = None
    witness: str | None = None

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.method not in ("exact", "entropic"):
            raise ConfigError(f"method must be exact or entropic, got {self.method!r}")
        if self.sense is not None and self.sense not in ("min", "max"):
            raise ConfigError(f"sense must be min or max, got {self.sense!r}")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.d is not None and self.d not in (2, 3):
            raise ConfigError("d must be 2 or 3")
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.subcommand not in ("gen", "gain-scan") and not self.instance:
            raise ConfigError(f"{self.subcommand} needs an instance file")
        return self


def _line_of(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return i
    return 1


def load_config(path) -> dict:
    """Read a JSON run config; errors name the offending line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{path}:{_line_of(text, key)}: unknown config key {key!r}")
    return data


# -- output helpers -------------------------------------------------------------------

def _round(obj):
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if not math.isfinite(v) else float(f"{v:.12g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    return obj


def _write(out: Path, name: str, content) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    if not isinstance(content, str):
        content = json.dumps(_round(content), indent=1, sort_keys=True) + "\n"
    p.write_text(content)
    return p


def _vector_csv(spec, values, header="value") -> str:
    lines = [",".join([f"z{i + 1}" for i in range(spec.d)] + [header])]
    for z, v in zip(spec.nodes, values):
        lines.append(",".join([str(c) for c in z] + [f"{v:.12g}"]))
    return "\n".join(lines) + "\n"


def _stop_csv(sol) -> str:
    spec = sol.spec
    d = spec.d
    lines = [",".join([f"x{i + 1}" for i in range(d)] + [f"z{i + 1}" for i in range(d)] +
                      ["mu_x", "s_x_z"])]
    for k, x in enumerate(sol.starts):
        for i in np.flatnonzero(sol.s[k] > 1e-14):
            lines.append(",".join([str(c) for c in spec.nodes[x]] + [str(c) for c in spec.nodes[i]] +
                                  [f"{sol.weights[k]:.12g}", f"{sol.s[k, i]:.12g}"]))
    return "\n".join(lines) + "\n"


def load_instance(cfg: RunConfig) -> Instance:
    try:
        data = json.loads(Path(cfg.instance).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read instance {cfg.instance}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{cfg.instance}:{exc.lineno}: {exc.msg}") from exc
    try:
        inst = Instance.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg.instance}: malformed instance: {exc}") from exc
    if cfg.alpha is not None:
        inst.alpha = cfg.alpha
    if cfg.sense is not None:
        inst.sense = cfg.sense
    return inst.on_domain(cfg.domain)


def _solve(inst: Instance, cfg: RunConfig):
    K = inst.kernel()
    prob = embed.build_problem(inst.spec, K, inst.mu, inst.nu, alpha=inst.alpha, sense=inst.sense)
    return embed.solve(prob, method=cfg.method, eps=cfg.eps)


def _solution_summary(sol) -> dict:
    return {"objective": sol.objective, "E_tau": sol.E_tau, "status": sol.status,
            "method": sol.method, "alpha": sol.problem.alpha, "sense": sol.problem.sense,
            "n_starts": len(sol.starts), "n_nodes": sol.spec.n, "residuals": sol.residuals(),
            "shell_width": 2 * sol.spec.shell_tol}


# -- subcommands -------------------------------------------------------------------------
# Each returns (exit code, payload); report composes them.

def cmd_gen(cfg: RunConfig):
    if not cfg.preset:
        raise ConfigError("gen needs --preset")
    kw = dict(cfg.params)
    for key in ("alpha", "d", "h", "R_O"):
        val = getattr(cfg, key)
        if val is not None:
            kw[key] = val
    if cfg.sense is not None:
        kw["sense"] = cfg.sense
    inst = make_preset(cfg.preset, **kw)
    target = Path(cfg.instance) if cfg.instance else Path(cfg.out) / f"{cfg.preset}.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(inst.dumps() + "\n")
    return OK, {"instance": str(target), "n_nodes": inst.spec.n}


def cmd_check_order(cfg: RunConfig, inst: Instance | None = None):
    inst = load_instance(cfg) if inst is None else inst
    K = inst.kernel()
    v_lp = order.check_order_lp(inst.spec, K, inst.mu, inst.nu)
    v_pot = order.check_order_potential(inst.spec, K, inst.mu, inst.nu)
    out = Path(cfg.out)
    payload = json.loads(v_lp.to_json())
    payload.update({"potential_route": v_pot.in_order, "routes_agree": v_lp.in_order == v_pot.in_order,
                    "domain": cfg.domain, "details": v_lp.details})
    if not v_lp.in_order:
        wpath = Path(cfg.witness) if cfg.witness else out / "witness.csv"
        wpath.parent.mkdir(parents=True, exist_ok=True)
        wpath.write_text(_vector_csv(inst.spec, v_lp.witness, "f"))
        payload["witness_file"] = str(wpath)
    _write(out, "order.json", payload)
    return (OK if v_lp.in_order else VIOLATION), payload


def cmd_solve(cfg: RunConfig, inst: Instance | None = None):
    inst = load_instance(cfg) if inst is None else inst
    out = Path(cfg.out)
    try:
        sol = _solve(inst, cfg)
    except InfeasibleEmbedding:
        payload = {"status": "Infeasible"}
        _write(out, "solution.json", payload)
        return VIOLATION, payload
    payload = _solution_summary(sol)
    _write(out, "solution.json", payload)
    _write(out, "stop_measures.csv", _stop_csv(sol))
    _write(out, "policy.json", barrier.build_policy(sol).to_json())
    return OK, payload


def cmd_duality(cfg: RunConfig, inst: Instance | None = None):
    inst = load_instance(cfg) if inst is None else inst
    out = Path(cfg.out)
    exact = dataclasses.replace(cfg, method="exact")
    try:
        sol = _solve(inst, exact)
    except InfeasibleEmbedding:
        payload = {"status": "Infeasible", "ok": False}
        _write(out, "duality.json", payload)
        return VIOLATION, payload
    rep = embed.verify_dual(sol, tol=cfg.tol)
    payload = rep.to_dict()
    _write(out, "duality.json", payload)
    _write(out, "dual_beta.csv", _vector_csv(sol.spec, sol.beta, "beta"))
    return (OK if rep.ok else VIOLATION), payload


def cmd_barrier(cfg: RunConfig, inst: Instance | None = None):
    inst = load_instance(cfg) if inst is None else inst
    out = Path(cfg.out)
    regime = barrier.regime_for(inst.sense, inst.alpha)
    try:
        sol = _solve(inst, cfg)
    except InfeasibleEmbedding:
        payload = {"status": "Infeasible"}
        _write(out, "cap_report.json", payload)
        return VIOLATION, payload
    rep = barrier.verify_cap_structure(sol, regime, angular_tol=cfg.angular_tol)
    prof = barrier.randomization_profile(sol)
    payload = {"regime": regime, "n_violations": rep.n_violations, "advisory": rep.advisory,
               "angular_tol": rep.angular_tol, "mass_tol": rep.mass_tol,
               "randomized_fraction": prof.overall, "replay_error": barrier.replay_error(sol),
               "shell_width": 2 * sol.spec.shell_tol}
    _write(out, "cap_report.json", payload)
    _write(out, "cap_report.csv", rep.to_csv())
    _write(out, "policy.json", barrier.build_policy(sol).to_json())
    return (OK if rep.n_violations == 0 else VIOLATION), payload


def _parse_profile(raw) -> dict:
    if isinstance(raw, dict):
        return {float(k): float(v) for k, v in raw.items()}
    try:
        return {float(a): float(b) for a, b in (item.split(":") for item in raw.split(","))}
    except ValueError as exc:
        raise ConfigError(f"profile must look like 2:0.5,3:0.5, got {raw!r}") from exc


def cmd_gain_scan(cfg: RunConfig, inst: Instance | None = None):
    if cfg.instance and inst is None:
        inst = load_instance(cfg)
    if inst is not None:
        spec = inst.spec
        alpha = inst.alpha if cfg.alpha is None else cfg.alpha
    else:
        if cfg.d is None or cfg.h is None or cfg.R_O is None:
            raise ConfigError("gain-scan needs an instance or --d, --h and --R-O")
        spec = build_lattice(cfg.d, cfg.h, cfg.R_O)
        alpha = 1.0 if cfg.alpha is None else cfg.alpha
    if cfg.y is None or cfg.r_x is None or cfg.profile is None:
        raise ConfigError("gain-scan needs --y, --r-x and --profile")
    y = tuple(int(c) for c in cfg.y)
    if len(y) != spec.d:
        raise ConfigError(f"y must have {spec.d} coordinates")
    from .lattice import WalkKernel

    table = gain.monotonicity_scan(cfg.r_x, y, _parse_profile(cfg.profile), spec,
                                   WalkKernel(spec), alpha)
    out = Path(cfg.out)
    _write(out, "scan.csv", table.to_csv())
    payload = {"alpha": alpha, "verdict": table.verdict, "verdict_lower": table.verdict_lower,
               "verdict_upper": table.verdict_upper, "n_rows": len(table.rows)}
    _write(out, "scan.json", payload)
    return (VIOLATION if table.verdict == gain.FAIL else OK), payload


_FUNCTIONS = {
    "neg-norm": lambda spec: -spec.norms,
    "neg-power": lambda spec, a=3.0: -spec.norms ** a,
    "spike": lambda spec: np.where(np.all(spec.coords == 0, axis=1), 1.0, 0.0),
    "square": lambda spec: spec.norms ** 2,
}


def cmd_envelope(cfg: RunConfig, inst: Instance | None = None):
    inst = load_instance(cfg) if inst is None else inst
    if cfg.function not in _FUNCTIONS:
        raise ConfigError(f"function must be one of {sorted(_FUNCTIONS)}")
    spec = inst.spec
    f = envelope.GridFunction(spec, _FUNCTIONS[cfg.function](spec))
    res = envelope.envelope_iterate(f, tol=cfg.tol or envelope.DEFAULT_TOL)
    one = envelope.envelope_onestep_oracle(f, inst.kernel())
    payload = {"function": cfg.function, "iterations": res.iterations, "max_delta": res.max_delta,
               "converged": res.converged, "monotone": res.monotone,
               "dominated": bool(np.all(res.values <= f.values + 1e-12)),
               "onestep_gap": float(np.max(np.abs(res.values - one.values)))}
    if spec.n <= 200:
        payload["lp_oracle_error"] = float(np.max(np.abs(one.values -
                                                         envelope.envelope_lp(f, inst.kernel()))))
    out = Path(cfg.out)
    _write(out, "envelope.json", payload)
    _write(out, "envelope.csv", _vector_csv(spec, res.values, "envelope"))
    good = res.converged and res.monotone and payload["dominated"]
    return (OK if good else VIOLATION), payload


def cmd_simulate(cfg: RunConfig, inst: Instance | None = None):
    out = Path(cfg.out)
    if cfg.policy:
        try:
            policy = barrier.BarrierPolicy.from_dict(json.loads(Path(cfg.policy).read_text()))
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot load policy {cfg.policy}: {exc}") from exc
    else:
        inst = load_instance(cfg) if inst is None else inst
        try:
            sol = _solve(inst, cfg)
        except InfeasibleEmbedding:
            payload = {"status": "Infeasible"}
            _write(out, "sim_report.json", payload)
            return VIOLATION, payload
        policy = barrier.build_policy(sol)
        _write(out, "policy.json", policy.to_json())
    sc = mc.SimConfig(cfg.paths, cfg.seed, cfg.max_steps, threads=cfg.threads)
    rep = mc.simulate(policy, sc)
    cmp = mc.compare(rep, rep.target)
    payload = rep.to_dict()
    payload.update({"w1_bound": cmp.bound, "passed": cmp.passed, "steps_sem": rep.steps_sem})
    _write(out, "sim_report.json", payload)
    _write(out, "sim_terminal.csv", rep.terminal_csv())
    if cfg.trace:
        _write(out, "sim_trace.csv", mc.trace_csv(policy, sc, cfg.trace))
    return (OK if cmp.passed and not rep.cap_flag else VIOLATION), payload


def cmd_report(cfg: RunConfig):
    inst = load_instance(cfg)
    out = Path(cfg.out)
    parts, status = {}, {}
    code, parts["check-order"] = cmd_check_order(cfg, inst)
    status["check-order"] = code
    if code == OK:
        for name, fn in (("solve", cmd_solve), ("duality", cmd_duality)):
            status[name], parts[name] = fn(cfg, inst)
        try:
            status["barrier"], parts["barrier"] = cmd_barrier(cfg, inst)
        except (WrongRegime, ZeroStart) as exc:
            parts["barrier"] = {"skipped": str(exc)}
        if status["solve"] == OK:
            status["simulate"], parts["simulate"] = cmd_simulate(
                dataclasses.replace(cfg, policy=str(out / "policy.json")))
    payload = {name: ("skipped" if name not in status else "pass" if status[name] == OK else "fail")
               for name in parts}
    payload["details"] = parts
    _write(out, "report.json", payload)
    return max(status.values()), payload


DISPATCH = {"gen": cmd_gen, "check-order": cmd_check_order, "solve": cmd_solve,
            "barrier": cmd_barrier, "gain-scan": cmd_gain_scan, "envelope": cmd_envelope,
            "simulate": cmd_simulate, "duality": cmd_duality, "report": cmd_report}


# -- argv -----------------------------------------------------------------------------------

def _coords(text):
    try:
        return [int(c) for c in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers like 1,0,0: {text!r}") from exc


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skembed", description="Optimal stopping embeddings on a lattice.")
    p.add_argument("--config", help="JSON run config; command-line flags take precedence")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="subcommand", parser_class=_Parser)

    def common(sp, instance=True):
        if instance:
            sp.add_argument("instance", nargs="?", help="instance JSON written by gen")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--sense", choices=("min", "max"))
        sp.add_argument("--method", choices=("exact", "entropic"))
        sp.add_argument("--eps", type=float)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--domain", help="alternative domain stored in the instance (e.g. U or V)")

    g = sub.add_parser("gen", help="write a preset instance")
    common(g, instance=False)
    g.add_argument("--preset", choices=PRESETS)
    g.add_argument("-o", "--output", dest="instance", help="instance file to write")
    g.add_argument("--param", action="append", type=_kv, default=None,
                   help="preset parameter key=value (repeatable)")
    g.add_argument("--d", type=int)
    g.add_argument("--h", type=float)
    g.add_argument("--R-O", dest="R_O", type=float)

    c = sub.add_parser("check-order", help="is nu reachable from mu by stopping the walk?")
    common(c)
    c.add_argument("--witness", help="where to write the witness CSV when not in order")
    for name in ("solve", "duality", "report"):
        sp = sub.add_parser(name)
        common(sp)
        if name == "report":
            sp.add_argument("--paths", type=int)
            sp.add_argument("--angular-tol", dest="angular_tol", type=float)
    b = sub.add_parser("barrier", help="cap-structure report of the optimal rule")
    common(b)
    b.add_argument("--angular-tol", dest="angular_tol", type=float)
    gs = sub.add_parser("gain-scan", help="gain bounds along an exact lattice sphere")
    common(gs)
    gs.add_argument("--d", type=int)
    gs.add_argument("--h", type=float)
    gs.add_argument("--R-O", dest="R_O", type=float)
    gs.add_argument("--y", type=_coords, help="lattice start of the walk, e.g. 1,0,0")
    gs.add_argument("--r-x", dest="r_x", type=float, help="lattice norm of the scanned x")
    gs.add_argument("--profile", help="radius:mass pairs, e.g. 2:0.5,3:0.5")
    e = sub.add_parser("envelope", help="subharmonic envelope by shell iteration")
    common(e)
    e.add_argument("--function", choices=sorted(_FUNCTIONS))
    s = sub.add_parser("simulate", help="Monte Carlo replay of the optimal rule")
    common(s)
    s.add_argument("--paths", type=int)
    s.add_argument("--max-steps", dest="max_steps", type=int)
    s.add_argument("--policy", help="policy JSON from solve/barrier (skips solving)")
    s.add_argument("--trace", type=int, help="write trajectories of the first N paths")
    return p


def parse(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    if ns.subcommand is None:
        raise ConfigError("no subcommand given; one of " + ", ".join(SUBCOMMANDS))
    base = load_config(ns.config) if ns.config else {}
    given = {k: v for k, v in vars(ns).items()
             if v is not None and k not in ("config", "verbose", "param")}
    if getattr(ns, "param", None):
        given["params"] = dict(base.get("params", {}), **dict(ns.param))
    merged = {**base, **given}
    if merged.get("threads") is None and os.environ.get("SKEMBED_THREADS"):
        merged["threads"] = mc.default_threads()
    if merged.get("out") is None:
        merged["out"] = "."
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if "-v" in argv or "--verbose" in argv:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse(argv)
        code, payload = DISPATCH[cfg.subcommand](cfg)
    except (ConfigError, WrongRegime, ZeroStart) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG
    except SkembedError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return VIOLATION
    print(json.dumps(_round(payload), sort_keys=True))
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
