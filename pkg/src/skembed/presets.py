"""Point-group-invariant benchmark instances.

Target laws are built as hitting distributions rather than uniform masses on
lattice shells: discrete harmonic measure differs from the uniform one, so a
uniform target on an outer lattice shell is usually *not* in subharmonic order
with a uniform start on an inner shell. Hitting laws are in order by
construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .lattice import LatticeSpec, WalkKernel, build_lattice
from .measures import DiscreteMeasure
from .stopping import replay

PRESETS = ("uniform-shell", "annulus-pair", "two-shell-mixture", "overlap-pair", "delta-start")


def shell_measure(spec: LatticeSpec, r: float) -> DiscreteMeasure:
    """Uniform probability on the bucket shell whose radius is closest to r."""
    s = spec.shells[spec.shell_index_for_radius(r)]
    return DiscreteMeasure.uniform([spec.nodes[i] for i in s.members])


def hitting_law(spec: LatticeSpec, kernel: WalkKernel, mu: DiscreteMeasure, r: float) -> DiscreteMeasure:
    """Law of the walk from mu at its first arrival in {|z| >= r - shell_tol} (or the boundary)."""
    rho = ((spec.norms >= r - spec.shell_tol - 1e-9) | spec.boundary).astype(float)
    stop, _ = replay(kernel.P, rho, mu.to_array(spec))
    stop[stop < 1e-15] = 0.0
    return DiscreteMeasure.from_array(spec, stop / stop.sum())


@dataclass
class Instance:
    spec: LatticeSpec
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    alpha: float = 1.0
    sense: str = "min"
    preset: str = ""
    params: dict = field(default_factory=dict)
    # optional alternative domains (annulus-pair: {"U": ..., "V": ...})
    domains: dict = field(default_factory=dict)

    def kernel(self) -> WalkKernel:
        return WalkKernel(self.spec)

    def on_domain(self, name: str | None) -> "Instance":
        if name is None:
            return self
        if name not in self.domains:
            raise ConfigError(f"instance has no domain {name!r}; known: {sorted(self.domains)}")
        return Instance(self.domains[name], self.mu, self.nu, self.alpha, self.sense,
                        self.preset, self.params, self.domains)

    def to_dict(self) -> dict:
        out = {"lattice": self.spec.to_dict(), "mu": self.mu.to_json_atoms(),
               "nu": self.nu.to_json_atoms(), "alpha": self.alpha, "sense": self.sense,
               "preset": self.preset, "params": self.params}
        if self.domains:
            out["domains"] = {k: v.to_dict() for k, v in self.domains.items()}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        allowed = {"lattice", "mu", "nu", "alpha", "sense", "preset", "params", "domains"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown instance keys: {sorted(unknown)}")
        for key in ("lattice", "mu", "nu"):
            if key not in data:
                raise ConfigError(f"instance lacks {key!r}")
        spec = LatticeSpec.from_dict(data["lattice"])
        domains = {k: LatticeSpec.from_dict(v) for k, v in data.get("domains", {}).items()}
        sense = data.get("sense", "min")
        if sense not in ("min", "max"):
            raise ConfigError(f"sense must be min or max, got {sense!r}")
        return cls(spec, DiscreteMeasure.from_json_atoms(data["mu"]),
                   DiscreteMeasure.from_json_atoms(data["nu"]), float(data.get("alpha", 1.0)),
                   sense, data.get("preset", ""), dict(data.get("params", {})), domains)


def uniform_shell(d=3, h=1.0, R_O=5.0, r_mu=1.0, r_nu=3.0, alpha=1.0, sense="min") -> Instance:
    """mu uniform on the shell near r_mu, nu its hitting law of radius r_nu."""
    spec = build_lattice(d, h, R_O)
    K = WalkKernel(spec)
    mu = shell_measure(spec, r_mu)
    nu = hitting_law(spec, K, mu, r_nu)
    return Instance(spec, mu, nu, alpha, sense, "uniform-shell",
                    {"d": d, "h": h, "R_O": R_O, "r_mu": r_mu, "r_nu": r_nu})


def two_shell_mixture(d=3, h=1.0, R_O=5.0, r_mu=1.0, r1=2.0, r2=3.0, weight=0.5,
                      alpha=1.0, sense="min") -> Instance:
    """nu = weight * hit(r1) + (1 - weight) * hit(r2) from mu uniform on shell r_mu.

    Unlike a single hitting law, this target admits many embeddings, so the
    optimal rule is a genuine cap-shaped barrier.
    """
    spec = build_lattice(d, h, R_O)
    K = WalkKernel(spec)
    mu = shell_measure(spec, r_mu)
    nu = hitting_law(spec, K, mu, r1).scaled(weight) + hitting_law(spec, K, mu, r2).scaled(1 - weight)
    return Instance(spec, mu, nu, alpha, sense, "two-shell-mixture",
                    {"d": d, "h": h, "R_O": R_O, "r_mu": r_mu, "r1": r1, "r2": r2,
                     "weight": weight})


def overlap_pair(d=2, h=1.0, R_O=4.0, r_mu=1.0, r_nu=2.0, shared=0.5, alpha=1.0) -> Instance:
    """mu = shared*delta_0 + (1-shared)*shell(r_mu), nu = shared*delta_0 + (1-shared)*hit(r_nu)."""
    spec = build_lattice(d, h, R_O)
    K = WalkKernel(spec)
    ring = shell_measure(spec, r_mu)
    origin = DiscreteMeasure.point((0,) * d)
    mu = origin.scaled(shared) + ring.scaled(1 - shared)
    nu = origin.scaled(shared) + hitting_law(spec, K, ring, r_nu).scaled(1 - shared)
    return Instance(spec, mu, nu, alpha, "min", "overlap-pair",
                    {"d": d, "h": h, "R_O": R_O, "r_mu": r_mu, "r_nu": r_nu, "shared": shared})


def annulus_pair(d=2, h=0.5, r_in=1.0, r_out=4.0, r_mu=2.0, r_nu=3.0) -> Instance:
    """mu ~ rho_2, nu ~ rho_3 (exit law of B_3 from rho_2, computed on the ball).

    Domain V is the ball of radius r_out and U the annulus r_in < |z| <= r_out.
    The embedding exists on V but not on U, where walks absorbed at the inner
    rim cannot be redirected to radius 3.
    """
    V = build_lattice(d, h, r_out)
    U = build_lattice(d, h, r_out, R_in=r_in)
    mu = shell_measure(V, r_mu)
    nu = hitting_law(V, WalkKernel(V), mu, r_nu)
    return Instance(U, mu, nu, 1.0, "min", "annulus-pair",
                    {"d": d, "h": h, "r_in": r_in, "r_out": r_out, "r_mu": r_mu, "r_nu": r_nu},
                    domains={"U": U, "V": V})


def delta_start(d=2, h=1.0, R_O=3.0) -> Instance:
    """mu = delta_0, nu = uniform on the 2d neighbours (the forced one-step rule)."""
    spec = build_lattice(d, h, R_O)
    nbrs = []
    for i in range(d):
        for sgn in (1, -1):
            z = [0] * d
            z[i] = sgn
            nbrs.append(tuple(z))
    return Instance(spec, DiscreteMeasure.point((0,) * d), DiscreteMeasure.uniform(nbrs), 1.0,
                    "min", "delta-start", {"d": d, "h": h, "R_O": R_O})


def make_preset(name: str, **kw) -> Instance:
    table = {"uniform-shell": uniform_shell, "annulus-pair": annulus_pair,
             "two-shell-mixture": two_shell_mixture, "overlap-pair": overlap_pair,
             "delta-start": delta_start}
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    try:
        return table[name](**kw)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for preset {name!r}: {exc}") from exc
