"""Sparse discrete measures on the lattice and the radial/symmetry operations on them."""
from __future__ import annotations

import csv
import io
import json
from collections.abc import Mapping
from types import MappingProxyType

import numpy as np

from .errors import MassMismatch, UnsupportedAtom

PROB_TOL = 1e-12


def _key(z) -> tuple[int, ...]:
    return tuple(int(c) for c in z)


class DiscreteMeasure(Mapping):
    """Immutable map node -> mass >= 0, storing only nonzero atoms."""

    __slots__ = ("_atoms", "_total")

    def __init__(self, atoms: Mapping | None = None):
        clean = {}
        for z, m in (atoms or {}).items():
            m = float(m)
            if m < 0:
                if m > -1e-14:
                    continue
                raise ValueError(f"negative mass {m} at {z}")
            if m == 0.0:
                continue
            k = _key(z)
            clean[k] = clean.get(k, 0.0) + m
        self._atoms = MappingProxyType(clean)
        self._total = float(sum(clean.values()))

    def __getitem__(self, z):
        return self._atoms.get(_key(z), 0.0)

    def __iter__(self):
        return iter(self._atoms)

    def __len__(self):
        return len(self._atoms)

    def __contains__(self, z):
        return _key(z) in self._atoms

    def __repr__(self):
        items = ", ".join(f"{z}: {m:.6g}" for z, m in list(self._atoms.items())[:6])
        more = ", ..." if len(self._atoms) > 6 else ""
        return f"DiscreteMeasure({{{items}{more}}})"

    @property
    def total(self) -> float:
        return self._total

    @property
    def support(self) -> list[tuple[int, ...]]:
        return sorted(self._atoms)

    def is_probability(self, tol=PROB_TOL) -> bool:
        return abs(self._total - 1.0) <= tol

    def scaled(self, k: float) -> "DiscreteMeasure":
        return DiscreteMeasure({z: k * m for z, m in self._atoms.items()})

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        out = dict(self._atoms)
        for z, m in other.items():
            out[z] = out.get(z, 0.0) + m
        return DiscreteMeasure(out)

    def normalized(self) -> "DiscreteMeasure":
        return self.scaled(1.0 / self._total)

    # -- dense bridge ---------------------------------------------------------------
    def to_array(self, spec) -> np.ndarray:
        out = np.zeros(spec.n)
        for z, m in self._atoms.items():
            i = spec.index.get(z)
            if i is None:
                raise UnsupportedAtom(f"atom {z} is not a node of the lattice")
            out[i] = m
        return out

    @classmethod
    def from_array(cls, spec, values, tol: float = 0.0) -> "DiscreteMeasure":
        values = np.asarray(values, dtype=float)
        nz = np.flatnonzero(values > tol)
        return cls({spec.nodes[i]: values[i] for i in nz})

    @classmethod
    def point(cls, z, mass: float = 1.0) -> "DiscreteMeasure":
        return cls({_key(z): mass})

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        points = [_key(z) for z in points]
        if not points:
            raise ValueError("uniform measure needs at least one point")
        w = 1.0 / len(points)
        out = {}
        for z in points:
            out[z] = out.get(z, 0.0) + w
        return cls(out)

    # -- serialization ------------------------------------------------------------
    def to_json_atoms(self) -> list[dict]:
        return [{"z": list(z), "m": m} for z, m in sorted(self._atoms.items())]

    @classmethod
    def from_json_atoms(cls, atoms: list[dict]) -> "DiscreteMeasure":
        out = {}
        for a in atoms:
            if set(a) != {"z", "m"}:
                raise ValueError(f"atom must have exactly keys z and m: {a}")
            k = _key(a["z"])
            out[k] = out.get(k, 0.0) + float(a["m"])
        return cls(out)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if not self._atoms:
            return ""
        d = len(next(iter(self._atoms)))
        w = csv.writer(buf)
        w.writerow([f"z{i + 1}" for i in range(d)] + ["mass"])
        for z, m in sorted(self._atoms.items()):
            w.writerow(list(z) + [f"{m:.12g}"])
        return buf.getvalue()

    def dumps(self) -> str:
        return json.dumps(self.to_json_atoms())


class RadialProfile(dict):
    """Shell radius -> mass."""

    @property
    def total(self) -> float:
        return float(sum(self.values()))


def _check_support(mu: DiscreteMeasure, spec):
    for z in mu:
        if z not in spec.index:
            raise UnsupportedAtom(f"atom {z} is not a node of the lattice")


def modulus_pushforward(mu: DiscreteMeasure, spec) -> RadialProfile:
    _check_support(mu, spec)
    out = RadialProfile()
    for z, m in mu.items():
        s = spec.shells[spec.shell_of[spec.index[z]]]
        out[s.radius] = out.get(s.radius, 0.0) + m
    return RadialProfile(sorted(out.items()))


def profile_array(mu: DiscreteMeasure, spec) -> np.ndarray:
    """Mass per shell index (dense counterpart of modulus_pushforward)."""
    return np.bincount(spec.shell_of, weights=mu.to_array(spec), minlength=len(spec.shells))


def r_equivalent(phi: DiscreteMeasure, psi: DiscreteMeasure, spec, tol: float = 0.0) -> bool:
    _check_support(phi, spec)
    _check_support(psi, spec)
    diff = profile_array(phi, spec) - profile_array(psi, spec)
    return bool(np.max(np.abs(diff)) <= tol)


def symmetrize(mu: DiscreteMeasure, spec) -> DiscreteMeasure:
    """Average of M_# mu over the signed-permutation group."""
    arr = mu.to_array(spec)
    act = spec.group_action
    out = np.zeros_like(arr)
    for g in range(act.shape[0]):
        np.add.at(out, act[g], arr)
    out /= act.shape[0]
    return DiscreteMeasure.from_array(spec, out)


def is_invariant(mu: DiscreteMeasure, spec, tol: float = 1e-12) -> bool:
    arr = mu.to_array(spec)
    return all(np.max(np.abs(arr[act] - arr)) <= tol for act in spec.group_action)


def common_mass(mu: DiscreteMeasure, nu: DiscreteMeasure) -> DiscreteMeasure:
    return DiscreteMeasure({z: min(m, nu[z]) for z, m in mu.items() if z in nu})


def power_moment(mu: DiscreteMeasure, x, alpha: float, h: float = 1.0) -> float:
    """sum_z mu(z) |x h - z h|^alpha."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not len(mu):
        return 0.0
    pts = np.array(list(mu.keys()), dtype=float)
    w = np.array(list(mu.values()))
    dist = h * np.linalg.norm(pts - np.asarray(x, dtype=float), axis=1)
    return float(w @ dist ** alpha)


def barycenter(mu: DiscreteMeasure) -> np.ndarray:
    """Barycenter in lattice coordinates."""
    pts = np.array(list(mu.keys()), dtype=float)
    w = np.array(list(mu.values()))
    return w @ pts / w.sum()


def wasserstein1(mu: DiscreteMeasure, nu: DiscreteMeasure, h: float = 1.0) -> float:
    """Exact W1 with Euclidean ground cost (physical units), solved as a transport LP."""
    from .lp import LinearProgram, solve_exact

    if abs(mu.total - nu.total) > 1e-9:
        raise MassMismatch(f"totals differ: {mu.total} vs {nu.total}")
    a_pts, b_pts = mu.support, nu.support
    if not a_pts:
        return 0.0
    A = np.array(a_pts, dtype=float)
    B = np.array(b_pts, dtype=float)
    cost = h * np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2)
    na, nb = len(a_pts), len(b_pts)
    rows, cols = [], []
    for i in range(na):
        for j in range(nb):
            rows += [i, na + j]
            cols += [i * nb + j, i * nb + j]
    rhs = np.array([mu[z] for z in a_pts] + [nu[z] for z in b_pts])
    # drop one redundant column-sum row; keeps the equality system full rank
    keep = np.array(rows) < na + nb - 1
    prog = LinearProgram(
        n_vars=na * nb,
        rows=np.array(rows)[keep], cols=np.array(cols)[keep],
        vals=np.ones(int(keep.sum())),
        senses=["="] * (na + nb - 1), rhs=rhs[: na + nb - 1],
        c=cost.ravel(),
    )
    sol = solve_exact(prog)
    return max(0.0, float(sol.objective))
