"""Discretized domain: lattice nodes, absorbing walk kernel, shells, point group."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateDomain, InvalidDimension, ZeroVector

_NORM_EPS = 1e-9


@dataclass(frozen=True)
class Shell:
    radius: float
    members: tuple[int, ...]


@dataclass(frozen=True)
class LatticeSpec:
    """Nodes z (integer tuples) with |z h| <= R_O, and |z h| > R_in when R_in is set.

    Physical position of a node is ``z * h``. A node is a boundary node when one
    of its 2d nearest neighbours falls outside the node set; boundary nodes are
    absorbing.
    """

    d: int
    h: float
    R_O: float
    shell_tol: float | None = None
    R_in: float | None = None
    coords: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise InvalidDimension(f"dimension must be 2 or 3, got {self.d}")
        if not self.h > 0:
            raise ValueError("spacing h must be positive")
        if self.shell_tol is None:
            object.__setattr__(self, "shell_tol", self.h / 2)
        if self.shell_tol < 0:
            raise ValueError("shell_tol must be >= 0")
        rmax = int(math.floor(self.R_O / self.h + _NORM_EPS))
        rng = range(-rmax, rmax + 1)
        pts = []
        for z in itertools.product(rng, repeat=self.d):
            r = self.h * math.sqrt(sum(c * c for c in z))
            if r > self.R_O + _NORM_EPS:
                continue
            if self.R_in is not None and r <= self.R_in + _NORM_EPS:
                continue
            pts.append(z)
        coords = np.array(sorted(pts), dtype=np.int64).reshape(-1, self.d)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        if len(self.shells) < 2:
            raise DegenerateDomain(
                f"domain with R_O={self.R_O}, h={self.h} has fewer than 2 shells")

    # -- basic geometry -------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.coords)

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(c) for c in z): i for i, z in enumerate(self.coords)}

    @cached_property
    def nodes(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in z) for z in self.coords]

    @cached_property
    def positions(self) -> np.ndarray:
        return self.coords * self.h

    @cached_property
    def norms(self) -> np.ndarray:
        return np.sqrt((self.positions ** 2).sum(axis=1))

    @cached_property
    def neighbors(self) -> np.ndarray:
        """(n, 2d) neighbour indices, -1 where the neighbour lies outside the node set."""
        out = np.full((self.n, 2 * self.d), -1, dtype=np.int64)
        idx = self.index
        for i, z in enumerate(self.nodes):
            k = 0
            for axis in range(self.d):
                for step in (1, -1):
                    w = list(z)
                    w[axis] += step
                    out[i, k] = idx.get(tuple(w), -1)
                    k += 1
        return out

    @cached_property
    def interior(self) -> np.ndarray:
        return (self.neighbors >= 0).all(axis=1)

    @cached_property
    def boundary(self) -> np.ndarray:
        return ~self.interior

    def node_index(self, z) -> int:
        return self.index[tuple(int(c) for c in z)]

    def contains(self, z) -> bool:
        return tuple(int(c) for c in z) in self.index

    # -- shells ---------------------------------------------------------------
    @cached_property
    def shells(self) -> list[Shell]:
        """Shells partitioning the nodes.

        With shell_tol > 0 the representative radii are multiples of 2*shell_tol
        and a node belongs to the shell whose radius is within shell_tol of its
        norm (half-open buckets). With shell_tol == 0 every distinct norm is a
        shell of its own.
        """
        norms = self.norms
        if self.shell_tol > 0:
            width = 2 * self.shell_tol
            keys = np.floor(norms / width + 0.5 + _NORM_EPS).astype(np.int64)
            radius_of = {int(k): float(k * width) for k in np.unique(keys)}
        else:
            # exact level sets; norms squared are integers times h^2
            sq = (self.coords ** 2).sum(axis=1)
            keys = sq
            radius_of = {int(k): float(self.h * math.sqrt(k)) for k in np.unique(keys)}
        out = []
        for k in sorted(radius_of):
            members = tuple(int(i) for i in np.flatnonzero(keys == k))
            out.append(Shell(radius_of[k], members))
        return out

    @cached_property
    def shell_of(self) -> np.ndarray:
        """Shell index per node."""
        out = np.empty(self.n, dtype=np.int64)
        for s, shell in enumerate(self.shells):
            out[list(shell.members)] = s
        return out

    @cached_property
    def shell_radii(self) -> np.ndarray:
        return np.array([s.radius for s in self.shells])

    def shell_index_for_radius(self, r: float) -> int:
        """Index of the shell whose representative radius is closest to r."""
        return int(np.argmin(np.abs(self.shell_radii - r)))

    # -- symmetry ---------------------------------------------------------------
    @cached_property
    def group(self) -> list[np.ndarray]:
        return point_group(self.d)

    @cached_property
    def group_action(self) -> np.ndarray:
        """(|G|, n) array: group_action[g, i] = index of M_g z_i."""
        idx = self.index
        out = np.empty((len(self.group), self.n), dtype=np.int64)
        for g, M in enumerate(self.group):
            img = self.coords @ M.T
            for i, w in enumerate(img):
                out[g, i] = idx[tuple(int(c) for c in w)]
        return out

    # -- serialization ------------------------------------------------------------
    def to_dict(self) -> dict:
        out = {"d": self.d, "h": self.h, "R_O": self.R_O, "shell_tol": self.shell_tol}
        if self.R_in is not None:
            out["R_in"] = self.R_in
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeSpec":
        allowed = {"d", "h", "R_O", "shell_tol", "R_in"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown lattice keys: {sorted(unknown)}")
        return build_lattice(int(data["d"]), float(data["h"]), float(data["R_O"]),
                             data.get("shell_tol"), data.get("R_in"))


def build_lattice(d: int, h: float, R_O: float, shell_tol: float | None = None,
                  R_in: float | None = None) -> LatticeSpec:
    return LatticeSpec(d, float(h), float(R_O),
                       None if shell_tol is None else float(shell_tol),
                       None if R_in is None else float(R_in))


class WalkKernel:
    """Simple symmetric nearest-neighbour walk, absorbed at boundary nodes.

    ``P`` is a CSR matrix with P[w, z] the probability of stepping w -> z.
    """

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        d2 = 2 * spec.d
        rows, cols = [], []
        for i in np.flatnonzero(spec.interior):
            for j in spec.neighbors[i]:
                rows.append(i)
                cols.append(j)
        vals = np.full(len(rows), 1.0 / d2)
        self.P = sp.csr_matrix((vals, (rows, cols)), shape=(spec.n, spec.n))
        self.P.sort_indices()

    @property
    def n(self):
        return self.spec.n

    def apply(self, f: np.ndarray) -> np.ndarray:
        """(Pf)(z) = sum_w P(z, w) f(w); zero at boundary nodes."""
        return self.P @ f

    def push(self, m: np.ndarray) -> np.ndarray:
        """(P^T m)(z) = sum_w P(w, z) m(w): where mass sitting at w goes in one step."""
        return self.P.T @ m

    @property
    def interior_idx(self) -> np.ndarray:
        return np.flatnonzero(self.spec.interior)


def point_group(d: int) -> list[np.ndarray]:
    """All signed coordinate permutations as integer d x d matrices (order 2^d d!)."""
    if d not in (2, 3):
        raise InvalidDimension(f"dimension must be 2 or 3, got {d}")
    out = []
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((1, -1), repeat=d):
            M = np.zeros((d, d), dtype=np.int64)
            for row, (col, s) in enumerate(zip(perm, signs)):
                M[row, col] = s
            out.append(M)
    return out


def cos_angle(x, z) -> float:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    nx, nz = np.linalg.norm(x), np.linalg.norm(z)
    if nx == 0 or nz == 0:
        raise ZeroVector("cos_angle needs nonzero vectors")
    return float(np.clip(x @ z / (nx * nz), -1.0, 1.0))
