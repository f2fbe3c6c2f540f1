from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAX_ITER = "MaxIterReached"

_SENSES = ("=", "<=", ">=")


@dataclass
class LinearProgram:
    """Sparse LP: optimize c.x subject to rows (sense) rhs, x >= lb.

    Constraint matrix entries are given as triplets (rows[k], cols[k], vals[k]);
    repeated triplets are summed. ``lb`` may contain -inf for free variables.
    ``meta`` carries structural hints (e.g. the embedding block layout).
    """

    n_vars: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    senses: list[str]
    rhs: np.ndarray
    c: np.ndarray
    sense: str = "min"
    lb: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.vals = np.asarray(self.vals, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.senses = list(self.senses)
        if self.lb is None:
            self.lb = np.zeros(self.n_vars)
        self.lb = np.asarray(self.lb, dtype=float)
        m = len(self.senses)
        if not (len(self.rows) == len(self.cols) == len(self.vals)):
            raise ValueError("triplet arrays must have equal length")
        if len(self.rows) and (self.rows.min() < 0 or self.rows.max() >= m):
            raise ValueError("row index out of range")
        if len(self.cols) and (self.cols.min() < 0 or self.cols.max() >= self.n_vars):
            raise ValueError("column index out of range")
        if len(self.rhs) != m or len(self.c) != self.n_vars or len(self.lb) != self.n_vars:
            raise ValueError("dimension mismatch in rhs, c or lb")
        if not np.all(np.isfinite(self.vals)) or not np.all(np.isfinite(self.rhs)) \
                or not np.all(np.isfinite(self.c)):
            raise ValueError("non-finite coefficient")
        if any(s not in _SENSES for s in self.senses):
            raise ValueError(f"row senses must be in {_SENSES}")
        if self.sense not in ("min", "max"):
            raise ValueError("objective sense must be 'min' or 'max'")

    @property
    def n_rows(self) -> int:
        return len(self.senses)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    @property
    def A(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)),
                             shape=(self.n_rows, self.n_vars))

    def with_objective(self, c, sense: str | None = None) -> "LinearProgram":
        return LinearProgram(self.n_vars, self.rows, self.cols, self.vals, self.senses,
                             self.rhs, np.asarray(c, dtype=float), sense or self.sense,
                             self.lb, dict(self.meta))

    def dump(self, fh) -> None:
        """Write the program in the sparse-triplet text format.

        Layout::

            LP <n_vars> <n_rows> <nnz> <min|max>
            C <j> <c_j>            one line per nonzero objective coefficient
            L <j> <lb_j>           one line per nonzero lower bound
            R <i> <sense> <rhs_i>  one line per row
            A <i> <j> <a_ij>       one line per triplet
        """
        fh.write(f"LP {self.n_vars} {self.n_rows} {self.nnz} {self.sense}\n")
        for j in np.flatnonzero(self.c):
            fh.write(f"C {j} {float(self.c[j])!r}\n")
        for j in np.flatnonzero(self.lb):
            fh.write(f"L {j} {float(self.lb[j])!r}\n")
        for i, (s, b) in enumerate(zip(self.senses, self.rhs)):
            fh.write(f"R {i} {s} {float(b)!r}\n")
        for i, j, v in zip(self.rows, self.cols, self.vals):
            fh.write(f"A {i} {j} {float(v)!r}\n")

    @classmethod
    def load(cls, fh) -> "LinearProgram":
        head = fh.readline().split()
        if not head or head[0] != "LP":
            raise ValueError("not a sparse-triplet LP dump")
        n, m, _, sense = int(head[1]), int(head[2]), int(head[3]), head[4]
        c, lb = np.zeros(n), np.zeros(n)
        senses, rhs = ["="] * m, np.zeros(m)
        rows, cols, vals = [], [], []
        for line in fh:
            p = line.split()
            if not p:
                continue
            if p[0] == "C":
                c[int(p[1])] = float(p[2])
            elif p[0] == "L":
                lb[int(p[1])] = float(p[2])
            elif p[0] == "R":
                senses[int(p[1])] = p[2]
                rhs[int(p[1])] = float(p[3])
            elif p[0] == "A":
                rows.append(int(p[1]))
                cols.append(int(p[2]))
                vals.append(float(p[3]))
        return cls(n, rows, cols, vals, senses, rhs, c, sense, lb)


@dataclass
class LpSolution:
    """Result of a solve.

    ``duals`` follow the convention duals = d(objective)/d(rhs) in the
    program's own objective sense, so for a min program the reduced costs
    c - A^T duals are >= 0 at an optimum. ``certificate`` (Infeasible only)
    is a row-multiplier vector y with y^T A <= 0 on the standardized columns
    and y^T b > 0.
    """

    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = float("nan")
    dual_objective: float = float("nan")
    certificate: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL
