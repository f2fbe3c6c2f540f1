"""Reference computations that share no code with the package.

Each oracle recomputes a quantity from first principles with dense linear
algebra, brute force loops, scipy.optimize.linprog or sympy, so that a test
comparing the package against it checks two independent derivations.
"""
import itertools
import math

import numpy as np
from scipy.optimize import linprog


# -- lattice -------------------------------------------------------------------------------

def enumerate_nodes(d, h, R_O, R_in=None):
    m = int(math.floor(R_O / h + 1e-9))
    out = []
    for z in itertools.product(range(-m, m + 1), repeat=d):
        r = h * math.sqrt(sum(c * c for c in z))
        if r <= R_O + 1e-9 and (R_in is None or r > R_in + 1e-9):
            out.append(z)
    return sorted(out)


def dense_walk(d, h, R_O, R_in=None):
    """(nodes, index, P dense, boundary mask) for the absorbed simple random walk."""
    nodes = enumerate_nodes(d, h, R_O, R_in)
    idx = {z: i for i, z in enumerate(nodes)}
    n = len(nodes)
    P = np.zeros((n, n))
    bnd = np.zeros(n, dtype=bool)
    for z, i in idx.items():
        nb = []
        for k in range(d):
            for s in (1, -1):
                w = list(z)
                w[k] += s
                nb.append(idx.get(tuple(w)))
        if any(j is None for j in nb):
            bnd[i] = True
        else:
            for j in nb:
                P[i, j] += 1.0 / (2 * d)
    return nodes, idx, P, bnd


# -- potentials and stopping ---------------------------------------------------------------------

def green_potential(P, bnd, mu, nu):
    """Solve M = mu - nu + P^T M on the interior by dense elimination (M = 0 on the boundary)."""
    inter = np.flatnonzero(~bnd)
    A = np.eye(len(inter)) - P.T[np.ix_(inter, inter)]
    M = np.zeros(len(mu))
    M[inter] = np.linalg.solve(A, (mu - nu)[inter])
    return M


def superharmonic_majorant(P, bnd, f, tol=1e-13, max_iter=200_000):
    """Value iteration v <- max(f, P v) from v = f (boundary frozen at f)."""
    v = f.copy()
    for _ in range(max_iter):
        new = np.where(bnd, f, np.maximum(f, P @ v))
        if np.max(np.abs(new - v)) < tol:
            return new
        v = new
    raise RuntimeError("value iteration did not converge")


def exit_law(P, bnd, start_vec, stop_mask):
    """Law of the walk at the first entrance to stop_mask or the boundary."""
    halt = stop_mask | bnd
    cont = np.flatnonzero(~halt)
    n = len(start_vec)
    Q = P[np.ix_(cont, cont)]
    occ = np.zeros(n)
    occ[cont] = np.linalg.solve(np.eye(len(cont)) - Q.T, start_vec[cont])
    law = np.where(halt, start_vec, 0.0) + np.where(halt, P.T @ occ, 0.0)
    return law


# -- embedding LP --------------------------------------------------------------------------------

def embedding_value(P, bnd, coords, h, mu, nu, alpha, sense="min"):
    """Optimal value of sum_x mu(x) sum_z |x - z|^alpha s_x(z) by a dense linprog.

    Variables per start x: stop mass s_x (all nodes) and occupation m_x
    (all nodes, forced to zero on the boundary by bounds).
    """
    n = len(mu)
    starts = np.flatnonzero(mu > 0)
    K = len(starts)
    nv = 2 * n * K
    A_eq, b_eq = [], []
    c = np.zeros(nv)
    bounds = []
    for k, x in enumerate(starts):
        so, mo = 2 * n * k, 2 * n * k + n
        for z in range(n):
            row = np.zeros(nv)
            row[so + z] = 1.0
            row[mo + z] = 1.0
            row[mo:mo + n] -= P[:, z]
            A_eq.append(row)
            b_eq.append(1.0 if z == x else 0.0)
        dist = h * np.linalg.norm(coords - coords[x], axis=1)
        c[so:so + n] = mu[x] * dist ** alpha
        bounds += [(0, None)] * n + [(0, 0) if b else (0, None) for b in bnd]
    for z in range(n):
        row = np.zeros(nv)
        for k, x in enumerate(starts):
            row[2 * n * k + z] = mu[x]
        A_eq.append(row)
        b_eq.append(nu[z])
    sgn = 1.0 if sense == "min" else -1.0
    res = linprog(sgn * c, A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=bounds,
                  method="highs")
    if res.status == 2:
        return None
    assert res.status == 0, res.message
    return sgn * res.fun


def transport_w1(a_pts, a_w, b_pts, b_w, h=1.0):
    A = np.asarray(a_pts, float)
    B = np.asarray(b_pts, float)
    C = h * np.linalg.norm(A[:, None] - B[None], axis=2)
    na, nb = len(A), len(B)
    rows = []
    for i in range(na):
        r = np.zeros(na * nb)
        r[i * nb:(i + 1) * nb] = 1
        rows.append(r)
    for j in range(nb):
        r = np.zeros(na * nb)
        r[j::nb] = 1
        rows.append(r)
    res = linprog(C.ravel(), A_eq=np.array(rows), b_eq=np.concatenate([a_w, b_w]),
                  bounds=(0, None), method="highs")
    return res.fun


# -- analytic ----------------------------------------------------------------------------------

def symbolic_laplacian(alpha, d):
    """Laplacian of -alpha |z|^(alpha-2) z_d, differentiated by sympy; returns a numeric callable."""
    import sympy

    zs = sympy.symbols(f"z1:{d + 1}", real=True)
    r = sympy.sqrt(sum(z ** 2 for z in zs))
    a = sympy.nsimplify(alpha)
    h = -a * r ** (a - 2) * zs[-1]
    lap = sum(sympy.diff(h, z, 2) for z in zs)
    return sympy.lambdify(zs, lap, "math")


def gain_direct(x, atoms, h, alpha):
    """int |x - z|^alpha dpsi - |x - bar psi|^alpha with physical coordinates."""
    x = np.asarray(x, float) * h
    pts = np.array([a for a, _ in atoms], float) * h
    w = np.array([m for _, m in atoms])
    bar = w @ pts / w.sum()
    return float(w @ np.linalg.norm(pts - x, axis=1) ** alpha - np.linalg.norm(x - bar) ** alpha)


# -- envelope ------------------------------------------------------------------------------------

def brute_shell_envelope(nodes, h, R_O, f, tol=1e-12, max_iter=10_000):
    """g <- min(g, sphere means) using every exact-distance sphere inside the domain."""
    nodes = [tuple(z) for z in nodes]
    idx = {z: i for i, z in enumerate(nodes)}
    d = len(nodes[0])
    m = int(math.floor(R_O / h + 1e-9))
    offsets = {}
    for p in itertools.product(range(-2 * m, 2 * m + 1), repeat=d):
        q = sum(c * c for c in p)
        if q:
            offsets.setdefault(q, []).append(p)
    spheres = []
    for z in nodes:
        mine = []
        for q, ps in offsets.items():
            r = math.sqrt(q)
            # whole closed ball of radius r around z must be in the node set
            ball_ok = all(tuple(a + b for a, b in zip(z, p)) in idx
                          for qq, pp in offsets.items() if qq <= q for p in pp)
            if ball_ok:
                mine.append([idx[tuple(a + b for a, b in zip(z, p))] for p in ps])
            del r
        spheres.append(mine)
    g = np.array(f, float)
    for _ in range(max_iter):
        new = g.copy()
        for i, sph in enumerate(spheres):
            for mem in sph:
                new[i] = min(new[i], float(np.mean(g[mem])))
        if np.max(g - new) <= tol:
            return new
        g = new
    raise RuntimeError("brute envelope did not converge")


# -- rng -------------------------------------------------------------------------------------------

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix_mix(z):
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK
    return z ^ (z >> 31)


def splitmix_stream(seed, path, count):
    """First `count` uniforms of a path stream, in Python integers."""
    state = splitmix_mix((seed + path * GOLDEN) & MASK)
    out = []
    for _ in range(count):
        state = (state + GOLDEN) & MASK
        out.append((splitmix_mix(state) >> 11) * 2.0 ** -53)
    return out
