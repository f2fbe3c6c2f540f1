"""Pure numpy implementations of the hot loops (fallback for the compiled core)."""
from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_TO_UNIT = 2.0 ** -53

OK, CAPPED, GAP = 0, 1, 2


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _C1
        z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


def path_states(seed: int, path_ids) -> np.ndarray:
    """Initial splitmix64 state of each path: mix(seed + p * gamma)."""
    p = np.asarray(path_ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(seed) + p * GAMMA)


def next_uniform(state):
    """Advance states in place; return uniforms in [0, 1)."""
    with np.errstate(over="ignore"):
        state += GAMMA
    return (mix64(state) >> np.uint64(11)).astype(np.float64) * _TO_UNIT


def walk_paths(neighbors, boundary, rho, start_node, start_row, states, max_steps, cond_node=-1):
    """Simulate walks under per-start stop probabilities.

    Returns (terminal, steps, status, hit, visits); ``states`` is advanced in place.
    """
    neighbors = np.asarray(neighbors, dtype=np.int64)
    d2 = neighbors.shape[1]
    boundary = np.asarray(boundary, dtype=bool)
    n_paths = len(start_node)
    pos = np.array(start_node, dtype=np.int64)
    row = np.asarray(start_row, dtype=np.int64)
    steps = np.zeros(n_paths, dtype=np.int64)
    status = np.zeros(n_paths, dtype=np.int8)
    hit = np.zeros(n_paths, dtype=np.uint8)
    visits = np.zeros(neighbors.shape[0], dtype=np.int64)
    active = np.arange(n_paths)
    while len(active):
        p = pos[active]
        np.add.at(visits, p, 1)
        if cond_node >= 0:
            hit[active[p == cond_node]] = 1
        live = active[~boundary[p]]
        capped = steps[live] >= max_steps
        status[live[capped]] = CAPPED
        live = live[~capped]
        p = pos[live]
        r = rho[row[live], p]
        gap = np.isnan(r)
        status[live[gap]] = GAP
        live, p, r = live[~gap], p[~gap], r[~gap]
        st = states[live]
        u1 = next_uniform(st)
        states[live] = st
        go = u1 >= r
        live, p = live[go], p[go]
        st = states[live]
        u2 = next_uniform(st)
        states[live] = st
        k = np.minimum((u2 * d2).astype(np.int64), d2 - 1)
        pos[live] = neighbors[p, k]
        steps[live] += 1
        active = live
    return pos, steps, status, hit, visits


def shell_sweep(values, sph_ptr, mem_ptr, members):
    """out[x] = min(values[x], min over spheres S of x of mean(values[S]))."""
    values = np.asarray(values, dtype=np.float64)
    out = values.copy()
    if len(members) == 0:
        return out
    sizes = np.diff(mem_ptr)
    # left-to-right accumulation, same rounding as the compiled loop
    sums = np.zeros(len(sizes))
    for j in range(int(sizes.max())):
        live = sizes > j
        sums[live] += values[members[mem_ptr[:-1][live] + j]]
    means = sums / sizes
    has = np.flatnonzero(np.diff(sph_ptr) > 0)
    mins = np.minimum.reduceat(means, sph_ptr[has])
    out[has] = np.minimum(out[has], mins)
    return out

