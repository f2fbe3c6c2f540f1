# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: lattice walk simulation and the shell-average envelope sweep.

Bit-compatible with skembed._kernels_py (same splitmix64 streams and draw order).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport isnan
from libc.stdint cimport uint64_t, int64_t, int8_t, uint8_t

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t* state) noexcept nogil:
    state[0] += GAMMA
    return <double>(_mix(state[0]) >> 11) * (1.0 / 9007199254740992.0)


def walk_paths(const int64_t[:, ::1] neighbors, const uint8_t[::1] boundary,
               const double[:, ::1] rho, const int64_t[::1] start_node,
               const int64_t[::1] start_row, uint64_t[::1] states, int64_t max_steps,
               int64_t cond_node=-1):
    cdef Py_ssize_t n_paths = start_node.shape[0]
    cdef Py_ssize_t n = neighbors.shape[0]
    cdef int d2 = neighbors.shape[1]
    terminal_a = np.empty(n_paths, dtype=np.int64)
    steps_a = np.zeros(n_paths, dtype=np.int64)
    status_a = np.zeros(n_paths, dtype=np.int8)
    hit_a = np.zeros(n_paths, dtype=np.uint8)
    visits_a = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] terminal = terminal_a
    cdef int64_t[::1] steps = steps_a
    cdef int8_t[::1] status = status_a
    cdef uint8_t[::1] hit = hit_a
    cdef int64_t[::1] visits = visits_a
    cdef Py_ssize_t i
    cdef int64_t pos, row, t, k
    cdef double r, u
    cdef uint64_t st
    with nogil:
        for i in range(n_paths):
            pos = start_node[i]
            row = start_row[i]
            st = states[i]
            t = 0
            while True:
                visits[pos] += 1
                if pos == cond_node:
                    hit[i] = 1
                if boundary[pos]:
                    break
                if t >= max_steps:
                    status[i] = 1
                    break
                r = rho[row, pos]
                if isnan(r):
                    status[i] = 2
                    break
                u = _uniform(&st)
                if u < r:
                    break
                u = _uniform(&st)
                k = <int64_t>(u * d2)
                if k >= d2:
                    k = d2 - 1
                pos = neighbors[pos, k]
                t += 1
            terminal[i] = pos
            steps[i] = t
            states[i] = st
    return terminal_a, steps_a, status_a, hit_a, visits_a


def shell_sweep(const double[::1] values, const int64_t[::1] sph_ptr,
                const int64_t[::1] mem_ptr, const int64_t[::1] members):
    cdef Py_ssize_t n = values.shape[0]
    out_a = np.array(values, dtype=np.float64, copy=True)
    cdef double[::1] out = out_a
    cdef Py_ssize_t x, s, j
    cdef double acc, best
    with nogil:
        for x in range(n):
            best = values[x]
            for s in range(sph_ptr[x], sph_ptr[x + 1]):
                acc = 0.0
                for j in range(mem_ptr[s], mem_ptr[s + 1]):
                    acc = acc + values[members[j]]
                acc = acc / (mem_ptr[s + 1] - mem_ptr[s])
                if acc < best:
                    best = acc
            out[x] = best
    return out_a

