"""Time the compiled kernels against the numpy fallback and check they agree.

    python benchmarks/bench_kernels.py [--paths 200000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from skembed import barrier, embed, kernels
from skembed.envelope import sphere_table
from skembed.lattice import build_lattice
from skembed.presets import two_shell_mixture


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_walk(n_paths, repeat):
    inst = two_shell_mixture()
    sol = embed.solve(embed.build_problem(inst.spec, inst.kernel(), inst.mu, inst.nu))
    pol = barrier.build_policy(sol)
    spec = inst.spec
    states0 = kernels.path_states(7, np.arange(n_paths, dtype=np.uint64))
    rows = np.arange(n_paths) % len(pol.starts)
    starts = pol.starts[rows]
    res = {}
    for be in ("cython", "numpy"):
        def go():
            return kernels.walk_paths(spec.neighbors, spec.boundary, pol.rho, starts, rows,
                                      states0.copy(), 10_000, backend=be)
        res[be] = best_of(go, repeat)
    same = all(np.array_equal(a, b) for a, b in zip(res["cython"][1], res["numpy"][1]))
    return res["cython"][0], res["numpy"][0], same


def bench_sweep(repeat):
    spec = build_lattice(3, 0.5, 5.0)
    tab = sphere_table(spec)
    f = -spec.norms
    res = {}
    for be in ("cython", "numpy"):
        def go():
            return kernels.shell_sweep(f, tab.sph_ptr, tab.mem_ptr, tab.members, backend=be)
        res[be] = best_of(go, repeat)
    return res["cython"][0], res["numpy"][0], bool(np.array_equal(res["cython"][1], res["numpy"][1]))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        raise SystemExit("compiled kernels not built; run pip install -e . first")
    print(f"{'kernel':<14}{'cython [s]':>12}{'numpy [s]':>12}{'speedup':>10}  identical")
    tc, tn, same = bench_walk(args.paths, args.repeat)
    print(f"{'walk_paths':<14}{tc:12.4f}{tn:12.4f}{tn / tc:10.1f}  {same}")
    tc, tn, same = bench_sweep(args.repeat)
    print(f"{'shell_sweep':<14}{tc:12.4f}{tn:12.4f}{tn / tc:10.1f}  {same}")


if __name__ == "__main__":
    main()
