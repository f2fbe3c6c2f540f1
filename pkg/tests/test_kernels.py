import numpy as np
import pytest

from oracles import splitmix_stream
from skembed import kernels
from skembed.envelope import sphere_table
from skembed.lattice import build_lattice

BACKENDS = ["numpy"] + (["cython"] if kernels.BACKEND == "cython" else [])


def test_rng_matches_reference():
    st = kernels.path_states(12345, np.arange(4, dtype=np.uint64))
    draws = np.array([kernels.next_uniform(st) for _ in range(5)]).T
    for p in range(4):
        assert draws[p].tolist() == splitmix_stream(12345, p, 5)


def _walk_inputs(rng):
    spec = build_lattice(2, 1.0, 4.0)
    rho = rng.random((2, spec.n)) * 0.3
    rho[:, spec.boundary] = 1.0
    n = 3000
    rows = rng.integers(0, 2, n)
    starts = np.where(rows == 0, spec.node_index((0, 0)), spec.node_index((1, 1)))
    return spec, rho, starts, rows


@pytest.mark.parametrize("backend", BACKENDS)
def test_walk_ends_on_stops(rng, backend):
    spec, rho, starts, rows = _walk_inputs(rng)
    st = kernels.path_states(1, np.arange(len(starts), dtype=np.uint64))
    term, steps, status, hit, visits = kernels.walk_paths(spec.neighbors, spec.boundary, rho,
                                                          starts, rows, st, 10_000, backend=backend)
    assert np.all(status == kernels.OK)
    assert visits.sum() == steps.sum() + len(starts)
    # zero stop probability on the interior means the walk must exit at the boundary
    rho0 = np.where(spec.boundary, 1.0, 0.0)[None].repeat(2, 0)
    st = kernels.path_states(1, np.arange(len(starts), dtype=np.uint64))
    term, *_ = kernels.walk_paths(spec.neighbors, spec.boundary, rho0, starts, rows, st, 10_000,
                                  backend=backend)
    assert np.all(spec.boundary[term])


def test_backends_identical(rng):
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernels not built")
    spec, rho, starts, rows = _walk_inputs(rng)
    rho[1, spec.node_index((2, 0))] = np.nan
    outs = []
    for be in BACKENDS:
        st = kernels.path_states(9, np.arange(len(starts), dtype=np.uint64))
        outs.append(kernels.walk_paths(spec.neighbors, spec.boundary, rho, starts, rows, st, 7,
                                       cond_node=spec.node_index((0, 1)), backend=be) + (st,))
    for a, b in zip(*outs):
        assert np.array_equal(a, b)
    status = outs[0][2]
    assert (status == kernels.CAPPED).any() and (status == kernels.GAP).any()
    spec3 = build_lattice(3, 1.0, 4.0)
    tab = sphere_table(spec3)
    f = rng.normal(size=spec3.n)
    a = kernels.shell_sweep(f, tab.sph_ptr, tab.mem_ptr, tab.members, backend="numpy")
    b = kernels.shell_sweep(f, tab.sph_ptr, tab.mem_ptr, tab.members, backend="cython")
    assert np.array_equal(a, b)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.walk_paths(np.zeros((1, 4)), np.ones(1), np.ones((1, 1)), [0], [0],
                           kernels.path_states(0, [0]), 1, backend="fortran")
