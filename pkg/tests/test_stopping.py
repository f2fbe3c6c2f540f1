import numpy as np
import pytest

from oracles import dense_walk, exit_law, superharmonic_majorant
from skembed.lattice import WalkKernel, build_lattice
from skembed.stopping import replay, stopping_value


@pytest.mark.parametrize("d,R", [(2, 4.0), (3, 3.0)])
def test_majorant_matches_value_iteration(rng, d, R):
    spec = build_lattice(d, 1.0, R)
    K = WalkKernel(spec)
    _, _, P, bnd = dense_walk(d, 1.0, R)
    for _ in range(3):
        f = rng.normal(size=spec.n)
        v, cont = stopping_value(K.P, spec.interior, f, return_set=True)
        ref = superharmonic_majorant(P, bnd, f)
        assert np.max(np.abs(v - ref)) < 1e-10
        assert np.all(v >= f - 1e-12)
        assert np.all((K.P @ v)[spec.interior] <= v[spec.interior] + 1e-12)
        assert not np.any(cont & spec.boundary)


def test_replay_is_exit_law():
    spec = build_lattice(2, 1.0, 4.0)
    K = WalkKernel(spec)
    _, _, P, bnd = dense_walk(2, 1.0, 4.0)
    stop = spec.norms >= 2.5
    rho = np.where(stop, 1.0, 0.0)
    start = np.zeros(spec.n)
    start[spec.node_index((1, 0))] = 1.0
    s, m = replay(K.P, rho, start)
    assert np.allclose(s, exit_law(P, bnd, start, stop), atol=1e-13)
    assert s.sum() == pytest.approx(1.0)
    # expected number of steps equals total occupation
    assert m.sum() > 0


def test_randomized_replay_conserves_mass(rng):
    spec = build_lattice(3, 1.0, 3.0)
    K = WalkKernel(spec)
    rho = rng.random(spec.n)
    start = np.zeros(spec.n)
    start[spec.node_index((0, 0, 0))] = 1.0
    s, m = replay(K.P, rho, start)
    assert s.sum() == pytest.approx(1.0, abs=1e-12)
    # balance: m + s - P^T m = start
    assert np.allclose(m + s - K.P.T @ m, start, atol=1e-13)
