import numpy as np
import pytest

from oracles import dense_walk, enumerate_nodes
from skembed.errors import DegenerateDomain, InvalidDimension, ZeroVector
from skembed.lattice import LatticeSpec, WalkKernel, build_lattice, cos_angle, point_group


@pytest.mark.parametrize("d,h,R,R_in", [(2, 1.0, 3.0, None), (2, 0.5, 4.0, 1.0), (3, 1.0, 3.0, None)])
def test_nodes_and_kernel_match_dense(d, h, R, R_in):
    spec = build_lattice(d, h, R, R_in=R_in)
    nodes, _, P, bnd = dense_walk(d, h, R, R_in)
    assert spec.nodes == nodes
    assert np.array_equal(spec.boundary, bnd)
    assert np.allclose(WalkKernel(spec).P.toarray(), P)


def test_rows_stochastic_on_interior():
    spec = build_lattice(3, 1.0, 4.0)
    P = WalkKernel(spec).P
    rs = np.asarray(P.sum(axis=1)).ravel()
    assert np.allclose(rs[spec.interior], 1.0)
    assert np.all(rs[spec.boundary] == 0.0)


def test_annulus_has_inner_boundary():
    spec = build_lattice(2, 0.5, 4.0, R_in=1.0)
    inner = spec.norms < 1.2
    assert inner.any() and np.all(spec.boundary[inner])
    assert not spec.contains((0, 0))


def test_shells_partition_nodes():
    spec = build_lattice(3, 1.0, 5.0)
    members = sorted(i for s in spec.shells for i in s.members)
    assert members == list(range(spec.n))
    for s in spec.shells:
        assert np.all(np.abs(spec.norms[list(s.members)] - s.radius) <= spec.shell_tol + 1e-9)


def test_exact_shells():
    spec = build_lattice(2, 1.0, 3.0, shell_tol=0.0)
    for s in spec.shells:
        assert np.allclose(spec.norms[list(s.members)], s.radius)


def test_point_group_order_and_action():
    assert len(point_group(2)) == 8
    assert len(point_group(3)) == 48
    spec = build_lattice(3, 1.0, 3.0)
    act = spec.group_action
    for row in act:
        assert sorted(row) == list(range(spec.n))
        assert np.allclose(spec.norms[row], spec.norms)


def test_errors():
    with pytest.raises(InvalidDimension):
        build_lattice(4, 1.0, 3.0)
    with pytest.raises(DegenerateDomain):
        build_lattice(2, 1.0, 0.5)
    with pytest.raises(ZeroVector):
        cos_angle((0, 0), (1, 0))


def test_round_trip():
    spec = build_lattice(2, 0.5, 4.0, R_in=1.0)
    again = LatticeSpec.from_dict(spec.to_dict())
    assert again.nodes == spec.nodes
    with pytest.raises(ValueError):
        LatticeSpec.from_dict({**spec.to_dict(), "colour": 1})


def test_enumeration_count_d2():
    # nodes of the disc of radius 3: Gauss circle count
    assert len(enumerate_nodes(2, 1.0, 3.0)) == 29 == build_lattice(2, 1.0, 3.0).n
