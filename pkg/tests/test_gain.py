import numpy as np
import pytest

from oracles import gain_direct, symbolic_laplacian
from skembed import gain
from skembed.errors import EmptyMeasure, ProfileUnreachable, ZeroVector
from skembed.lattice import WalkKernel, build_lattice
from skembed.measures import DiscreteMeasure


def test_gain_direct(rng):
    atoms = [((1, 0), 0.25), ((-1, 2), 0.5), ((0, -2), 0.25)]
    psi = DiscreteMeasure(dict(atoms))
    for alpha in (0.5, 1.0, 2.0, 3.0):
        x = rng.integers(-4, 5, size=2)
        assert gain.gain(x, psi, alpha, 0.5) == pytest.approx(gain_direct(x, atoms, 0.5, alpha))
    with pytest.raises(EmptyMeasure):
        gain.gain((1, 0), DiscreteMeasure(), 1.0)


def test_alpha_two_gain_is_variance():
    atoms = [((1, 0), 0.5), ((-1, 0), 0.25), ((0, 3), 0.25)]
    psi = DiscreteMeasure(dict(atoms))
    g = [gain.gain(x, psi, 2.0) for x in [(5, 1), (-3, 2), (0, -7)]]
    assert np.ptp(g) < 1e-12


@pytest.mark.parametrize("alpha,d", [(0.5, 2), (1.0, 3), (3.0, 2), (2.5, 3)])
def test_laplacian_closed_form_matches_sympy(rng, alpha, d):
    ref = symbolic_laplacian(alpha, d)
    for _ in range(10):
        z = rng.normal(size=d)
        assert gain.laplacian_h(z, alpha) == pytest.approx(ref(*z), rel=1e-10, abs=1e-12)
    with pytest.raises(ZeroVector):
        gain.laplacian_h(np.zeros(d), alpha)


@pytest.fixture(scope="module")
def small2():
    spec = build_lattice(2, 0.5, 3.0)
    return spec, WalkKernel(spec)


def test_bounds_attained(small2):
    spec, K = small2
    gb = gain.gain_bounds((4, 0), (2, 0), {2.0: 1.0}, spec, K, 1.0)
    assert gb.lower <= gb.upper
    assert gb.check((4, 0), 1.0, spec.h)
    assert gain.gain((4, 0), gb.sigma_lower, 1.0, spec.h) == pytest.approx(gb.lower, abs=1e-10)
    assert abs(gb.lower - gb.lp_lower) < 1e-8 and abs(gb.upper - gb.lp_upper) < 1e-8
    with pytest.raises(ZeroVector):
        gain.gain_bounds((0, 0), (2, 0), {2.0: 1.0}, spec, K, 1.0)
    with pytest.raises(ProfileUnreachable):
        gain.gain_bounds((4, 0), (2, 0), {0.5: 1.0}, spec, K, 1.0)


def test_verdict_logic():
    assert gain.monotonicity_verdict([3, 2, 1], 1.0) == gain.PASS
    assert gain.monotonicity_verdict([1, 2, 3], 3.0) == gain.PASS
    assert gain.monotonicity_verdict([1, 2, 3], 1.0) == gain.FAIL
    assert gain.monotonicity_verdict([3, 3, 1], 1.0) == gain.INCONCLUSIVE
    assert gain.monotonicity_verdict([1, 1 + 1e-12], 2.0) == gain.PASS


def test_scan_d2_alpha1(small2):
    spec, K = small2
    table = gain.monotonicity_scan(2.0, (2, 0), {2.0: 1.0}, spec, K, 1.0)
    assert table.verdict == gain.PASS
    cos = [r[0] for r in table.rows]
    assert cos == sorted(cos, reverse=True)
