import numpy as np
import pytest

from oracles import transport_w1
from skembed.errors import MassMismatch, UnsupportedAtom
from skembed.lattice import build_lattice
from skembed.measures import (DiscreteMeasure, barycenter, common_mass, is_invariant,
                              modulus_pushforward, power_moment, r_equivalent, symmetrize,
                              wasserstein1)


def test_basic_algebra():
    a = DiscreteMeasure({(0, 0): 0.5, (1, 0): 0.5})
    b = DiscreteMeasure.point((1, 0), 0.25)
    assert (a + b)[(1, 0)] == 0.75
    assert a.scaled(2).total == 2.0
    assert a.is_probability()
    with pytest.raises(ValueError):
        DiscreteMeasure({(0, 0): -1.0})
    assert len(DiscreteMeasure({(0, 0): 0.0})) == 0


def test_json_round_trip():
    a = DiscreteMeasure({(0, 1): 0.3, (2, -1): 0.7})
    assert dict(DiscreteMeasure.from_json_atoms(a.to_json_atoms())) == dict(a)


def test_array_bridge_and_off_lattice():
    spec = build_lattice(2, 1.0, 3.0)
    a = DiscreteMeasure({(0, 1): 0.3, (2, -1): 0.7})
    assert dict(DiscreteMeasure.from_array(spec, a.to_array(spec))) == dict(a)
    with pytest.raises(UnsupportedAtom):
        DiscreteMeasure.point((5, 5)).to_array(spec)


def test_symmetrize_invariant_and_profile_preserving():
    spec = build_lattice(2, 1.0, 3.0)
    a = DiscreteMeasure({(1, 2): 0.5, (0, 1): 0.5})
    s = symmetrize(a, spec)
    assert is_invariant(s, spec) and not is_invariant(a, spec)
    assert r_equivalent(a, s, spec, tol=1e-14)
    assert modulus_pushforward(s, spec).total == pytest.approx(1.0)


def test_common_mass_and_moments():
    a = DiscreteMeasure({(0, 0): 0.6, (1, 0): 0.4})
    b = DiscreteMeasure({(0, 0): 0.2, (0, 1): 0.8})
    assert dict(common_mass(a, b)) == {(0, 0): 0.2}
    assert power_moment(a, (0, 0), 2.0, h=0.5) == pytest.approx(0.4 * 0.25)
    assert np.allclose(barycenter(a), [0.4, 0.0])


def test_w1_matches_linprog(rng):
    for _ in range(5):
        grid = np.array([(i, j) for i in range(-3, 4) for j in range(-3, 4)])
        pa = grid[rng.choice(len(grid), 4, replace=False)]
        pb = grid[rng.choice(len(grid), 5, replace=False)]
        wa = rng.random(4)
        wb = rng.random(5)
        wa /= wa.sum()
        wb /= wb.sum()
        A = DiscreteMeasure({tuple(p): w for p, w in zip(pa, wa)})
        B = DiscreteMeasure({tuple(p): w for p, w in zip(pb, wb)})
        ref = transport_w1(list(A.keys()), list(A.values()), list(B.keys()), list(B.values()), 0.5)
        assert wasserstein1(A, B, 0.5) == pytest.approx(ref, abs=1e-9)
    with pytest.raises(MassMismatch):
        wasserstein1(A, B.scaled(2))
