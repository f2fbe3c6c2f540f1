import numpy as np
import pytest

from oracles import dense_walk, green_potential
from skembed import order
from skembed.lattice import WalkKernel, build_lattice
from skembed.measures import DiscreteMeasure
from skembed.presets import annulus_pair
from skembed.stopping import replay


def _random_pair(spec, K, rng, reachable):
    inter = np.flatnonzero(spec.interior)
    pick = rng.choice(inter, 3, replace=False)
    mu = np.zeros(spec.n)
    mu[pick] = rng.random(3)
    mu /= mu.sum()
    if reachable:
        rho = rng.random(spec.n) * (rng.random(spec.n) < 0.5)
        nu, _ = replay(K.P, rho, mu)
    else:
        nu = np.zeros(spec.n)
        nu[rng.choice(inter, 2, replace=False)] = 0.5
    return (DiscreteMeasure.from_array(spec, mu), DiscreteMeasure.from_array(spec, nu, tol=1e-15))


def test_potential_matches_dense(rng):
    spec = build_lattice(2, 1.0, 4.0)
    K = WalkKernel(spec)
    _, _, P, bnd = dense_walk(2, 1.0, 4.0)
    mu, nu = _random_pair(spec, K, rng, True)
    M, defect = order.aggregate_potential(spec, K, mu, nu.normalized())
    ref = green_potential(P, bnd, mu.to_array(spec), nu.normalized().to_array(spec))
    assert np.allclose(M, ref, atol=1e-12)


@pytest.mark.parametrize("d,R", [(2, 3.0), (3, 3.0)])
def test_routes_agree(rng, d, R):
    spec = build_lattice(d, 1.0, R)
    K = WalkKernel(spec)
    for trial in range(6):
        mu, nu = _random_pair(spec, K, rng, reachable=trial % 2 == 0)
        nu = nu.normalized()
        a = order.check_order_lp(spec, K, mu, nu)
        b = order.check_order_potential(spec, K, mu, nu)
        assert a.in_order == b.in_order
        if trial % 2 == 0:
            assert a.in_order
        if not a.in_order:
            chk = order.check_witness(spec, K, a.witness, mu, nu)
            assert chk["ok"], chk


def test_annulus_witness():
    I = annulus_pair()
    K = I.kernel()
    v = order.check_order_lp(I.spec, K, I.mu, I.nu)
    assert not v.in_order
    assert v.witness_max_violation <= order.SUBHARMONIC_TOL
    assert np.max(np.abs(v.witness)) == pytest.approx(1.0)
    f = v.witness
    # subharmonic on the interior, yet its mean under nu falls below its mean under mu
    assert np.all((K.P @ f - f)[I.spec.interior] >= -1e-9)
    assert I.mu.to_array(I.spec) @ f - I.nu.to_array(I.spec) @ f > 1e-3
    assert not order.check_order_potential(I.spec, K, I.mu, I.nu).in_order
    V = I.on_domain("V")
    assert order.check_order_potential(V.spec, V.kernel(), V.mu, V.nu).in_order


def test_markov_policy_embeds(rng):
    spec = build_lattice(2, 1.0, 4.0)
    K = WalkKernel(spec)
    mu, nu = _random_pair(spec, K, rng, True)
    nu = nu.normalized()
    M, _ = order.aggregate_potential(spec, K, mu, nu)
    rho = order.markov_policy(spec, M, nu)
    s, _ = replay(K.P, rho, mu.to_array(spec))
    assert np.allclose(s, nu.to_array(spec), atol=1e-10)


def test_json_verdict():
    I = annulus_pair()
    v = order.check_order_lp(I.spec, I.kernel(), I.mu, I.nu)
    import json
    data = json.loads(v.to_json())
    assert data["in_order"] is False and data["witness_max_violation"] is not None
