import numpy as np
import pytest

from oracles import dense_walk, embedding_value
from skembed import embed
from skembed.errors import InfeasibleEmbedding, NonProbability, SupportOffLattice
from skembed.measures import DiscreteMeasure, is_invariant
from skembed.presets import annulus_pair, delta_start, two_shell_mixture


@pytest.fixture(scope="module")
def mixture():
    return two_shell_mixture(d=2, h=1.0, R_O=5.0, r_mu=1.0, r1=2.0, r2=3.0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("sense", ["min", "max"])
def test_objective_matches_dense_lp(mixture, alpha, sense):
    I = mixture
    spec, K = I.spec, I.kernel()
    _, _, P, bnd = dense_walk(2, 1.0, 5.0)
    ref = embedding_value(P, bnd, spec.coords.astype(float), 1.0, I.mu.to_array(spec),
                          I.nu.to_array(spec), alpha, sense)
    sol = embed.solve(embed.build_problem(spec, K, I.mu, I.nu, alpha=alpha, sense=sense))
    assert sol.objective == pytest.approx(ref, abs=1e-9)
    assert max(sol.residuals().values()) < 1e-9
    rep = embed.verify_dual(sol)
    assert rep.ok, rep.to_dict()
    red = embed.solve(embed.build_problem(spec, K, I.mu, I.nu, alpha=alpha, sense=sense,
                                          symmetry_reduction=True))
    assert red.objective == pytest.approx(ref, abs=1e-9)
    assert np.allclose(red.terminal_law(), I.nu.to_array(spec), atol=1e-9)


@pytest.mark.parametrize("alpha,sense", [(1.0, "min"), (3.0, "max")])
def test_entropic_close_to_exact(mixture, alpha, sense):
    I = mixture
    prob = embed.build_problem(I.spec, I.kernel(), I.mu, I.nu, alpha=alpha, sense=sense)
    exact = embed.solve(prob)
    eps = 1e-3
    ent = embed.solve(prob, method="entropic", eps=eps)
    cmax = float(np.max(np.abs(prob.lp.c)))
    assert abs(ent.objective - exact.objective) <= eps * cmax * np.log(prob.lp.n_vars)
    assert max(ent.residuals().values()) < 1e-6


def test_delta_start_is_one_step():
    I = delta_start()
    sol = embed.solve(embed.build_problem(I.spec, I.kernel(), I.mu, I.nu))
    assert sol.objective == pytest.approx(1.0)
    assert sol.E_tau == pytest.approx(1.0)
    rep = embed.verify_dual(sol)
    assert rep.ok and rep.gap <= 1e-8
    assert not embed.detect_multiple_optima(sol.problem, sol)


def test_group_average_keeps_value(mixture):
    I = mixture
    sol = embed.solve(embed.build_problem(I.spec, I.kernel(), I.mu, I.nu, alpha=1.0))
    avg = embed.group_average(sol)
    assert avg.objective == pytest.approx(sol.objective, abs=1e-9)
    law = DiscreteMeasure.from_array(I.spec, avg.terminal_law(), tol=1e-14)
    assert is_invariant(law, I.spec, tol=1e-9)


def test_infeasible_on_annulus():
    I = annulus_pair()
    with pytest.raises(InfeasibleEmbedding) as info:
        embed.solve(embed.build_problem(I.spec, I.kernel(), I.mu, I.nu, allow_boundary_nu=True))
    assert info.value.certificate is not None
    feas = embed.feasibility(I.spec, I.kernel(), I.mu, I.nu)
    assert not feas.feasible
    V = I.on_domain("V")
    assert embed.feasibility(V.spec, V.kernel(), V.mu, V.nu).feasible


def test_input_validation(mixture):
    I = mixture
    K = I.kernel()
    with pytest.raises(NonProbability):
        embed.build_problem(I.spec, K, I.mu.scaled(2), I.nu)
    with pytest.raises(SupportOffLattice):
        embed.build_problem(I.spec, K, DiscreteMeasure.point((9, 9)), I.nu)
    with pytest.raises(SupportOffLattice):
        embed.build_problem(I.spec, K, I.mu, DiscreteMeasure.point((5, 0)))
    with pytest.raises(ValueError):
        embed.build_problem(I.spec, K, I.mu, I.nu, sense="median")
