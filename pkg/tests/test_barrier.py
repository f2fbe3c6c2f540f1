import json

import numpy as np
import pytest

from skembed import barrier, embed
from skembed.errors import WrongRegime, ZeroStart
from skembed.presets import delta_start, overlap_pair, two_shell_mixture


@pytest.fixture(scope="module")
def mixture():
    return two_shell_mixture(d=2, h=1.0, R_O=5.0)


def _solve(inst, alpha, sense):
    return embed.solve(embed.build_problem(inst.spec, inst.kernel(), inst.mu, inst.nu,
                                           alpha=alpha, sense=sense))


def _mirror(regime):
    return next(r for r in barrier.REGIMES if (r in barrier.TOWARD) != (regime in barrier.TOWARD))


def test_regime_mapping():
    assert barrier.regime_for("min", 1.0) in barrier.TOWARD
    assert barrier.regime_for("max", 3.0) in barrier.TOWARD
    assert barrier.regime_for("min", 3.0) in barrier.AWAY
    assert barrier.regime_for("max", 0.5) in barrier.AWAY
    with pytest.raises(WrongRegime):
        barrier.regime_for("min", 2.0)


@pytest.mark.parametrize("alpha,sense", [(1.0, "min"), (3.0, "min"), (0.5, "max")])
def test_caps_and_control(mixture, alpha, sense):
    sol = _solve(mixture, alpha, sense)
    reg = barrier.regime_for(sense, alpha)
    good = barrier.verify_cap_structure(sol, reg)
    assert good.n_violations == 0 and good.advisory
    bad = barrier.verify_cap_structure(sol, _mirror(reg))
    assert bad.n_violations > 0
    x = sol.spec.nodes[sol.starts[0]]
    assert barrier.forbidden_pairs(sol, x, reg) == []
    assert bad.to_csv().count("\n") == len(bad.rows) + 1


def test_policy_replay_and_json(mixture):
    sol = _solve(mixture, 1.0, "min")
    assert barrier.replay_error(sol) < 1e-9
    pol = barrier.build_policy(sol)
    again = barrier.BarrierPolicy.from_dict(json.loads(pol.to_json()))
    assert np.array_equal(np.isnan(again.rho), np.isnan(pol.rho))
    assert np.allclose(np.nan_to_num(again.rho), np.nan_to_num(pol.rho), atol=1e-11)
    S, _ = barrier.replay_policy(again, mixture.kernel())
    assert np.allclose(again.weights @ S, mixture.nu.to_array(mixture.spec), atol=1e-9)


def test_randomization_profile_bounds(mixture):
    prof = barrier.randomization_profile(_solve(mixture, 1.0, "min"))
    assert 0.0 <= prof.overall <= 1.0
    assert all(0.0 <= v <= 1.0 for v in prof.per_shell.values())


def test_replayed_solution_is_hitting_rule(mixture):
    spec = mixture.spec
    rho = (spec.norms >= 2.5).astype(float)
    rs = barrier.replayed_solution(spec, mixture.kernel(), mixture.mu, rho)
    assert rs.status == barrier.REPLAYED
    assert np.allclose(rs.s.sum(axis=1), 1.0)
    rep = barrier.verify_cap_structure(rs, "min_alpha_lt2")
    assert rep.n_violations == 0


def test_zero_start_and_common_mass():
    d0 = delta_start()
    with pytest.raises(ZeroStart):
        barrier.verify_cap_structure(_solve(d0, 1.0, "min"), "min_alpha_lt2")
    ov = overlap_pair()
    res = barrier.common_mass_check(_solve(ov, 1.0, "min"))
    assert res.passed and res.worst_deficit <= 1e-8
    with pytest.raises(WrongRegime):
        barrier.common_mass_check(_solve(ov, 3.0, "min"))
