import numpy as np
import pytest

from skembed import barrier, embed, mc
from skembed.errors import ConfigError, MassMismatch, PolicyGap
from skembed.measures import DiscreteMeasure
from skembed.presets import delta_start, two_shell_mixture


@pytest.fixture(scope="module")
def policy():
    inst = two_shell_mixture(d=2, h=1.0, R_O=5.0)
    sol = embed.solve(embed.build_problem(inst.spec, inst.kernel(), inst.mu, inst.nu))
    return inst, sol, barrier.build_policy(sol)


def test_replay_within_envelope(policy):
    inst, sol, pol = policy
    rep = mc.simulate(pol, mc.SimConfig(20_000, seed=5))
    cmp = mc.compare(rep, inst.nu)
    assert cmp.passed, cmp
    assert abs(rep.mean_steps - sol.E_tau) <= 3 * rep.steps_sem + 1e-12
    assert rep.terminal_counts.sum() + rep.n_capped == rep.n_paths


def test_thread_count_invariance(policy):
    _, _, pol = policy
    a = mc.simulate(pol, mc.SimConfig(20_000, seed=3, threads=1))
    b = mc.simulate(pol, mc.SimConfig(20_000, seed=3, threads=3))
    assert a.to_json() == b.to_json()
    assert np.array_equal(a.terminal_counts, b.terminal_counts)
    c = mc.simulate(pol, mc.SimConfig(20_000, seed=4))
    assert not np.array_equal(a.terminal_counts, c.terminal_counts)


def test_shifted_target_fails(policy):
    inst, _, pol = policy
    rep = mc.simulate(pol, mc.SimConfig(20_000, seed=1))
    shifted = DiscreteMeasure({(z[0] + 1, z[1]): m for z, m in inst.nu.items()})
    assert not mc.compare(rep, shifted).passed
    with pytest.raises(MassMismatch):
        mc.compare(rep, inst.nu.scaled(0.5))


def test_cap_flag_and_gap(policy):
    _, _, pol = policy
    rep = mc.simulate(pol, mc.SimConfig(2_000, seed=1, max_steps=1))
    assert rep.cap_flag and rep.n_capped > 0
    holes = barrier.BarrierPolicy(pol.spec, pol.starts, pol.weights, np.full_like(pol.rho, np.nan))
    with pytest.raises(PolicyGap):
        mc.simulate(holes, mc.SimConfig(100, seed=1))


def test_strong_markov_at_node(policy):
    _, _, pol = policy
    start = pol.spec.nodes[pol.starts[0]]
    node = (2, 0) if start != (2, 0) else (0, 2)
    hits, n_hit, direct, n_direct = mc.conditioned_sublaw(pol, mc.SimConfig(40_000, seed=2,
                                                                            start=start), start)
    # every path visits its own start: the conditioned law is the full law
    assert n_hit == 40_000
    stat, dof, pval = mc.chi2_homogeneity(hits, direct)
    assert pval > 1e-3


def test_trace_and_config():
    inst = delta_start()
    sol = embed.solve(embed.build_problem(inst.spec, inst.kernel(), inst.mu, inst.nu))
    pol = barrier.build_policy(sol)
    text = mc.trace_csv(pol, mc.SimConfig(50, seed=0), n_trace=5)
    lines = text.strip().splitlines()
    assert lines[0].startswith("path_id,step")
    assert len(lines) == 1 + 5 * 2
    with pytest.raises(ConfigError):
        mc.SimConfig(0)
