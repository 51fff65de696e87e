"""Tiger, sysadmin, and chain domain definitions."""

import numpy as np
import pytest

from bapomcp.domains import ChainDomain, SysadminDomain, TigerDomain, default_chain, make_domain


def rng(seed=0):
    return np.random.default_rng(seed)


# -- tiger -------------------------------------------------------------------


def test_tiger_listen_dynamics():
    d = TigerDomain()
    joint = d.true_joint(0, TigerDomain.LISTEN)
    assert joint[0, 0] == pytest.approx(0.85)
    assert joint[0, 1] == pytest.approx(0.15)
    assert joint[1].sum() == 0.0  # listening never moves the tiger


def test_tiger_open_resets_uniformly():
    d = TigerDomain()
    joint = d.true_joint(0, TigerDomain.OPEN_LEFT)
    np.testing.assert_allclose(joint.sum(axis=1), [0.5, 0.5])
    np.testing.assert_allclose(joint.sum(axis=0), [0.5, 0.5])


def test_tiger_rows_are_distributions():
    d = TigerDomain()
    for s in range(2):
        for a in range(3):
            joint = d.true_joint(s, a)
            assert joint.min() >= 0
            assert joint.sum() == pytest.approx(1.0, abs=1e-9)


def test_tiger_rewards():
    d = TigerDomain()
    assert d.reward(0, TigerDomain.LISTEN) == -1.0
    assert d.reward(0, TigerDomain.OPEN_LEFT) == -100.0
    assert d.reward(0, TigerDomain.OPEN_RIGHT) == 10.0
    assert d.reward(1, TigerDomain.OPEN_LEFT) == 10.0
    assert d.reward_bounds == (-100.0, 10.0)


def test_tiger_prior_observation_accuracy():
    d = TigerDomain()
    prior = d.prior_counts(rng(1))
    for s in range(2):
        assert prior.expected_prob(s, TigerDomain.LISTEN, s, s) == pytest.approx(
            0.625, abs=1e-9
        )


def test_tiger_prior_transitions_nearly_exact():
    d = TigerDomain()
    prior = d.prior_counts(rng(2))
    for s in range(2):
        for a in range(3):
            true_marginal = d.true_joint(s, a).sum(axis=1)
            trow = prior.trans_counts(s, a)
            np.testing.assert_allclose(trow / trow.sum(), true_marginal, atol=1e-6)


def test_tiger_prior_rows_positive():
    prior = TigerDomain().prior_counts(rng(3))
    assert np.all(prior.trans.sum(axis=2) > 0)
    assert np.all(prior.obs.sum(axis=2) > 0)


# -- sysadmin ----------------------------------------------------------------


def test_sysadmin_sizes():
    d = SysadminDomain(3)
    assert (d.num_states, d.num_actions, d.num_observations) == (8, 7, 3)


def test_sysadmin_deterministic_when_failures_off():
    d = SysadminDomain(3, f=0.0)
    for s in range(8):
        for a in range(7):
            row = d.true_trans_row(s, a)
            assert np.count_nonzero(row) == 1


def test_sysadmin_single_machine_failure_rate():
    d = SysadminDomain(1, f=0.1)
    row = d.true_trans_row(0, d.noop_action)  # working, do nothing
    assert row[1] == pytest.approx(0.1)
    assert row[0] == pytest.approx(0.9)


def test_sysadmin_ping_observation_deterministic():
    d = SysadminDomain(3, f=0.1)
    for s1 in range(8):
        assert d.observation_of(d.ping_action(1), s1) == (
            SysadminDomain.OBS_FAILING if s1 >> 1 & 1 else SysadminDomain.OBS_WORKING
        )
        assert d.observation_of(d.noop_action, s1) == SysadminDomain.OBS_NULL
        assert d.observation_of(d.reboot_action(0), s1) == SysadminDomain.OBS_NULL


def test_sysadmin_reboot_always_fixes_its_machine():
    d = SysadminDomain(3, f=0.5)
    r = rng(4)
    for _ in range(200):
        s = int(r.integers(8))
        s1, _ = d.sample_true(s, d.reboot_action(2), r)
        assert not s1 >> 2 & 1


def test_sysadmin_failing_machines_stay_failing_without_reboot():
    d = SysadminDomain(3, f=0.3)
    r = rng(5)
    for _ in range(200):
        s = int(r.integers(8))
        s1, _ = d.sample_true(s, d.noop_action, r)
        assert s & s1 == s  # no failing bit ever clears spontaneously


def test_sysadmin_rows_are_distributions():
    d = SysadminDomain(3, f=0.1)
    for s in range(8):
        for a in range(7):
            joint = d.true_joint(s, a)
            assert joint.min() >= 0
            assert joint.sum() == pytest.approx(1.0, abs=1e-9)


def test_sysadmin_sample_true_matches_row():
    d = SysadminDomain(2, f=0.2)
    r = rng(6)
    s, a = 1, d.noop_action
    freq = np.zeros(4)
    n = 40_000
    for _ in range(n):
        s1, _ = d.sample_true(s, a, r)
        freq[s1] += 1
    np.testing.assert_allclose(freq / n, d.true_trans_row(s, a), atol=0.01)


def test_sysadmin_rewards():
    d = SysadminDomain(3)
    assert d.reward(0, d.noop_action) == 0.0
    assert d.reward(0b011, d.ping_action(0)) == -21.0
    assert d.reward(0b100, d.reboot_action(1)) == -30.0
    assert d.reward_bounds == (-50.0, 0.0)


def test_sysadmin_reward_counts_failing_machines():
    d = SysadminDomain(4)
    assert d.num_failing(0b1011) == 3
    assert d.reward(0b1111, d.noop_action) == -40.0


def test_sysadmin_initial_state_all_working():
    d = SysadminDomain(5)
    assert d.sample_initial_state(rng(7)) == 0
    assert d.initial_state_probs[0] == 1.0


def test_sysadmin_prior_rows_sum_to_twenty():
    d = SysadminDomain(3)
    prior = d.prior_counts(rng(8))
    np.testing.assert_allclose(prior.trans.sum(axis=2), 20.0, atol=1e-9)
    assert prior.trans.shape == (8, 7, 8)  # 56 noisy rows of 8 parameters


def test_sysadmin_prior_perturbation_and_floor():
    # with f=0 the true probabilities are 0 or 1, so before normalization
    # every noisy count must be one of {0.001, 0.15, 0.85, 1.15}; rows are
    # rescaled to total 20, which preserves the ratios
    d = SysadminDomain(2, f=0.0)
    prior = d.prior_counts(rng(9))
    allowed = np.array([0.001, 0.15, 0.85, 1.15])

    def consistent_scale_exists(row):
        for entry in row:
            for base in allowed:
                scale = entry / base
                rescaled = row / scale
                if all(np.min(np.abs(allowed - v)) < 1e-9 for v in rescaled):
                    return True
        return False

    for s in range(4):
        for a in range(5):
            assert consistent_scale_exists(prior.trans[s, a])
    assert np.all(prior.trans > 0)


def test_sysadmin_prior_observation_model_known():
    d = SysadminDomain(2, f=0.1)
    prior = d.prior_counts(rng(10))
    for a in range(5):
        for s1 in range(4):
            row = prior.obs_counts(a, s1)
            assert row[d.observation_of(a, s1)] == pytest.approx(1e6)
            assert row.sum() == pytest.approx(1e6)


def test_sysadmin_prior_reproducible():
    d = SysadminDomain(3)
    a = d.prior_counts(rng(11))
    b = d.prior_counts(rng(11))
    assert np.array_equal(a.trans, b.trans)
    assert np.array_equal(a.obs, b.obs)


def test_sysadmin_parameter_scaling():
    for n in (3, 4, 5):
        d = SysadminDomain(n)
        prior = d.prior_counts(rng(12))
        assert prior.trans.size == 2**n * (2 * n + 1) * 2**n


def test_sysadmin_validates_arguments():
    with pytest.raises(ValueError):
        SysadminDomain(0)
    with pytest.raises(ValueError):
        SysadminDomain(2, f=1.5)


# -- chain -------------------------------------------------------------------


def test_chain_rejects_bad_dynamics():
    bad = np.full((2, 2, 4), 0.3)
    with pytest.raises(ValueError):
        ChainDomain(bad, np.ones((2, 2, 4)))


def test_default_chain_is_well_formed():
    d = default_chain()
    for s in range(2):
        for a in range(2):
            assert d.true_joint(s, a).sum() == pytest.approx(1.0)
    prior = d.prior_counts(rng(13))
    assert prior.counts.shape == (2, 2, 4)


def test_make_domain_factory():
    assert isinstance(make_domain("tiger"), TigerDomain)
    assert isinstance(make_domain("sysadmin", n=4, f=0.2), SysadminDomain)
    assert isinstance(make_domain("chain"), ChainDomain)
    with pytest.raises(ValueError):
        make_domain("gridworld")
