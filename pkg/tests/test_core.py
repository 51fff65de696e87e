"""Count tables, Dirichlet sampling, and sampled models."""

import numpy as np
import pytest

from bapomcp.core import (
    AugmentedState,
    DirichletModel,
    FactoredCountTable,
    JointCountTable,
    sample_dirichlet_row,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def joint_table(rows, num_obs=2):
    return JointCountTable(np.array(rows, dtype=float), num_obs)


def single_row_table(row):
    """A 1-state, 1-action joint table whose only row is ``row``."""
    arr = np.array(row, dtype=float).reshape(1, 1, -1)
    return JointCountTable(arr, num_observations=len(row))


# -- expected model ----------------------------------------------------------


def test_expected_prob_uniform_row():
    tbl = single_row_table([1.0, 1.0, 1.0, 1.0])
    probs = [tbl.expected_prob(0, 0, 0, z) for z in range(4)]
    assert probs == [0.25, 0.25, 0.25, 0.25]


def test_expected_prob_direct_ratio():
    tbl = single_row_table([3.0, 7.0])
    assert tbl.expected_prob(0, 0, 0, 0) == pytest.approx(0.3, abs=1e-15)
    assert tbl.expected_prob(0, 0, 0, 1) == pytest.approx(0.7, abs=1e-15)


def test_expected_prob_tiger_listen_prior():
    # 5 correct / 3 incorrect observation counts -> 62.5% expected accuracy
    trans = np.full((2, 1, 2), 0.5) * 1e6
    obs = np.array([[[5.0, 3.0], [3.0, 5.0]]])
    tbl = FactoredCountTable(trans, obs)
    assert tbl.expected_prob(0, 0, 0, 0) == pytest.approx(0.5 * 0.625)
    assert tbl.obs_counts(0, 0)[0] / tbl.obs_counts(0, 0).sum() == pytest.approx(0.625)


def test_expected_probs_sum_to_one():
    r = rng(3)
    counts = r.random((3, 2, 6)) * 5 + 0.01
    tbl = JointCountTable(counts, num_observations=2)
    for s in range(3):
        for a in range(2):
            total = sum(
                tbl.expected_prob(s, a, s1, z) for s1 in range(3) for z in range(2)
            )
            assert total == pytest.approx(1.0, abs=1e-12)


def test_expected_prob_zero_row_is_domain_error():
    tbl = single_row_table([3.0, 7.0])
    tbl.counts[0, 0, :] = 0.0
    with pytest.raises(ValueError):
        tbl.expected_prob(0, 0, 0, 0)


def test_zero_row_rejected_at_construction():
    with pytest.raises(ValueError):
        single_row_table([0.0, 0.0])
    with pytest.raises(ValueError):
        single_row_table([-1.0, 2.0])


def test_sample_expected_degenerate_row():
    tbl = single_row_table([1.0, 0.0, 0.0, 0.0])
    r = rng(1)
    for _ in range(50):
        assert tbl.sample_expected(0, 0, r) == (0, 0)


def test_sample_expected_matches_ratio():
    # Eq-style oracle: normalized counts give P(outcome 1) = 7/10
    tbl = single_row_table([3.0, 7.0])
    r = rng(2)
    hits = sum(tbl.sample_expected(0, 0, r)[1] for _ in range(100_000))
    assert hits / 100_000 == pytest.approx(0.70, abs=0.01)


def test_sample_expected_deterministic_under_seed():
    tbl = single_row_table([3.0, 7.0])
    draws_a = [tbl.sample_expected(0, 0, rng(9)) for _ in range(1)]
    draws_b = [tbl.sample_expected(0, 0, rng(9)) for _ in range(1)]
    assert draws_a == draws_b


def test_sample_expected_tracks_live_counts():
    # probabilities must be recomputed from the current counts on each call
    tbl = single_row_table([1.0, 0.0])
    r = rng(4)
    assert tbl.sample_expected(0, 0, r) == (0, 0)
    tbl.counts[0, 0] = [0.0, 5.0]
    assert tbl.sample_expected(0, 0, r) == (0, 1)


# -- Dirichlet sampling ------------------------------------------------------


def test_dirichlet_row_on_simplex():
    r = rng(5)
    for _ in range(200):
        row = sample_dirichlet_row(np.array([0.5, 2.0, 7.0]), r)
        assert np.all(row >= 0)
        assert row.sum() == pytest.approx(1.0, abs=1e-9)


def test_dirichlet_mean_matches_normalized_counts():
    r = rng(6)
    draws = np.array(
        [sample_dirichlet_row(np.array([1.0, 1.0]), r)[0] for _ in range(100_000)]
    )
    assert draws.mean() == pytest.approx(0.5, abs=0.01)


def test_dirichlet_concentration():
    r = rng(7)
    big = np.array([1e6, 1.0])
    hits = sum(sample_dirichlet_row(big, r)[0] > 0.999 for _ in range(10_000))
    assert hits >= 9_900


def test_dirichlet_all_zero_rejected():
    with pytest.raises(ValueError):
        sample_dirichlet_row(np.zeros(3), rng(0))


# -- whole-model sampling ----------------------------------------------------


def test_lazy_model_memoizes_rows():
    tbl = single_row_table([2.0, 3.0, 1.0, 4.0])
    model = DirichletModel(tbl, rng(8), lazy=True)
    first = model.joint_row(0, 0).copy()
    second = model.joint_row(0, 0)
    assert np.array_equal(first, second)


def test_lazy_model_materializes_only_accessed_rows():
    # 8 states x 7 actions = 56 rows; touching 3 must materialize exactly 3
    r = rng(9)
    counts = r.random((8, 7, 16)) + 0.1
    tbl = JointCountTable(counts, num_observations=2)
    model = DirichletModel(tbl, rng(10), lazy=True)
    assert model.rows_materialized == 0
    model.sample(0, 0, r)
    model.sample(2, 5, r)
    model.sample(7, 6, r)
    model.sample(0, 0, r)  # already materialized
    assert model.rows_materialized == 3


def test_eager_and_lazy_models_replay_identically():
    counts = rng(11).random((3, 2, 6)) + 0.2
    tbl = JointCountTable(counts, num_observations=2)
    eager = DirichletModel(tbl, rng(12), lazy=False)
    lazy = DirichletModel(tbl, rng(12), lazy=True)
    # same generator stream, rows requested in the canonical (s, a) order
    for s in range(3):
        for a in range(2):
            assert np.array_equal(eager.joint_row(s, a), lazy.joint_row(s, a))


def test_model_is_frozen_against_count_updates():
    tbl = single_row_table([5.0, 5.0])
    model = DirichletModel(tbl, rng(13), lazy=True)
    before = model.joint_row(0, 0).copy()
    tbl.increment(0, 0, 0, 1)
    assert np.array_equal(model.joint_row(0, 0), before)


# -- increments --------------------------------------------------------------


def test_increment_changes_one_entry_and_expected_prob():
    tbl = single_row_table([5.0, 3.0])
    assert tbl.expected_prob(0, 0, 0, 0) == pytest.approx(0.625)
    tbl.increment(0, 0, 0, 0)
    assert tbl.get(0, 0, 0, 0) == 6.0
    assert tbl.get(0, 0, 0, 1) == 3.0
    assert tbl.trans_counts(0, 0).sum() == 9.0
    assert tbl.expected_prob(0, 0, 0, 0) == pytest.approx(6.0 / 9.0)


def test_increments_commute():
    a = joint_table([[[1.0, 1.0, 1.0, 1.0]], [[2.0, 2.0, 2.0, 2.0]]])
    b = joint_table([[[1.0, 1.0, 1.0, 1.0]], [[2.0, 2.0, 2.0, 2.0]]])
    a.increment(0, 0, 0, 1)
    a.increment(1, 0, 1, 0)
    b.increment(1, 0, 1, 0)
    b.increment(0, 0, 0, 1)
    assert np.array_equal(a.counts, b.counts)


def test_increment_leaves_other_rows_alone():
    tbl = joint_table([[[1.0, 1.0, 1.0, 1.0]], [[2.0, 2.0, 2.0, 2.0]]])
    before = tbl.expected_prob(1, 0, 0, 0)
    tbl.increment(0, 0, 1, 1)
    assert tbl.expected_prob(1, 0, 0, 0) == before


def test_row_total_grows_exactly_with_increments():
    tbl = single_row_table([2.0, 5.0, 1.0])
    start = tbl.trans_counts(0, 0).sum()
    r = rng(14)
    for _ in range(37):
        tbl.increment(0, 0, 0, int(r.integers(3)))
    assert tbl.trans_counts(0, 0).sum() == start + 37


def test_counts_never_decrease():
    tbl = single_row_table([2.0, 5.0])
    before = tbl.counts.copy()
    r = rng(15)
    for _ in range(20):
        tbl.sample_expected(0, 0, r)
        tbl.sample_step_model(0, 0, r)
        tbl.increment(0, 0, 0, int(r.integers(2)))
    assert np.all(tbl.counts >= before)


# -- factored layout ---------------------------------------------------------


def factored_table():
    trans = np.array([[[3.0, 1.0], [1.0, 1.0]], [[2.0, 2.0], [1.0, 3.0]]])
    obs = np.array([[[4.0, 1.0], [1.0, 4.0]], [[2.0, 3.0], [3.0, 2.0]]])
    return FactoredCountTable(trans, obs)


def test_factored_expected_prob_is_product_of_factors():
    tbl = factored_table()
    expected = (3.0 / 4.0) * (4.0 / 5.0)
    assert tbl.expected_prob(0, 0, 0, 0) == pytest.approx(expected)


def test_factored_increment_bumps_both_factors():
    tbl = factored_table()
    tbl.increment(0, 1, 1, 0)
    assert tbl.trans[0, 1, 1] == 2.0
    assert tbl.obs[1, 1, 0] == 4.0
    assert tbl.trans[0, 0, 0] == 3.0  # untouched


def test_factored_expected_joint_rows_are_distributions():
    tbl = factored_table()
    for s in range(2):
        for a in range(2):
            joint = tbl.expected_joint(s, a)
            assert joint.min() >= 0
            assert joint.sum() == pytest.approx(1.0, abs=1e-12)
            # marginal over observations reproduces the transition factor
            trow = tbl.trans_counts(s, a)
            np.testing.assert_allclose(joint.sum(axis=1), trow / trow.sum())


def test_factored_sample_distribution_matches_expected_joint():
    tbl = factored_table()
    r = rng(16)
    freq = np.zeros((2, 2))
    n = 100_000
    for _ in range(n):
        s1, z = tbl.sample_expected(0, 0, r)
        freq[s1, z] += 1
    np.testing.assert_allclose(freq / n, tbl.expected_joint(0, 0), atol=0.01)


# -- augmented states --------------------------------------------------------


def test_augmented_copy_is_isolated():
    original = AugmentedState(0, factored_table())
    dup = original.copy()
    dup.state = 1
    dup.counts.increment(0, 0, 0, 0)
    assert original.state == 0
    assert original.counts.trans[0, 0, 0] == 3.0
