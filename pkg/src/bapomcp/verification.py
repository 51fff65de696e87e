"""End-to-end verification checks with measured distances.

Each check compares a sampling code path against an analytic reference on
the small fully enumerable chain instance (plus one Tiger Bayes update):

* the empirical history distribution of root-sampled simulation against
  the closed-form Dirichlet-normalizer-ratio probabilities;
* the empirical history distribution of expected-transition simulation
  against the sequential product;
* the algebraic identity between the two analytic formulas, exhaustively
  and on random count tables;
* normalization of the analytic distributions;
* the particle-filter rejection update against the exact Bayes posterior,
  including the rejection acceptance rate against the observation
  likelihood.

The thresholds follow a binomial standard-error budget at the default
simulation counts; callers can tighten or loosen by scaling the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bapomcp.belief import ParticleFilter, rejection_update
from bapomcp.core import AugmentedState, FactoredCountTable, JointCountTable
from bapomcp.domains import TigerDomain, default_chain
from bapomcp.oracle import (
    FullHistory,
    all_histories,
    belief_state_marginal,
    closed_form_history_prob,
    empirical_rollout_distribution,
    exact_belief_update,
    sequential_history_prob,
    total_variation,
    uniform_policy,
)
from bapomcp.planner import step_expected


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _chain_setup(seed: int):
    domain = default_chain()
    chi0 = domain.prior_counts(np.random.default_rng(seed))
    return chi0, FullHistory(0, ()), uniform_policy(2)


def history_distribution_tv(
    variant: str, seed: int, num_sims: int, depth: int
) -> float:
    """TV distance between an empirical rollout distribution and its
    analytic reference on the chain instance."""
    chi0, root, policy = _chain_setup(seed)
    hists = all_histories(2, 2, 2, 0, depth)
    if variant == "root":
        exact = {h: closed_form_history_prob(root, chi0, h, policy) for h in hists}
    else:
        exact = {h: sequential_history_prob(root, chi0, h, policy) for h in hists}
    empirical = empirical_rollout_distribution(
        variant, policy, chi0, 0, depth, num_sims, np.random.default_rng(seed + 1)
    )
    return total_variation(empirical, exact)


def formula_identity_error(seed: int, max_depth: int = 4, num_tables: int = 1000) -> float:
    """Worst relative disagreement between the closed-form and sequential
    history probabilities, over exhaustive enumeration and random tables."""
    chi0, root, policy = _chain_setup(seed)
    worst = 0.0
    for depth in range(max_depth + 1):
        for h in all_histories(2, 2, 2, 0, depth):
            closed = closed_form_history_prob(root, chi0, h, policy)
            seq = sequential_history_prob(root, chi0, h, policy)
            if seq > 0:
                worst = max(worst, abs(closed - seq) / seq)
    r = np.random.default_rng(seed + 2)
    hists3 = all_histories(2, 2, 2, 0, 3)
    for _ in range(num_tables):
        table = JointCountTable(r.random((2, 2, 4)) * 20 + 0.3, num_observations=2)
        for _ in range(4):
            h = hists3[int(r.integers(len(hists3)))]
            closed = closed_form_history_prob(root, table, h, policy)
            seq = sequential_history_prob(root, table, h, policy)
            if seq > 0:
                worst = max(worst, abs(closed - seq) / seq)
    return worst


def normalization_error(seed: int, max_depth: int = 4) -> float:
    chi0, root, policy = _chain_setup(seed)
    worst = 0.0
    for depth in range(1, max_depth + 1):
        hists = all_histories(2, 2, 2, 0, depth)
        closed = sum(closed_form_history_prob(root, chi0, h, policy) for h in hists)
        seq = sum(sequential_history_prob(root, chi0, h, policy) for h in hists)
        worst = max(worst, abs(closed - 1.0), abs(seq - 1.0))
    return worst


def chain_belief_update_tv(seed: int, filter_size: int) -> float:
    """Particle rejection update vs the exact Bayes posterior (chain)."""
    domain = default_chain()
    prior = domain.prior_counts(np.random.default_rng(seed))
    action, obs = 0, 1
    exact = exact_belief_update([(0, prior, 1.0)], action, obs)
    exact_marginal = belief_state_marginal(exact, 2)
    belief = ParticleFilter(
        [AugmentedState(0, prior) for _ in range(filter_size)]
    )
    updated = rejection_update(
        belief, action, obs, step_expected, np.random.default_rng(seed + 3)
    )
    return float(np.abs(updated.state_frequencies(2) - exact_marginal).sum() / 2.0)


def accurate_tiger_counts() -> FactoredCountTable:
    hc = 1e6
    trans = np.zeros((2, 3, 2))
    obs = np.zeros((3, 2, 2))
    for s in range(2):
        trans[s, 0, s] = hc
        trans[s, 1] = trans[s, 2] = hc / 2
        obs[0, s, s] = 0.85 * hc
        obs[0, s, 1 - s] = 0.15 * hc
        obs[1, s] = obs[2, s] = hc / 2
    return FactoredCountTable(trans, obs)


def tiger_listen_update(seed: int, filter_size: int) -> tuple[float, float]:
    """(TV against the 0.85/0.15 posterior, measured acceptance rate)."""
    counts = accurate_tiger_counts()
    particles = [
        AugmentedState(i % 2, counts) for i in range(filter_size)
    ]
    belief = ParticleFilter(particles)
    calls = 0

    def counting_stepper(p, a, r):
        nonlocal calls
        calls += 1
        return step_expected(p, a, r)

    updated = rejection_update(
        belief, TigerDomain.LISTEN, 0, counting_stepper, np.random.default_rng(seed + 4)
    )
    posterior = updated.state_frequencies(2)
    tv = float(np.abs(posterior - np.array([0.85, 0.15])).sum() / 2.0)
    return tv, filter_size / calls


def run_verification(
    seed: int = 0,
    num_sims: int = 100_000,
    depth: int = 3,
    filter_size: int = 100_000,
    tv_tolerance: float | None = None,
) -> list[CheckResult]:
    if tv_tolerance is None:
        # binomial standard error scales with 1/sqrt(samples); 0.02 is the
        # budget at the default 1e5
        tv_tolerance = 0.02 * float(np.sqrt(100_000 / min(num_sims, filter_size)))
    results = []

    tv_root = history_distribution_tv("root", seed, num_sims, depth)
    results.append(
        CheckResult(
            "root-sampled rollout distribution vs closed form",
            tv_root <= tv_tolerance,
            f"TV {tv_root:.4f} (tolerance {tv_tolerance}) at {num_sims} sims, depth {depth}",
        )
    )

    tv_exp = history_distribution_tv("expected", seed, num_sims, depth)
    results.append(
        CheckResult(
            "expected-transition rollout distribution vs sequential product",
            tv_exp <= tv_tolerance,
            f"TV {tv_exp:.4f} (tolerance {tv_tolerance}) at {num_sims} sims, depth {depth}",
        )
    )

    identity_err = formula_identity_error(seed)
    results.append(
        CheckResult(
            "closed form equals sequential product",
            identity_err <= 1e-12,
            f"max relative error {identity_err:.2e} (tolerance 1e-12)",
        )
    )

    norm_err = normalization_error(seed)
    results.append(
        CheckResult(
            "history distributions normalize",
            norm_err <= 1e-9,
            f"max |sum - 1| = {norm_err:.2e} (tolerance 1e-9)",
        )
    )

    tv_belief = chain_belief_update_tv(seed, filter_size)
    results.append(
        CheckResult(
            "particle rejection update vs exact Bayes posterior (chain)",
            tv_belief <= tv_tolerance,
            f"TV {tv_belief:.4f} (tolerance {tv_tolerance}) at {filter_size} particles",
        )
    )

    tv_tiger, rate = tiger_listen_update(seed, filter_size)
    results.append(
        CheckResult(
            "tiger listen update posterior and acceptance rate",
            tv_tiger <= tv_tolerance and abs(rate - 0.5) <= 0.02,
            f"posterior TV {tv_tiger:.4f}, acceptance rate {rate:.4f} (expected 0.5)",
        )
    )

    return results
