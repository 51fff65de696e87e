"""Exact small-instance references used to verify the sampling machinery.

The centerpiece is the distribution over *full histories* (state, action
and observation sequences) generated by simulating from a count posterior
under a fixed policy. Two analytic forms are implemented:

* the sequential product, which walks the history multiplying the
  normalized-count outcome probabilities while incrementing counts; and
* the closed form, which collapses that product into ratios of Dirichlet
  normalization constants ``B(alpha) = Gamma(sum alpha) / prod Gamma(alpha_i)``
  per touched count row.

The two are algebraically identical (the running-count product telescopes
through ``Gamma(x + 1) = x * Gamma(x)``), and both equal the limit of the
empirical history distribution produced by root-sampled simulation, which
is what makes root sampling a sound substitute for per-step updating. The
functions here make those statements checkable: exact enumeration on a
two-state domain, plus empirical rollout tabulation through the planner's
real step implementations.

Also included: an exact Bayes belief update over enumerated augmented
states, and a brute-force expectimax used to validate the lookahead
baseline. History formulas operate on the joint count layout (the layout
the tiny verification domain uses).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import exp, lgamma
from typing import Callable

import numpy as np

from bapomcp.belief import ParticleFilter
from bapomcp.core import AugmentedState, Counts, DirichletModel, Domain, categorical
from bapomcp.planner import step_expected, step_plain, step_root_sampled

Policy = Callable[[tuple], np.ndarray]
"""Maps an action-observation history to a probability vector over actions."""


def uniform_policy(num_actions: int) -> Policy:
    probs = np.full(num_actions, 1.0 / num_actions)
    return lambda aoh: probs


@dataclass(frozen=True)
class FullHistory:
    """A simulated path: initial state plus ``(a, s', z)`` triples.

    The initial counts are carried separately (one root per verification
    run), so histories stay hashable and cheap to tabulate.
    """

    s0: int
    steps: tuple[tuple[int, int, int], ...]

    @property
    def depth(self) -> int:
        return len(self.steps)

    def extends(self, root: "FullHistory") -> bool:
        """Consistency indicator: does this history continue ``root``?"""
        return self.s0 == root.s0 and self.steps[: len(root.steps)] == root.steps


def all_histories(
    num_actions: int, num_states: int, num_observations: int, s0: int, depth: int
) -> list[FullHistory]:
    """Every conceivable depth-``depth`` history from ``s0`` (zero-probability
    ones included; the probability formulas assign them 0)."""
    triples = list(
        itertools.product(range(num_actions), range(num_states), range(num_observations))
    )
    return [
        FullHistory(s0, steps) for steps in itertools.product(triples, repeat=depth)
    ]


def counts_after(chi0: Counts, hist: FullHistory) -> Counts:
    """The counts induced by a history: the root counts plus its tally."""
    counts = chi0.copy()
    s = hist.s0
    for a, s1, z in hist.steps:
        counts.increment(s, a, s1, z)
        s = s1
    return counts


def log_dirichlet_norm(row: np.ndarray) -> float:
    """``log B(alpha) = log Gamma(sum alpha) - sum log Gamma(alpha_i)``.

    Evaluated in log space so count magnitudes up to 1e6 stay finite;
    requires strictly positive parameters.
    """
    row = np.asarray(row, dtype=np.float64)
    if np.any(row <= 0.0):
        raise ValueError("Dirichlet normalizer needs strictly positive parameters")
    return lgamma(float(row.sum())) - float(sum(lgamma(float(c)) for c in row))


def _policy_product(hist: FullHistory, policy: Policy) -> float:
    prob = 1.0
    aoh: tuple = ()
    for a, _, z in hist.steps:
        prob *= float(policy(aoh)[a])
        aoh += ((a, z),)
    return prob


def closed_form_history_prob(
    root: FullHistory, chi0: Counts, hist: FullHistory, policy: Policy
) -> float:
    """History probability via Dirichlet-normalizer ratios.

    ``Cons(root, hist) * prod_t pi(a_t | h_t) * prod_rows B(row_0) / B(row_d)``
    where only count rows touched by the history contribute (untouched rows
    cancel exactly, and within a touched row the untouched entries cancel,
    so zero counts on never-used outcomes are harmless). A history that
    consumes an outcome whose root count is zero has probability zero.
    """
    if chi0.factored:
        raise ValueError("history formulas are defined on the joint count layout")
    if not hist.extends(root):
        return 0.0
    policy_prob = _policy_product(hist, policy)
    if policy_prob == 0.0:
        return 0.0
    Z = chi0.num_observations
    touched: dict[tuple[int, int], dict[int, float]] = {}
    s = hist.s0
    for a, s1, z in hist.steps:
        outcome = s1 * Z + z
        row = touched.setdefault((s, a), {})
        row[outcome] = row.get(outcome, 0.0) + 1.0
        s = s1
    log_ratio = 0.0
    for (s, a), added in touched.items():
        row0 = chi0.trans_counts(s, a)
        total0 = float(row0.sum())
        pulls = sum(added.values())
        log_ratio += lgamma(total0) - lgamma(total0 + pulls)
        for outcome, extra in added.items():
            c0 = float(row0[outcome])
            if c0 == 0.0:
                return 0.0
            log_ratio += lgamma(c0 + extra) - lgamma(c0)
    return policy_prob * exp(log_ratio)


def sequential_history_prob(
    root: FullHistory, chi0: Counts, hist: FullHistory, policy: Policy
) -> float:
    """History probability as the step-by-step expected-transition product.

    Multiplies ``pi(a_t | h_t)`` by the normalized-count probability of each
    outcome, incrementing the counts after every step.
    """
    if chi0.factored:
        raise ValueError("history formulas are defined on the joint count layout")
    if not hist.extends(root):
        return 0.0
    counts = chi0.copy()
    prob = 1.0
    s = hist.s0
    aoh: tuple = ()
    for a, s1, z in hist.steps:
        prob *= float(policy(aoh)[a]) * counts.expected_prob(s, a, s1, z)
        if prob == 0.0:
            return 0.0
        counts.increment(s, a, s1, z)
        s = s1
        aoh += ((a, z),)
    return prob


def empirical_rollout_distribution(
    variant: str,
    policy: Policy,
    chi0: Counts,
    s0: int,
    depth: int,
    num_sims: int,
    rng: np.random.Generator,
) -> dict[FullHistory, float]:
    """Tabulated frequencies of full histories over ``num_sims`` simulations.

    Simulations run through the planner's actual step implementations:

    * ``"root"``: one model drawn from the count posterior per simulation,
      followed without count updates;
    * ``"expected"``: outcomes from the live normalized counts, incremented
      per step;
    * ``"plain"``: a fresh model row drawn per step, incremented after.
    """
    if variant not in ("root", "expected", "plain"):
        raise ValueError(f"unknown rollout variant {variant!r}")
    tally: dict[FullHistory, int] = {}
    for _ in range(num_sims):
        if variant == "root":
            particle = AugmentedState(s0, chi0)  # counts are never written
            model = DirichletModel(chi0, rng, lazy=True)
        else:
            particle = AugmentedState(s0, chi0.copy())
            model = None
        steps = []
        aoh: tuple = ()
        for _d in range(depth):
            a = categorical(policy(aoh), rng)
            if variant == "root":
                z = step_root_sampled(particle, a, model, rng)
            elif variant == "expected":
                z = step_expected(particle, a, rng)
            else:
                z = step_plain(particle, a, rng)
            steps.append((a, particle.state, z))
            aoh += ((a, z),)
        hist = FullHistory(s0, tuple(steps))
        tally[hist] = tally.get(hist, 0) + 1
    return {h: c / num_sims for h, c in tally.items()}


def total_variation(
    p: dict[FullHistory, float], q: dict[FullHistory, float]
) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


# -- exact belief updates ----------------------------------------------------

EnumeratedBelief = list[tuple[int, Counts, float]]
"""Explicit belief over augmented states: ``(state, counts, probability)``."""


def exact_belief_update(
    belief: EnumeratedBelief, action: int, obs: int
) -> EnumeratedBelief:
    """Exact Bayes posterior over augmented states after ``(action, obs)``.

    Follows the count-transition semantics: each support point branches over
    next states consistent with the observation, and the successor counts
    are the predecessor's with the experienced entry incremented.
    """
    weights: dict[tuple[int, bytes], float] = {}
    successors: dict[tuple[int, bytes], tuple[int, Counts]] = {}
    for s, counts, prob in belief:
        if prob <= 0.0:
            continue
        joint = counts.expected_joint(s, action)
        for s1 in range(counts.num_states):
            pr = float(joint[s1, obs])
            if pr <= 0.0:
                continue
            nxt = counts.copy()
            nxt.increment(s, action, s1, obs)
            key = (s1, nxt.key())
            weights[key] = weights.get(key, 0.0) + prob * pr
            successors.setdefault(key, (s1, nxt))
    total = sum(weights.values())
    if total <= 0.0:
        raise ValueError("observation has zero probability under this belief")
    return [
        (successors[key][0], successors[key][1], w / total)
        for key, w in weights.items()
    ]


def belief_state_marginal(belief: EnumeratedBelief, num_states: int) -> np.ndarray:
    marginal = np.zeros(num_states)
    for s, _counts, prob in belief:
        marginal[s] += prob
    return marginal


# -- brute-force expectimax --------------------------------------------------


def brute_force_expectimax(
    belief: ParticleFilter, depth: int, domain: Domain, gamma: float
) -> np.ndarray:
    """Exact per-action expected discounted return under expected dynamics.

    Independent reference for the lookahead planner: plain recursion over
    augmented states with explicitly copied count tables, no shortcuts.
    Only viable on small instances and shallow depths.
    """
    if depth < 1:
        raise ValueError("expectimax depth must be at least 1")
    totals = np.zeros(domain.num_actions)
    for p in belief.particles:
        for a in range(domain.num_actions):
            totals[a] += _bf_action_value(p.state, p.counts, a, depth, domain, gamma)
    return totals / len(belief)


def _bf_action_value(
    s: int, counts: Counts, action: int, depth: int, domain: Domain, gamma: float
) -> float:
    value = domain.reward(s, action)
    if depth <= 1 or domain.is_terminal(s):
        return value
    joint = counts.expected_joint(s, action)
    expected_future = 0.0
    for s1 in range(domain.num_states):
        for z in range(domain.num_observations):
            pr = float(joint[s1, z])
            if pr <= 0.0:
                continue
            nxt = counts.copy()
            nxt.increment(s, action, s1, z)
            best = max(
                _bf_action_value(s1, nxt, a2, depth - 1, domain, gamma)
                for a2 in range(domain.num_actions)
            )
            expected_future += pr * best
    return value + gamma * expected_future
