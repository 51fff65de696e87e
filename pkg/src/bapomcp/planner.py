"""Online tree-search planning for Bayes-adaptive POMDPs.

Each call to :func:`plan` builds a fresh lookahead tree from the current
belief by running simulations: sample a particle, copy it, walk the tree
with upper-confidence-bound action selection, step the copy through one of
the pluggable step variants, and finish with a uniform-random rollout. The
step variants trade exactness of the count bookkeeping for speed:

* plain: per step, draw one model row from the count posterior, sample an
  outcome from it, and increment the sampled entry;
* expected: sample outcomes directly from the normalized counts (the
  posterior-mean model), recomputed on the fly, and increment;
* root-sampled: draw one whole model per simulation at the root and follow
  it without any count reads or writes, which also makes the per-simulation
  copy of the counts unnecessary.

The flags compose freely with the linking-state particle representation;
a root-sampled simulation combined with the expected flag follows the
frozen posterior-mean model of the root counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bapomcp.belief import LinkingCounts, ParticleFilter
from bapomcp.core import AugmentedState, Counts, Domain, ExpectedModel
from bapomcp.instrument import copy_meter


@dataclass
class PlannerConfig:
    """Search parameters; the three variant flags combine independently."""

    num_sims: int
    max_depth: int
    gamma: float
    ucb_c: float
    root_sample_model: bool = False
    expected_model: bool = False
    linking_states: bool = False
    lazy_model: bool = True

    def __post_init__(self):
        if self.num_sims < 1:
            raise ValueError("need at least one simulation")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if self.ucb_c < 0.0:
            raise ValueError("exploration constant must be nonnegative")


class SearchNode:
    """Per-history statistics: visit counts and running-mean action values.

    ``visits`` always equals the sum of per-action counts; value estimates
    start at zero and unvisited actions are preferred unconditionally by the
    selection rule, which resolves the undefined confidence bound at zero
    visits.
    """

    __slots__ = ("visits", "n_action", "q", "children")

    def __init__(self, num_actions: int):
        self.visits = 0
        self.n_action = np.zeros(num_actions, dtype=np.int64)
        self.q = np.zeros(num_actions)
        self.children: dict[tuple[int, int], SearchNode] = {}


def ucb_select(node: SearchNode, c: float, rng: np.random.Generator) -> int:
    """Index of the action maximizing ``Q + c * sqrt(log(N(h)+1) / N(h,a))``.

    Unvisited actions have an infinite bonus and win before any visited
    action; all ties break uniformly at random.
    """
    unvisited = np.flatnonzero(node.n_action == 0)
    if unvisited.size:
        return int(unvisited[int(rng.integers(unvisited.size))])
    scores = node.q + c * np.sqrt(np.log(node.visits + 1.0) / node.n_action)
    best = np.flatnonzero(scores == scores.max())
    return int(best[int(rng.integers(best.size))])


def greedy_action(node: SearchNode, rng: np.random.Generator) -> int:
    """Highest-value action among the visited ones, ties uniform at random."""
    visited = np.flatnonzero(node.n_action > 0)
    if visited.size == 0:
        raise ValueError("no action has been tried at this node")
    qs = node.q[visited]
    best = visited[np.flatnonzero(qs == qs.max())]
    return int(best[int(rng.integers(best.size))])


# -- step variants ---------------------------------------------------------


def step_plain(particle: AugmentedState, action: int, rng: np.random.Generator) -> int:
    """Draw a model row from the counts, sample an outcome, record it.

    Updates the particle in place: its state moves to the sampled next state
    and exactly one count entry grows by one.
    """
    s = particle.state
    s1, z = particle.counts.sample_step_model(s, action, rng)
    particle.counts.increment(s, action, s1, z)
    particle.state = s1
    return z


def step_expected(particle: AugmentedState, action: int, rng: np.random.Generator) -> int:
    """Sample an outcome from the normalized counts, record it.

    Cheaper than :func:`step_plain` because no model row is drawn; the
    outcome probabilities are recomputed from the live counts at every call.
    """
    s = particle.state
    s1, z = particle.counts.sample_expected(s, action, rng)
    particle.counts.increment(s, action, s1, z)
    particle.state = s1
    return z


def step_root_sampled(
    particle: AugmentedState, action: int, model, rng: np.random.Generator
) -> int:
    """Sample an outcome from the per-simulation model; no count updates."""
    s1, z = model.sample(particle.state, action, rng)
    particle.state = s1
    return z


def step_linking(
    particle: AugmentedState,
    action: int,
    rng: np.random.Generator,
    expected: bool = False,
) -> int:
    """Step a linking-state particle.

    Behaves exactly like the configured non-linking step, except that count
    reads compose the shared base with the private delta and the increment
    lands in the delta. That behaviour comes from the particle's
    :class:`~bapomcp.belief.LinkingCounts` view, so this is the plain or
    expected step applied to a linking particle.
    """
    if not isinstance(particle.counts, LinkingCounts):
        raise TypeError("step_linking expects a particle with linking counts")
    if expected:
        return step_expected(particle, action, rng)
    return step_plain(particle, action, rng)


def make_stepper(cfg: PlannerConfig, model=None):
    """Bind the configured step variant into ``(particle, action, rng) -> z``."""
    if cfg.root_sample_model:
        if model is None:
            raise ValueError("root-sampled stepping needs a per-simulation model")
        return lambda p, a, rng, _m=model: step_root_sampled(p, a, _m, rng)
    if cfg.expected_model:
        return step_expected
    return step_plain


def belief_update_stepper(cfg: PlannerConfig):
    """Step variant used for real belief updates.

    Root sampling is a within-simulation shortcut only: real updates must
    keep incrementing counts or the model belief would never learn, so the
    root-sample flag is ignored here.
    """
    return step_expected if cfg.expected_model else step_plain


# -- simulation ------------------------------------------------------------


def rollout(
    particle: AugmentedState,
    depth: int,
    domain: Domain,
    stepper,
    cfg: PlannerConfig,
    rng: np.random.Generator,
) -> float:
    """Uniform-random continuation from ``depth`` to the horizon."""
    ret = 0.0
    discount = 1.0
    d = depth
    while d < cfg.max_depth and not domain.is_terminal(particle.state):
        a = int(rng.integers(domain.num_actions))
        ret += discount * domain.reward(particle.state, a)
        stepper(particle, a, rng)
        discount *= cfg.gamma
        d += 1
    return ret


def simulate(
    particle: AugmentedState,
    depth: int,
    node: SearchNode,
    domain: Domain,
    stepper,
    cfg: PlannerConfig,
    rng: np.random.Generator,
) -> float:
    """One tree-search simulation step; returns the discounted return.

    Descends into the child for the sampled ``(action, observation)`` edge
    when it exists, otherwise constructs it and switches to a rollout. The
    node statistics are updated with an incremental mean on the way back up.
    """
    if depth >= cfg.max_depth or domain.is_terminal(particle.state):
        return 0.0
    a = ucb_select(node, cfg.ucb_c, rng)
    immediate = domain.reward(particle.state, a)
    z = stepper(particle, a, rng)
    child = node.children.get((a, z))
    if child is not None:
        future = simulate(particle, depth + 1, child, domain, stepper, cfg, rng)
    else:
        node.children[(a, z)] = SearchNode(domain.num_actions)
        future = rollout(particle, depth + 1, domain, stepper, cfg, rng)
    ret = immediate + cfg.gamma * future
    node.n_action[a] += 1
    node.visits += 1
    node.q[a] += (ret - node.q[a]) / node.n_action[a]
    return ret


def plan(
    belief: ParticleFilter,
    domain: Domain,
    cfg: PlannerConfig,
    rng: np.random.Generator,
) -> int:
    """Pick an action by building a fresh search tree from the belief.

    Every simulation root-samples a particle and works on a copy, so the
    input belief is left untouched. With the root-sample-model flag the
    count copy is skipped entirely (the counts are only read once, to draw
    the per-simulation model) and only the state index is duplicated.
    """
    root = SearchNode(domain.num_actions)
    for _ in range(cfg.num_sims):
        src = belief.sample(rng)
        if cfg.root_sample_model:
            if cfg.expected_model:
                model = ExpectedModel(src.counts)
            else:
                model = src.counts.sample_model(rng, lazy=cfg.lazy_model)
            sim_particle = AugmentedState(src.state, src.counts)
            copy_meter.add(1)
            stepper = make_stepper(cfg, model)
        else:
            sim_particle = src.copy()
            stepper = make_stepper(cfg)
        simulate(sim_particle, 0, root, domain, stepper, cfg, rng)
    return greedy_action(root, rng)


# -- lookahead baseline ----------------------------------------------------


def lookahead_values(
    belief: ParticleFilter,
    depth: int,
    domain: Domain,
    gamma: float,
) -> np.ndarray:
    """Belief-averaged depth-``d`` expectimax value of each action.

    For every particle, actions are enumerated, outcomes are expanded
    exactly with their posterior-mean likelihoods, and the recursion
    continues on the updated augmented state; values at depth zero are zero.
    """
    if depth < 1:
        raise ValueError("lookahead depth must be at least 1")
    totals = np.zeros(domain.num_actions)
    for p in belief.particles:
        totals += _lookahead_q(p.state, p.counts, depth, domain, gamma)
    return totals / len(belief)


def _lookahead_q(
    s: int, counts: Counts, depth: int, domain: Domain, gamma: float
) -> np.ndarray:
    q = np.zeros(domain.num_actions)
    for a in range(domain.num_actions):
        value = domain.reward(s, a)
        if depth > 1 and not domain.is_terminal(s):
            joint = counts.expected_joint(s, a)
            future = 0.0
            for s1 in range(domain.num_states):
                for z in range(domain.num_observations):
                    pr = joint[s1, z]
                    if pr <= 0.0:
                        continue
                    branch = counts.copy()
                    branch.increment(s, a, s1, z)
                    future += pr * _lookahead_q(s1, branch, depth - 1, domain, gamma).max()
            value += gamma * future
        q[a] = value
    return q


def lookahead_plan(
    belief: ParticleFilter,
    depth: int,
    domain: Domain,
    gamma: float,
    rng: np.random.Generator,
) -> int:
    """Baseline planner: argmax of :func:`lookahead_values`, ties uniform."""
    values = lookahead_values(belief, depth, domain, gamma)
    best = np.flatnonzero(values == values.max())
    return int(best[int(rng.integers(best.size))])
