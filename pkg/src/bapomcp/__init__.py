"""Monte-Carlo tree search for Bayes-adaptive POMDPs.

Online planning when the environment dynamics are uncertain: the belief is
a particle filter over states paired with Dirichlet count tables, and the
planner is POMCP adapted to that augmented state space, with three
composable efficiency variants (root-sampled models, expected-model
stepping, and copy-on-write linking states).
"""

from bapomcp.belief import (
    BeliefDeprivationError,
    LinkingCounts,
    ParticleFilter,
    effective_count,
    make_linking,
    make_prior_belief,
    merge_if_needed,
    rejection_update,
)
from bapomcp.core import (
    AugmentedState,
    Counts,
    DirichletModel,
    Domain,
    ExpectedModel,
    FactoredCountTable,
    JointCountTable,
    sample_dirichlet_row,
)
from bapomcp.domains import ChainDomain, SysadminDomain, TigerDomain, make_domain
from bapomcp.planner import (
    PlannerConfig,
    SearchNode,
    greedy_action,
    lookahead_plan,
    lookahead_values,
    plan,
    rollout,
    simulate,
    step_expected,
    step_linking,
    step_plain,
    step_root_sampled,
    ucb_select,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedState",
    "BeliefDeprivationError",
    "ChainDomain",
    "Counts",
    "DirichletModel",
    "Domain",
    "ExpectedModel",
    "FactoredCountTable",
    "JointCountTable",
    "LinkingCounts",
    "ParticleFilter",
    "PlannerConfig",
    "SearchNode",
    "SysadminDomain",
    "TigerDomain",
    "effective_count",
    "greedy_action",
    "lookahead_plan",
    "lookahead_values",
    "make_domain",
    "make_linking",
    "make_prior_belief",
    "merge_if_needed",
    "plan",
    "rejection_update",
    "rollout",
    "sample_dirichlet_row",
    "simulate",
    "step_expected",
    "step_linking",
    "step_plain",
    "step_root_sampled",
    "ucb_select",
]
