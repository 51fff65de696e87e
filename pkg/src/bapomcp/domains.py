"""Benchmark domains: Tiger, the partially observable sysadmin problem, and
a tiny fully parameterizable two-state domain used by the verification
oracles.

All domains run to the episode horizon; none has absorbing states. "Known"
parts of the dynamics (Tiger's transition model, the sysadmin observation
model) are encoded in the priors as count rows carrying a large confidence
mass, so a single code path handles both learned and known distributions.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from bapomcp.core import (
    Counts,
    Domain,
    FactoredCountTable,
    JointCountTable,
    categorical,
)

HIGH_CONFIDENCE = 1e6


class TigerDomain(Domain):
    """The classic two-door listening problem.

    States: 0 = tiger behind the left door, 1 = behind the right door.
    Actions: 0 = listen, 1 = open left, 2 = open right.
    Observations: 0 = hear left, 1 = hear right.

    Listening costs 1 and reports the tiger's side correctly with
    probability 0.85 while leaving the state unchanged; opening the safe
    door pays +10, opening the tiger's door costs 100, and either opening
    resets the tiger uniformly at random with an uninformative observation.

    The default prior knows the transition model with high confidence but
    underestimates the listening reliability: 5 counts on the correct
    observation versus 3 on the incorrect one, i.e. expected accuracy 62.5%.
    """

    LISTEN, OPEN_LEFT, OPEN_RIGHT = 0, 1, 2
    LISTEN_ACCURACY = 0.85

    num_states = 2
    num_actions = 3
    num_observations = 2

    def reward(self, s: int, a: int) -> float:
        if a == self.LISTEN:
            return -1.0
        opened_left = a == self.OPEN_LEFT
        tiger_left = s == 0
        return -100.0 if opened_left == tiger_left else 10.0

    @property
    def reward_bounds(self) -> tuple[float, float]:
        return (-100.0, 10.0)

    def true_joint(self, s: int, a: int) -> np.ndarray:
        joint = np.zeros((2, 2))
        if a == self.LISTEN:
            acc = self.LISTEN_ACCURACY
            joint[s, s] = acc
            joint[s, 1 - s] = 1.0 - acc
        else:
            joint[:, :] = 0.25
        return joint

    @property
    def initial_state_probs(self) -> np.ndarray:
        return np.array([0.5, 0.5])

    def prior_counts(self, rng: np.random.Generator) -> FactoredCountTable:
        hc = HIGH_CONFIDENCE
        trans = np.zeros((2, 3, 2))
        for s in range(2):
            trans[s, self.LISTEN, s] = hc
            trans[s, self.OPEN_LEFT] = hc / 2
            trans[s, self.OPEN_RIGHT] = hc / 2
        obs = np.zeros((3, 2, 2))
        for s1 in range(2):
            obs[self.LISTEN, s1, s1] = 5.0
            obs[self.LISTEN, s1, 1 - s1] = 3.0
            obs[self.OPEN_LEFT, s1] = hc / 2
            obs[self.OPEN_RIGHT, s1] = hc / 2
        return FactoredCountTable(trans, obs)


class SysadminDomain(Domain):
    """Keep a network of ``n`` computers running.

    The state is a bitmask with bit ``i`` set when computer ``i`` is
    failing, so counting failures is a population count. Per step, every
    working computer fails independently with probability ``f``; failing
    computers stay failing unless rebooted, and a rebooted computer always
    ends the step working. Pinging computer ``i`` observes its
    post-transition status deterministically; every other action observes
    nothing.

    Actions: ``0..n-1`` ping that computer, ``n..2n-1`` reboot, ``2n`` do
    nothing. Observations: 0 = null, 1 = failing, 2 = working. Costs: 1 per
    ping, 20 per reboot, 10 per failing computer per step.
    """

    OBS_NULL, OBS_FAILING, OBS_WORKING = 0, 1, 2

    def __init__(self, n: int, f: float = 0.1):
        if n < 1:
            raise ValueError("need at least one computer")
        if not 0.0 <= f <= 1.0:
            raise ValueError("failure probability must lie in [0, 1]")
        self.n = n
        self.f = f
        self.num_states = 2**n
        self.num_actions = 2 * n + 1
        self.num_observations = 3

    def ping_action(self, i: int) -> int:
        return i

    def reboot_action(self, i: int) -> int:
        return self.n + i

    @property
    def noop_action(self) -> int:
        return 2 * self.n

    def num_failing(self, s: int) -> int:
        return bin(s).count("1")

    def reward(self, s: int, a: int) -> float:
        cost = 10.0 * self.num_failing(s)
        if a < self.n:
            cost += 1.0
        elif a < 2 * self.n:
            cost += 20.0
        return -cost

    @property
    def reward_bounds(self) -> tuple[float, float]:
        return (-(10.0 * self.n + 20.0), 0.0)

    def _rebooted(self, a: int) -> int:
        return a - self.n if self.n <= a < 2 * self.n else -1

    def true_trans_row(self, s: int, a: int) -> np.ndarray:
        """Distribution over next states, as a length ``2**n`` vector."""
        rebooted = self._rebooted(a)
        per_bit = []
        for i in reversed(range(self.n)):  # high bit first for the kron order
            if i == rebooted:
                dist = (1.0, 0.0)
            elif s >> i & 1:
                dist = (0.0, 1.0)
            else:
                dist = (1.0 - self.f, self.f)
            per_bit.append(np.array(dist))
        return reduce(np.kron, per_bit)

    def observation_of(self, a: int, s1: int) -> int:
        if a < self.n:
            return self.OBS_FAILING if s1 >> a & 1 else self.OBS_WORKING
        return self.OBS_NULL

    def true_joint(self, s: int, a: int) -> np.ndarray:
        joint = np.zeros((self.num_states, 3))
        trow = self.true_trans_row(s, a)
        for s1 in np.flatnonzero(trow):
            joint[s1, self.observation_of(a, int(s1))] = trow[s1]
        return joint

    def sample_true(self, s: int, a: int, rng: np.random.Generator) -> tuple[int, int]:
        # Per-bit sampling; building the full row would be wasteful for big n.
        rebooted = self._rebooted(a)
        s1 = 0
        fail_draws = rng.random(self.n)
        for i in range(self.n):
            if i == rebooted:
                continue
            if s >> i & 1 or fail_draws[i] < self.f:
                s1 |= 1 << i
        return s1, self.observation_of(a, s1)

    @property
    def initial_state_probs(self) -> np.ndarray:
        probs = np.zeros(self.num_states)
        probs[0] = 1.0  # the network starts fully working
        return probs

    def sample_initial_state(self, rng: np.random.Generator) -> int:
        return 0

    def prior_counts(self, rng: np.random.Generator) -> FactoredCountTable:
        """Noisy transition prior, known observation model.

        Every true transition probability is perturbed by +/-0.15 (sign
        drawn uniformly per entry), entries that end up nonpositive are set
        to 0.001, and each row is then normalized to a total count of 20.
        The observation rows put the whole confidence mass on the
        deterministic outcome.
        """
        S, A = self.num_states, self.num_actions
        trans = np.empty((S, A, S))
        for s in range(S):
            for a in range(A):
                row = self.true_trans_row(s, a)
                noisy = row + rng.choice((-0.15, 0.15), size=S)
                noisy[noisy <= 0.0] = 0.001
                trans[s, a] = noisy * (20.0 / noisy.sum())
        obs = np.zeros((A, S, 3))
        for a in range(A):
            for s1 in range(S):
                obs[a, s1, self.observation_of(a, s1)] = HIGH_CONFIDENCE
        return FactoredCountTable(trans, obs)


class ChainDomain(Domain):
    """Two states, two actions, two observations, any dynamics you like.

    The smallest fully enumerable instance; exists so the verification
    oracles can exhaustively check history distributions and exact belief
    updates against the sampling code paths. Uses the joint count layout.
    """

    num_states = 2
    num_actions = 2
    num_observations = 2

    def __init__(
        self,
        true_rows: np.ndarray,
        prior_rows: np.ndarray,
        rewards: np.ndarray | None = None,
        initial_probs: np.ndarray | None = None,
    ):
        true_rows = np.asarray(true_rows, dtype=np.float64)
        if true_rows.shape != (2, 2, 4):
            raise ValueError("true dynamics must have shape (2, 2, 4)")
        if np.any(true_rows < 0) or not np.allclose(true_rows.sum(axis=2), 1.0, atol=1e-9):
            raise ValueError("each true dynamics row must be a distribution")
        self._true = true_rows
        self._prior = np.asarray(prior_rows, dtype=np.float64)
        self._rewards = (
            np.zeros((2, 2)) if rewards is None else np.asarray(rewards, dtype=np.float64)
        )
        self._initial = (
            np.array([0.5, 0.5])
            if initial_probs is None
            else np.asarray(initial_probs, dtype=np.float64)
        )

    def reward(self, s: int, a: int) -> float:
        return float(self._rewards[s, a])

    @property
    def reward_bounds(self) -> tuple[float, float]:
        return (float(self._rewards.min()), float(self._rewards.max()))

    def true_joint(self, s: int, a: int) -> np.ndarray:
        return self._true[s, a].reshape(2, 2)

    @property
    def initial_state_probs(self) -> np.ndarray:
        return self._initial

    def prior_counts(self, rng: np.random.Generator) -> JointCountTable:
        return JointCountTable(self._prior.copy(), num_observations=2)


def make_domain(name: str, n: int = 3, f: float = 0.1, **chain_kwargs) -> Domain:
    """Domain factory used by the command line and the experiment configs."""
    if name == "tiger":
        return TigerDomain()
    if name == "sysadmin":
        return SysadminDomain(n, f)
    if name == "chain":
        if not chain_kwargs:
            return default_chain()
        return ChainDomain(**chain_kwargs)
    raise ValueError(f"unknown domain {name!r}")


def default_chain() -> ChainDomain:
    """A fixed chain instance for oracle checks and the CLI.

    The prior counts are deliberately concentrated: the exhaustive history
    checks compare empirical frequencies over up to 512 depth-3 histories
    against analytic values, and the per-cell binomial standard error at
    1e5 simulations only leaves room for a sharply peaked distribution.
    """
    true_rows = np.array(
        [
            [[0.5, 0.2, 0.2, 0.1], [0.1, 0.3, 0.4, 0.2]],
            [[0.25, 0.25, 0.25, 0.25], [0.4, 0.1, 0.1, 0.4]],
        ]
    )
    prior_rows = np.array(
        [
            [[60.0, 3.0, 2.0, 1.0], [2.0, 60.0, 2.0, 2.0]],
            [[3.0, 2.0, 60.0, 1.0], [64.0, 1.0, 2.0, 1.0]],
        ]
    )
    rewards = np.array([[1.0, -1.0], [0.0, 2.0]])
    return ChainDomain(true_rows, prior_rows, rewards)
