"""Core abstractions for (Bayes-adaptive) POMDPs with discrete spaces.

States, actions and observations are plain nonnegative integer indices into
finite spaces declared by a :class:`Domain`. The learned-model belief
substrate is a table of Dirichlet counts over ``(s, a) -> (s', z)``
outcomes, stored either jointly (one row per ``(s, a)`` over all
``(s', z)`` pairs) or factored into separate transition and observation
tables. Both layouts expose the same sampling interface, so planners and
belief updates are layout-agnostic.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from bapomcp.instrument import copy_meter


def categorical(weights: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an index proportionally to nonnegative ``weights``.

    Raises ``ValueError`` when the weights sum to zero (an ill-formed count
    row: the expected model of Eq-style normalized counts is undefined).
    """
    cum = np.cumsum(weights)
    total = cum[-1]
    if total <= 0.0:
        raise ValueError("count row has zero total; expected model undefined")
    return int(np.searchsorted(cum, rng.random() * total, side="right"))


def sample_dirichlet_row(counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample a probability vector from ``Dirichlet(counts)``.

    Uses normalized independent Gamma variates, which works for any
    dimension and never leaves the simplex. Zero-count components get zero
    probability mass; an all-zero row is rejected.

    :param counts: 1-D nonnegative concentration parameters
    :param rng: source of randomness
    :return: a vector on the probability simplex
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1:
        raise ValueError("expected a 1-D count row")
    if np.any(counts < 0):
        raise ValueError("negative Dirichlet count")
    gammas = rng.standard_gamma(counts)
    total = gammas.sum()
    if total <= 0.0:
        raise ValueError("all-zero count row; Dirichlet undefined")
    return gammas / total


class Counts(abc.ABC):
    """Interface shared by count tables and their copy-on-write views.

    Concrete layouts interpret a logical entry ``(s, a, s', z)`` in their
    own storage; every operation below is defined on the logical view.
    """

    num_states: int
    num_actions: int
    num_observations: int

    #: True when the storage is split into transition and observation tables.
    factored: bool = False

    @abc.abstractmethod
    def get(self, s: int, a: int, s1: int, z: int) -> float:
        """Effective count of the ``(s, a, s', z)`` entry."""

    @abc.abstractmethod
    def increment(self, s: int, a: int, s1: int, z: int) -> None:
        """Add exactly one observation of ``(s, a) -> (s', z)``."""

    @abc.abstractmethod
    def trans_counts(self, s: int, a: int) -> np.ndarray:
        """First-stage count row: joint outcomes, or next states if factored."""

    @abc.abstractmethod
    def obs_counts(self, a: int, s1: int) -> np.ndarray:
        """Second-stage (observation) count row; only used when factored."""

    @abc.abstractmethod
    def copy(self) -> "Counts":
        """Isolated copy; records its cost on the copy meter."""

    @abc.abstractmethod
    def key(self) -> bytes:
        """Hashable snapshot of the effective counts."""

    @property
    @abc.abstractmethod
    def entry_count(self) -> int:
        """Number of stored entries (the cost of a full copy)."""

    # -- derived operations, shared by all layouts ------------------------

    def row_total(self, s: int, a: int) -> float:
        return float(self.trans_counts(s, a).sum())

    def expected_prob(self, s: int, a: int, s1: int, z: int) -> float:
        """Posterior-mean probability of ``(s', z)`` given ``(s, a)``.

        This is the normalized-count expectation of the unknown dynamics;
        it is recomputed from the current counts on every call.
        """
        trow = self.trans_counts(s, a)
        ttot = trow.sum()
        if ttot <= 0.0:
            raise ValueError(f"zero count total for (s={s}, a={a})")
        if not self.factored:
            return float(trow[s1 * self.num_observations + z] / ttot)
        orow = self.obs_counts(a, s1)
        otot = orow.sum()
        p_s1 = float(trow[s1] / ttot)
        if otot <= 0.0:
            if p_s1 == 0.0:
                return 0.0
            raise ValueError(f"zero observation count total for (a={a}, s'={s1})")
        return p_s1 * float(orow[z] / otot)

    def expected_joint(self, s: int, a: int) -> np.ndarray:
        """Full expected outcome distribution as an ``(S, Z)`` matrix."""
        S, Z = self.num_states, self.num_observations
        trow = self.trans_counts(s, a)
        ttot = trow.sum()
        if ttot <= 0.0:
            raise ValueError(f"zero count total for (s={s}, a={a})")
        if not self.factored:
            return (trow / ttot).reshape(S, Z)
        joint = np.zeros((S, Z))
        for s1 in range(S):
            if trow[s1] == 0.0:
                continue
            orow = self.obs_counts(a, s1)
            otot = orow.sum()
            if otot <= 0.0:
                raise ValueError(f"zero observation count total for (a={a}, s'={s1})")
            joint[s1] = (trow[s1] / ttot) * (orow / otot)
        return joint

    def sample_expected(
        self, s: int, a: int, rng: np.random.Generator
    ) -> tuple[int, int]:
        """Draw ``(s', z)`` from the expected model of the current counts.

        Probabilities are recomputed on the fly from the count row; nothing
        is cached between calls, so interleaved increments are always
        reflected in the next draw.
        """
        if not self.factored:
            out = categorical(self.trans_counts(s, a), rng)
            return divmod(out, self.num_observations)
        s1 = categorical(self.trans_counts(s, a), rng)
        z = categorical(self.obs_counts(a, s1), rng)
        return s1, z

    def sample_step_model(
        self, s: int, a: int, rng: np.random.Generator
    ) -> tuple[int, int]:
        """Draw a fresh model row from ``Dirichlet(counts)``, then an outcome.

        One draw per call; the sampled row is discarded afterwards, which is
        exactly the per-step model sampling of the baseline planner.
        """
        if not self.factored:
            gam = rng.standard_gamma(self.trans_counts(s, a))
            out = categorical(gam, rng)
            return divmod(out, self.num_observations)
        s1 = categorical(rng.standard_gamma(self.trans_counts(s, a)), rng)
        z = categorical(rng.standard_gamma(self.obs_counts(a, s1)), rng)
        return s1, z

    def sample_model(self, rng: np.random.Generator, lazy: bool = True) -> "DirichletModel":
        """Sample one whole dynamics model from the count posterior."""
        return DirichletModel(self, rng, lazy=lazy)


class JointCountTable(Counts):
    """Dirichlet counts stored as one row per ``(s, a)`` over all ``(s', z)``.

    Rows live in a dense ``(S, A, S * Z)`` float array; joint outcome index
    is ``s' * Z + z``.
    """

    factored = False

    def __init__(self, counts: np.ndarray, num_observations: int):
        counts = np.asarray(counts, dtype=np.float64)
        if counts.ndim != 3:
            raise ValueError("joint counts must have shape (S, A, S*Z)")
        S, _, joint = counts.shape
        if joint != S * num_observations:
            raise ValueError("joint outcome dimension must equal S * Z")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(counts.sum(axis=2) <= 0):
            raise ValueError("every (s, a) row needs a positive total")
        self.counts = counts
        self.num_states = S
        self.num_actions = counts.shape[1]
        self.num_observations = num_observations

    def get(self, s, a, s1, z):
        return float(self.counts[s, a, s1 * self.num_observations + z])

    def increment(self, s, a, s1, z):
        self.counts[s, a, s1 * self.num_observations + z] += 1.0

    def trans_counts(self, s, a):
        return self.counts[s, a]

    def obs_counts(self, a, s1):
        raise NotImplementedError("joint layout has no separate observation rows")

    @property
    def entry_count(self) -> int:
        return self.counts.size

    def copy(self) -> "JointCountTable":
        copy_meter.add(self.counts.size)
        dup = JointCountTable.__new__(JointCountTable)
        dup.counts = self.counts.copy()
        dup.num_states = self.num_states
        dup.num_actions = self.num_actions
        dup.num_observations = self.num_observations
        return dup

    def merged_with(self, delta: dict[tuple[int, int, int, int], float]) -> "JointCountTable":
        dup = self.copy()
        for (s, a, s1, z), extra in delta.items():
            dup.counts[s, a, s1 * self.num_observations + z] += extra
        return dup

    def key(self) -> bytes:
        return self.counts.tobytes()

    def freeze(self) -> None:
        self.counts.flags.writeable = False


class FactoredCountTable(Counts):
    """Counts factored into transition ``(S, A, S)`` and observation
    ``(A, S, Z)`` tables.

    One logical increment of ``(s, a, s', z)`` bumps one entry in each
    factor table. This is the default layout: it is the compact way to
    express a known deterministic observation function next to an uncertain
    transition function.
    """

    factored = True

    def __init__(self, trans: np.ndarray, obs: np.ndarray):
        trans = np.asarray(trans, dtype=np.float64)
        obs = np.asarray(obs, dtype=np.float64)
        if trans.ndim != 3 or trans.shape[0] != trans.shape[2]:
            raise ValueError("transition counts must have shape (S, A, S)")
        if obs.ndim != 3 or obs.shape[:2] != (trans.shape[1], trans.shape[0]):
            raise ValueError("observation counts must have shape (A, S, Z)")
        if np.any(trans < 0) or np.any(obs < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(trans.sum(axis=2) <= 0):
            raise ValueError("every (s, a) transition row needs a positive total")
        if np.any(obs.sum(axis=2) <= 0):
            raise ValueError("every (a, s') observation row needs a positive total")
        self.trans = trans
        self.obs = obs
        self.num_states = trans.shape[0]
        self.num_actions = trans.shape[1]
        self.num_observations = obs.shape[2]

    def get(self, s, a, s1, z):
        # Effective joint count of a factored table is layout-specific;
        # expose the transition-factor entry, which is what increments and
        # delta bookkeeping operate on. Observation factors are reachable
        # through obs_counts.
        return float(self.trans[s, a, s1])

    def increment(self, s, a, s1, z):
        self.trans[s, a, s1] += 1.0
        self.obs[a, s1, z] += 1.0

    def trans_counts(self, s, a):
        return self.trans[s, a]

    def obs_counts(self, a, s1):
        return self.obs[a, s1]

    @property
    def entry_count(self) -> int:
        return self.trans.size + self.obs.size

    def copy(self) -> "FactoredCountTable":
        copy_meter.add(self.trans.size + self.obs.size)
        dup = FactoredCountTable.__new__(FactoredCountTable)
        dup.trans = self.trans.copy()
        dup.obs = self.obs.copy()
        dup.num_states = self.num_states
        dup.num_actions = self.num_actions
        dup.num_observations = self.num_observations
        return dup

    def merged_with(self, delta: dict[tuple[int, int, int, int], float]) -> "FactoredCountTable":
        dup = self.copy()
        for (s, a, s1, z), extra in delta.items():
            dup.trans[s, a, s1] += extra
            dup.obs[a, s1, z] += extra
        return dup

    def key(self) -> bytes:
        return self.trans.tobytes() + self.obs.tobytes()

    def freeze(self) -> None:
        self.trans.flags.writeable = False
        self.obs.flags.writeable = False


class DirichletModel:
    """One dynamics model drawn from the posterior over models.

    Rows are sampled from the per-row Dirichlet distributions of the source
    counts. With ``lazy=True`` a row is only drawn on first access and then
    memoized, so unvisited parts of a large model are never paid for; eager
    mode draws every row up front in canonical row order (all first-stage
    rows, then all observation rows).

    The model never updates counts; it is fixed for its lifetime.
    """

    def __init__(self, counts: Counts, rng: np.random.Generator, lazy: bool = True):
        self._counts = counts
        self._rng = rng
        self._trans_rows: dict[tuple[int, int], np.ndarray] = {}
        self._obs_rows: dict[tuple[int, int], np.ndarray] = {}
        self.rows_materialized = 0
        if not lazy:
            for s in range(counts.num_states):
                for a in range(counts.num_actions):
                    self._trans_row(s, a)
            if counts.factored:
                for a in range(counts.num_actions):
                    for s1 in range(counts.num_states):
                        self._obs_row(a, s1)

    def _trans_row(self, s: int, a: int) -> np.ndarray:
        row = self._trans_rows.get((s, a))
        if row is None:
            row = sample_dirichlet_row(self._counts.trans_counts(s, a), self._rng)
            self._trans_rows[(s, a)] = row
            self.rows_materialized += 1
        return row

    def _obs_row(self, a: int, s1: int) -> np.ndarray:
        row = self._obs_rows.get((a, s1))
        if row is None:
            row = sample_dirichlet_row(self._counts.obs_counts(a, s1), self._rng)
            self._obs_rows[(a, s1)] = row
            self.rows_materialized += 1
        return row

    def sample(self, s: int, a: int, rng: np.random.Generator) -> tuple[int, int]:
        if not self._counts.factored:
            out = categorical(self._trans_row(s, a), rng)
            return divmod(out, self._counts.num_observations)
        s1 = categorical(self._trans_row(s, a), rng)
        z = categorical(self._obs_row(a, s1), rng)
        return s1, z

    def joint_row(self, s: int, a: int) -> np.ndarray:
        """The model's outcome distribution for ``(s, a)`` as an ``(S, Z)`` matrix."""
        S = self._counts.num_states
        Z = self._counts.num_observations
        if not self._counts.factored:
            return self._trans_row(s, a).reshape(S, Z)
        trow = self._trans_row(s, a)
        joint = np.zeros((S, Z))
        for s1 in range(S):
            if trow[s1] > 0.0:
                joint[s1] = trow[s1] * self._obs_row(a, s1)
        return joint


class ExpectedModel:
    """The posterior-mean model of a fixed set of counts.

    Used when a root-sampled simulation should follow expected dynamics:
    outcome probabilities are recomputed from the (unchanging) source counts
    on every draw, so nothing needs to be stored.
    """

    def __init__(self, counts: Counts):
        self._counts = counts
        self.rows_materialized = 0

    def sample(self, s: int, a: int, rng: np.random.Generator) -> tuple[int, int]:
        return self._counts.sample_expected(s, a, rng)

    def joint_row(self, s: int, a: int) -> np.ndarray:
        return self._counts.expected_joint(s, a)


@dataclass
class AugmentedState:
    """Hidden state of the Bayes-adaptive POMDP: domain state plus counts.

    A successful step ``(s, a) -> (s', z)`` moves ``state`` to ``s'`` and
    adds exactly one count to the ``(s, a, s', z)`` entry, so the counts of
    the true (hidden) augmented state always tally the experience so far.
    """

    state: int
    counts: Counts

    def copy(self) -> "AugmentedState":
        copy_meter.add(1)
        return AugmentedState(self.state, self.counts.copy())


class Domain(abc.ABC):
    """A ground-truth environment plus the agent's prior over its dynamics.

    The true dynamics are only used to simulate the real environment and to
    build priors; the planner and belief code never see them.
    """

    num_states: int
    num_actions: int
    num_observations: int

    @abc.abstractmethod
    def reward(self, s: int, a: int) -> float:
        """Immediate reward of taking ``a`` in ``s`` (known to the agent)."""

    @property
    @abc.abstractmethod
    def reward_bounds(self) -> tuple[float, float]:
        """(min, max) over all ``reward(s, a)``; feeds the exploration constant."""

    def is_terminal(self, s: int) -> bool:
        return False

    @abc.abstractmethod
    def true_joint(self, s: int, a: int) -> np.ndarray:
        """True outcome distribution over ``(s', z)`` as an ``(S, Z)`` matrix."""

    def sample_true(self, s: int, a: int, rng: np.random.Generator) -> tuple[int, int]:
        """Step the real environment."""
        out = categorical(self.true_joint(s, a).ravel(), rng)
        return divmod(out, self.num_observations)

    @property
    @abc.abstractmethod
    def initial_state_probs(self) -> np.ndarray:
        """Distribution the hidden state is drawn from at episode start."""

    def sample_initial_state(self, rng: np.random.Generator) -> int:
        return categorical(self.initial_state_probs, rng)

    @abc.abstractmethod
    def prior_counts(self, rng: np.random.Generator) -> Counts:
        """The agent's prior belief over the dynamics, as a count table."""
