"""Particle-filter beliefs over augmented states, with copy-on-write counts.

The belief is an unweighted filter of ``K`` augmented-state particles.
Real-step updates use rejection sampling: resimulate sampled particles and
keep the ones whose simulated observation matches the real one. Accepted
particles carry their incremented counts, which is how the belief over the
dynamics model is refined.

Particles can hold their counts either as a plain table (full copies) or as
a :class:`LinkingCounts` view: a handle to a shared immutable base table
plus a small private delta of updated counts. Copying such a particle only
copies the delta, and once the delta grows past a threshold it is merged
into a fresh base.
"""

from __future__ import annotations

import numpy as np

from bapomcp.core import AugmentedState, Counts, Domain, categorical
from bapomcp.instrument import copy_meter


class BeliefDeprivationError(RuntimeError):
    """Rejection sampling could not refill the filter.

    Raised when the observed value is impossible (or vanishingly unlikely)
    under every particle; carries the measured acceptance rate so callers
    can log how starved the update was.
    """

    def __init__(self, accepted: int, attempts: int):
        self.accepted = accepted
        self.attempts = attempts
        self.acceptance_rate = accepted / attempts if attempts else 0.0
        super().__init__(
            f"belief update accepted {accepted} particles in {attempts} attempts "
            f"(rate {self.acceptance_rate:.2e})"
        )


class LinkingCounts(Counts):
    """Copy-on-write view: shared immutable base counts plus a private delta.

    The delta maps logical ``(s, a, s', z)`` entries to added counts; reads
    compose base and delta, writes go to the delta only. ``copy`` shares the
    base and duplicates the delta, so its cost is proportional to the number
    of updated entries rather than to the table size.
    """

    def __init__(self, base: Counts, delta: dict[tuple[int, int, int, int], float] | None = None):
        self.base = base
        self.delta: dict[tuple[int, int, int, int], float] = {} if delta is None else delta
        self.num_states = base.num_states
        self.num_actions = base.num_actions
        self.num_observations = base.num_observations

    @property
    def factored(self) -> bool:  # type: ignore[override]
        return self.base.factored

    @property
    def delta_size(self) -> int:
        """Number of distinct updated entries (the merge-trigger measure)."""
        return len(self.delta)

    def get(self, s, a, s1, z):
        if not self.base.factored:
            return self.base.get(s, a, s1, z) + self.delta.get((s, a, s1, z), 0.0)
        extra = 0.0
        for zz in range(self.num_observations):
            extra += self.delta.get((s, a, s1, zz), 0.0)
        return self.base.get(s, a, s1, z) + extra

    def increment(self, s, a, s1, z):
        key = (s, a, s1, z)
        self.delta[key] = self.delta.get(key, 0.0) + 1.0

    def trans_counts(self, s, a):
        base_row = self.base.trans_counts(s, a)
        row = None
        Z = self.num_observations
        for (ds, da, ds1, dz), val in self.delta.items():
            if ds == s and da == a:
                if row is None:
                    row = base_row.copy()
                if self.base.factored:
                    row[ds1] += val
                else:
                    row[ds1 * Z + dz] += val
        return base_row if row is None else row

    def obs_counts(self, a, s1):
        base_row = self.base.obs_counts(a, s1)
        row = None
        for (ds, da, ds1, dz), val in self.delta.items():
            if da == a and ds1 == s1:
                if row is None:
                    row = base_row.copy()
                row[dz] += val
        return base_row if row is None else row

    @property
    def entry_count(self) -> int:
        return len(self.delta)

    def copy(self) -> "LinkingCounts":
        copy_meter.add(len(self.delta))
        return LinkingCounts(self.base, dict(self.delta))

    def key(self) -> bytes:
        return self.base.key() + repr(sorted(self.delta.items())).encode()

    def merge(self) -> None:
        """Fold the delta into a fresh immutable base and empty the delta.

        The old base is never touched, so other particles linking to it are
        unaffected. Effective counts are identical before and after.
        """
        if not self.delta:
            return
        new_base = self.base.merged_with(self.delta)  # type: ignore[attr-defined]
        new_base.freeze()
        self.base = new_base
        self.delta = {}


def make_linking(state: int, base: Counts) -> AugmentedState:
    """Particle whose counts link to ``base`` with an initially empty delta."""
    return AugmentedState(state, LinkingCounts(base))


def effective_count(particle: AugmentedState, s: int, a: int, s1: int, z: int) -> float:
    """Composite (base + delta) count visible through a linking particle."""
    return particle.counts.get(s, a, s1, z)


def merge_if_needed(particle: AugmentedState, lam: int) -> bool:
    """Merge the particle's delta into a new base when it exceeds ``lam``.

    The trigger is strictly greater-than: a delta of exactly ``lam`` distinct
    entries is left alone. Returns whether a merge happened. No-op for
    plain particles.
    """
    if lam < 0:
        raise ValueError("merge threshold must be nonnegative")
    counts = particle.counts
    if isinstance(counts, LinkingCounts) and counts.delta_size > lam:
        counts.merge()
        return True
    return False


class ParticleFilter:
    """Unweighted belief: ``K`` equally weighted augmented-state particles."""

    def __init__(self, particles: list[AugmentedState]):
        if not particles:
            raise ValueError("particle filter needs at least one particle")
        self.particles = particles

    def __len__(self) -> int:
        return len(self.particles)

    def sample(self, rng: np.random.Generator) -> AugmentedState:
        """Uniformly random particle; a handle to the stored particle, not a copy."""
        return self.particles[int(rng.integers(len(self.particles)))]

    def state_frequencies(self, num_states: int) -> np.ndarray:
        freq = np.zeros(num_states)
        for p in self.particles:
            freq[p.state] += 1.0
        return freq / len(self.particles)


def make_prior_belief(
    domain: Domain,
    num_particles: int,
    rng: np.random.Generator,
    linking: bool = False,
    prior: Counts | None = None,
) -> ParticleFilter:
    """Initial belief: prior counts paired with initial-state draws.

    Plain particles share the single prior table object; this is safe
    because nothing mutates a stored particle in place (planning and belief
    updates both operate on copies). Linking particles link to one frozen
    copy of the prior.
    """
    if prior is None:
        prior = domain.prior_counts(rng)
    if linking:
        base = prior.copy()
        base.freeze()  # type: ignore[attr-defined]
        particles = [
            make_linking(domain.sample_initial_state(rng), base)
            for _ in range(num_particles)
        ]
    else:
        particles = [
            AugmentedState(domain.sample_initial_state(rng), prior)
            for _ in range(num_particles)
        ]
    return ParticleFilter(particles)


def rejection_update(
    belief: ParticleFilter,
    action: int,
    real_obs: int,
    stepper,
    rng: np.random.Generator,
    max_attempts: int | None = None,
    merge_lambda: int | None = None,
) -> ParticleFilter:
    """Rejection-sampling belief update after executing ``action``.

    Repeatedly samples a particle, copies it, applies ``stepper`` (one of
    the planner step variants, which advances the copy's state and counts),
    and accepts the copy when its simulated observation equals ``real_obs``.
    Stops once the new filter holds the same number of particles as the old
    one. Linking particles are merge-checked right after acceptance.

    :param stepper: callable ``(particle, action, rng) -> observation``
    :param max_attempts: total attempt budget, defaults to ``1000 * K``
    :param merge_lambda: delta-size threshold for linking-state merges
    :raises BeliefDeprivationError: when the budget runs out first
    """
    K = len(belief)
    if max_attempts is None:
        max_attempts = 1000 * K
    accepted: list[AugmentedState] = []
    attempts = 0
    while len(accepted) < K:
        if attempts >= max_attempts:
            raise BeliefDeprivationError(len(accepted), attempts)
        attempts += 1
        candidate = belief.sample(rng).copy()
        z = stepper(candidate, action, rng)
        if z == real_obs:
            if merge_lambda is not None:
                merge_if_needed(candidate, merge_lambda)
            accepted.append(candidate)
    return ParticleFilter(accepted)
