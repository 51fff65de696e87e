"""Keyed random-number streams.

Every stochastic component in this package draws from a
:class:`numpy.random.Generator` obtained through :func:`stream`, keyed by a
tuple of nonnegative integers such as ``(run_seed, run, episode, step,
purpose)``. Streams with different keys are statistically independent, so
results are reproducible no matter in which order (or on which worker) the
keyed units of work execute.
"""

from __future__ import annotations

import numpy as np

# Purpose codes used as the last component of a stream key. Keeping them in
# one place avoids accidental key collisions between subsystems.
BELIEF_INIT = 0
PLAN = 1
ENV = 2
UPDATE = 3
EPISODE_RESET = 4
PRIOR = 5


def stream(*key: int) -> np.random.Generator:
    """Return an independent generator for the given integer key tuple."""
    if not key:
        raise ValueError("stream key must contain at least one integer")
    return np.random.default_rng(np.random.SeedSequence(key))


def kernel_seed(*key: int) -> int:
    """Derive a 32-bit seed for JIT kernels from the same key space."""
    return int(np.random.SeedSequence(key).generate_state(1, np.uint32)[0])
