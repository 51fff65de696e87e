"""Experiment harness: seeded learning runs, timing, statistics, CSV output.

A *run* is an independent repetition: a fresh prior belief followed by a
sequence of episodes against the real environment. Within an episode the
loop is plan -> act -> observe -> rejection-update; at an episode's end the
belief keeps every particle's learned counts and only redraws the hidden
states, so knowledge of the dynamics accumulates across episodes.

Runs are reproducible and order-independent: every stochastic component
draws from a stream keyed by ``(seed, run, episode, step, purpose)``, so
the same config and seed produce bit-identical CSV output no matter how
runs are distributed over workers.

Two interchangeable backends execute a run: ``reference`` (the object
planner in :mod:`bapomcp.planner`) and ``fast`` (flat-array JIT kernels in
:mod:`bapomcp.fastengine`, the default for benchmark-scale work).
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from bapomcp import rng as rngs
from bapomcp.belief import BeliefDeprivationError, make_prior_belief, rejection_update
from bapomcp.core import Domain
from bapomcp.domains import make_domain
from bapomcp.planner import (
    PlannerConfig,
    belief_update_stepper,
    lookahead_plan,
    plan,
)

RECORD_COLUMNS = ("run", "episode", "return", "mean_action_time_s", "capped", "deprived", "seed")
STATS_COLUMNS = ("episode", "mean_return", "ci95_lo", "ci95_hi", "n")


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    Defaults follow the benchmark's standard table: discount 0.95, horizon
    20, 1000 belief particles, failure rate 0.1, 100 episodes, merge
    threshold 30, and exploration constant ``horizon * (max R - min R)``
    (set ``ucb_c`` to override).
    """

    domain: str = "tiger"
    n: int = 3
    f: float = 0.1
    planner: str = "pomcp"
    variants: str = ""
    num_sims: int = 1000
    particles: int = 1000
    episodes: int = 100
    horizon: int = 20
    gamma: float = 0.95
    ucb_c: float | None = None
    lam: int = 30
    lookahead_depth: int = 1
    runs: int = 500
    seed: int = 0
    time_cap: float = 5.0
    engine: str = "fast"
    workers: int = 1
    out: str | None = None
    max_attempt_factor: int = 1000

    def validate(self) -> None:
        if self.domain not in ("tiger", "sysadmin", "chain"):
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.planner not in ("pomcp", "lookahead"):
            raise ConfigError(f"unknown planner {self.planner!r}")
        if set(self.variants) - set("rel"):
            raise ConfigError("variants must combine the letters r, e, l")
        if self.num_sims < 1:
            raise ConfigError("num_sims must be positive")
        if self.particles < 1:
            raise ConfigError("particles must be positive")
        if self.episodes < 1 or self.horizon < 1 or self.runs < 1:
            raise ConfigError("episodes, horizon and runs must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.lookahead_depth < 1:
            raise ConfigError("lookahead depth must be positive")
        if self.engine not in ("fast", "reference"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.time_cap <= 0:
            raise ConfigError("time cap must be positive")
        if self.n < 1:
            raise ConfigError("network size must be positive")

    @property
    def root_sample(self) -> bool:
        return "r" in self.variants

    @property
    def expected(self) -> bool:
        return "e" in self.variants

    @property
    def linking(self) -> bool:
        return "l" in self.variants

    def build_domain(self) -> Domain:
        return make_domain(self.domain, n=self.n, f=self.f)

    def exploration_constant(self, domain: Domain) -> float:
        if self.ucb_c is not None:
            return self.ucb_c
        lo, hi = domain.reward_bounds
        return self.horizon * (hi - lo)


@dataclass
class RunRecord:
    run: int
    episode: int
    ret: float
    mean_action_time_s: float
    capped: bool
    deprived: bool
    seed: int


def run_learning(cfg: ExperimentConfig) -> list[RunRecord]:
    """Execute all runs of the configured experiment.

    Returns one record per (run, episode); a belief-deprivation error ends
    its run early, leaving the partial records with the final one flagged.
    Runs execute in parallel when ``cfg.workers > 1``; results are
    identical either way.
    """
    cfg.validate()
    if cfg.engine == "fast" and _fast_supported(cfg):
        from bapomcp.fastengine import run_one_fast as run_one
    else:
        run_one = _run_one_reference
    if cfg.workers == 1 or cfg.runs == 1:
        nested = [run_one(cfg, run) for run in range(cfg.runs)]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            nested = list(pool.map(_run_entry, [(cfg, r) for r in range(cfg.runs)]))
    records = [rec for batch in nested for rec in batch]
    records.sort(key=lambda r: (r.run, r.episode))
    return records


def _fast_supported(cfg: ExperimentConfig) -> bool:
    # The JIT kernels cover the factored-table benchmark domains; the tiny
    # joint-layout chain domain always runs on the reference backend.
    if cfg.domain == "chain":
        return False
    if cfg.planner == "lookahead" and cfg.lookahead_depth != 1:
        return False
    return True


def _run_entry(args) -> list[RunRecord]:
    cfg, run = args
    if cfg.engine == "fast" and _fast_supported(cfg):
        from bapomcp.fastengine import run_one_fast

        return run_one_fast(cfg, run)
    return _run_one_reference(cfg, run)


def _run_one_reference(cfg: ExperimentConfig, run: int) -> list[RunRecord]:
    domain = cfg.build_domain()
    prior = domain.prior_counts(rngs.stream(cfg.seed, run, 0, 0, rngs.PRIOR))
    belief = make_prior_belief(
        domain,
        cfg.particles,
        rngs.stream(cfg.seed, run, 0, 0, rngs.BELIEF_INIT),
        linking=cfg.linking,
        prior=prior,
    )
    ucb_c = cfg.exploration_constant(domain)
    merge_lambda = cfg.lam if cfg.linking else None
    records: list[RunRecord] = []
    env_state = domain.sample_initial_state(
        rngs.stream(cfg.seed, run, 0, 0, rngs.EPISODE_RESET)
    )
    for ep in range(cfg.episodes):
        if ep > 0:
            reset_rng = rngs.stream(cfg.seed, run, ep, 0, rngs.EPISODE_RESET)
            env_state = domain.sample_initial_state(reset_rng)
            for p in belief.particles:
                p.state = domain.sample_initial_state(reset_rng)
        ep_return = 0.0
        discount = 1.0
        times = []
        capped = False
        for t in range(cfg.horizon):
            pcfg = PlannerConfig(
                num_sims=cfg.num_sims,
                max_depth=cfg.horizon - t,
                gamma=cfg.gamma,
                ucb_c=ucb_c,
                root_sample_model=cfg.root_sample,
                expected_model=cfg.expected,
                linking_states=cfg.linking,
            )
            plan_rng = rngs.stream(cfg.seed, run, ep, t, rngs.PLAN)
            start = time.perf_counter()
            if cfg.planner == "pomcp":
                action = plan(belief, domain, pcfg, plan_rng)
            else:
                action = lookahead_plan(
                    belief, cfg.lookahead_depth, domain, cfg.gamma, plan_rng
                )
            elapsed = time.perf_counter() - start
            times.append(elapsed)
            if elapsed > cfg.time_cap:
                capped = True
            ep_return += discount * domain.reward(env_state, action)
            discount *= cfg.gamma
            env_state, real_obs = domain.sample_true(
                env_state, action, rngs.stream(cfg.seed, run, ep, t, rngs.ENV)
            )
            try:
                belief = rejection_update(
                    belief,
                    action,
                    real_obs,
                    belief_update_stepper(pcfg),
                    rngs.stream(cfg.seed, run, ep, t, rngs.UPDATE),
                    max_attempts=cfg.max_attempt_factor * len(belief),
                    merge_lambda=merge_lambda,
                )
            except BeliefDeprivationError:
                records.append(
                    RunRecord(run, ep, ep_return, float(np.mean(times)), capped, True, cfg.seed)
                )
                return records
        records.append(
            RunRecord(run, ep, ep_return, float(np.mean(times)), capped, False, cfg.seed)
        )
    return records


def measure_action_time(cfg: ExperimentConfig) -> float:
    """Mean wall-clock seconds per planning call across the whole experiment.

    Forces a single worker so timing is not skewed by contention.
    """
    records = run_learning(replace(cfg, workers=1))
    return float(np.mean([r.mean_action_time_s for r in records]))


# -- statistics --------------------------------------------------------------


@dataclass
class EpisodeStats:
    episode: int
    mean_return: float
    ci95_lo: float
    ci95_hi: float
    n: int


def aggregate_stats(records: list[RunRecord]) -> list[EpisodeStats]:
    """Per-episode mean return with a normal-approximation 95% interval.

    A single sample yields a degenerate zero-width interval (lo == hi ==
    mean), which callers should treat as "no uncertainty estimate".
    """
    if not records:
        raise ValueError("no records to aggregate")
    by_episode: dict[int, list[float]] = {}
    for rec in records:
        by_episode.setdefault(rec.episode, []).append(rec.ret)
    stats = []
    for episode in sorted(by_episode):
        values = np.array(by_episode[episode])
        mean = float(values.mean())
        if len(values) > 1:
            half = 1.96 * float(values.std(ddof=1)) / np.sqrt(len(values))
        else:
            half = 0.0
        stats.append(EpisodeStats(episode, mean, mean - half, mean + half, len(values)))
    return stats


def mean_return(records: list[RunRecord]) -> float:
    return float(np.mean([r.ret for r in records]))


def return_ci(records: list[RunRecord]) -> tuple[float, float]:
    """95% interval for the mean of per-run average returns."""
    per_run: dict[int, list[float]] = {}
    for rec in records:
        per_run.setdefault(rec.run, []).append(rec.ret)
    means = np.array([np.mean(v) for v in per_run.values()])
    center = float(means.mean())
    if len(means) > 1:
        half = 1.96 * float(means.std(ddof=1)) / np.sqrt(len(means))
    else:
        half = 0.0
    return center - half, center + half


# -- CSV ---------------------------------------------------------------------


def emit_csv(records: list[RunRecord], path: str) -> None:
    """Records CSV in deterministic (run, episode) order.

    Floats are written with ``repr`` so a round-trip parse reproduces them
    bit for bit.
    """
    ordered = sorted(records, key=lambda r: (r.run, r.episode))
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RECORD_COLUMNS)
            for r in ordered:
                writer.writerow(
                    [
                        r.run,
                        r.episode,
                        repr(r.ret),
                        repr(r.mean_action_time_s),
                        int(r.capped),
                        int(r.deprived),
                        r.seed,
                    ]
                )
    except OSError as err:
        raise OSError(f"cannot write records to {path}: {err}") from err


def read_csv(path: str) -> list[RunRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                RunRecord(
                    run=int(row["run"]),
                    episode=int(row["episode"]),
                    ret=float(row["return"]),
                    mean_action_time_s=float(row["mean_action_time_s"]),
                    capped=bool(int(row["capped"])),
                    deprived=bool(int(row["deprived"])),
                    seed=int(row["seed"]),
                )
            )
    return records


def emit_stats_csv(stats: list[EpisodeStats], path: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(STATS_COLUMNS)
            for s in stats:
                writer.writerow(
                    [s.episode, repr(s.mean_return), repr(s.ci95_lo), repr(s.ci95_hi), s.n]
                )
    except OSError as err:
        raise OSError(f"cannot write stats to {path}: {err}") from err


# -- config files ------------------------------------------------------------


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key=value`` pairs; blank lines and ``#`` comments are skipped."""
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


_INT_FIELDS = {
    "n", "num_sims", "particles", "episodes", "horizon", "lam",
    "lookahead_depth", "runs", "seed", "workers", "max_attempt_factor",
}
_FLOAT_FIELDS = {"f", "gamma", "time_cap", "ucb_c"}
_KNOWN_FIELDS = {f.name for f in fields(ExperimentConfig)}


def config_from_mapping(
    values: dict[str, str], base: ExperimentConfig | None = None
) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    updates: dict = {}
    for key, raw in values.items():
        if key not in _KNOWN_FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            if key in _INT_FIELDS:
                updates[key] = int(raw)
            elif key in _FLOAT_FIELDS:
                updates[key] = float(raw)
            else:
                updates[key] = raw
        except ValueError as err:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from err
    return replace(cfg, **updates)
