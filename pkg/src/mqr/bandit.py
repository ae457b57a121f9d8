"""Bernoulli bandit environment, arm bookkeeping, episodes and experiments.

Arms are 0-based everywhere in memory.  Only the trajectory file format and
:class:`StepRecord` use 1-based arm indices.

Randomness layout: replication ``r`` of an experiment with base seed ``s``
owns ``RngStream(s, r)`` and splits it into three child streams, one for the
instance draw, one for the reward tables and one for the policy's noise.
Because the child streams do not depend on the policy, two policies run with
the same seed face the same instances and the same reward sequences (the
n-th pull of arm i yields the same reward under every policy).
"""
from __future__ import annotations

import copy
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import CountMismatchError, InvalidArmError, RewardOutOfRangeError
from .stats_dist import U_MAX, U_MIN, RngStream

__all__ = [
    "INSTANCE",
    "REWARDS",
    "POLICY",
    "ArmState",
    "BanditInstance",
    "StepRecord",
    "Trajectory",
    "Policy",
    "ExperimentConfig",
    "ExperimentResult",
    "draw_instance",
    "pull",
    "update_arm",
    "replay_states",
    "regret",
    "simulate_batch",
    "run_episode",
    "run_experiment",
]

# child-stream purposes
INSTANCE = 0
REWARDS = 1
POLICY = 2

CHUNK_SIZE = 256


@dataclass(frozen=True)
class ArmState:
    """Pull count ``k`` and adjusted empirical mean ``mu_hat = sum / (k + 1)``."""

    k: int = 0
    mu_hat: float = 0.0


def update_arm(state: ArmState, reward: float) -> ArmState:
    if not 0.0 <= reward <= 1.0:
        raise RewardOutOfRangeError(f"reward must lie in [0, 1], got {reward}")
    k = state.k
    return ArmState(k + 1, (state.mu_hat * (k + 1) + reward) / (k + 2))


@dataclass(frozen=True)
class BanditInstance:
    means: tuple[float, ...]

    def __post_init__(self):
        means = tuple(float(m) for m in self.means)
        if len(means) < 1 or any(not 0.0 <= m <= 1.0 for m in means):
            raise ValueError(f"arm means must lie in [0, 1], got {means}")
        object.__setattr__(self, "means", means)

    @property
    def n_arms(self) -> int:
        return len(self.means)

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @property
    def optimal_index(self) -> int:
        return int(np.argmax(self.means))

    @property
    def gaps(self) -> np.ndarray:
        m = np.asarray(self.means)
        return m.max() - m


def draw_instance(n_arms: int, rng: RngStream) -> BanditInstance:
    """Arm means drawn i.i.d. from Beta(1, 1)."""
    if n_arms < 2:
        raise ValueError("need at least two arms")
    return BanditInstance(tuple(rng.generator.random(n_arms)))


def pull(instance: BanditInstance, arm: int, rng: RngStream) -> int:
    if not 0 <= arm < instance.n_arms:
        raise InvalidArmError(f"arm {arm} out of range for {instance.n_arms} arms")
    return int(rng.generator.random() < instance.means[arm])


def regret(instance: BanditInstance, counts, horizon: int | None = None) -> float:
    """Pseudo-regret ``sum_i gap_i * counts_i``."""
    counts = np.asarray(counts)
    if counts.shape != (instance.n_arms,):
        raise CountMismatchError(f"expected {instance.n_arms} counts, got shape {counts.shape}")
    if horizon is not None and int(counts.sum()) != horizon:
        raise CountMismatchError(f"counts sum to {int(counts.sum())}, horizon is {horizon}")
    return float(np.dot(instance.gaps, counts))


@dataclass(frozen=True)
class StepRecord:
    t: int
    arm: int
    reward: float


@dataclass
class Trajectory:
    """One recorded episode.

    ``arms`` holds 0-based arm indices and ``rewards`` the observed rewards,
    both of length T.  ``means`` is bookkeeping for regret only and is never
    consulted by the estimator.
    """

    instance: BanditInstance
    policy: str
    arms: np.ndarray
    rewards: np.ndarray
    alpha: float | None = None
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        self.arms = np.asarray(self.arms, dtype=np.int64)
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.arms.shape != self.rewards.shape or self.arms.ndim != 1:
            raise ValueError("arms and rewards must be 1-D arrays of equal length")

    @property
    def n_arms(self) -> int:
        return self.instance.n_arms

    @property
    def horizon(self) -> int:
        return len(self.arms)

    @property
    def steps(self) -> list[StepRecord]:
        return [StepRecord(t + 1, int(a) + 1, float(r)) for t, (a, r) in enumerate(zip(self.arms, self.rewards))]

    def counts(self) -> np.ndarray:
        return np.bincount(self.arms, minlength=self.n_arms)

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())

    @property
    def regret(self) -> float:
        return regret(self.instance, self.counts())

    def final_states(self) -> list[ArmState]:
        return replay_states(self.n_arms, self.arms, self.rewards)


def replay_states(n_arms: int, arms: Sequence[int], rewards: Sequence[float]) -> list[ArmState]:
    """Rebuild per-arm states from a sequence of (arm, reward) steps."""
    k = np.zeros(n_arms, dtype=np.int64)
    s = np.zeros(n_arms)
    np.add.at(k, np.asarray(arms, dtype=np.int64), 1)
    np.add.at(s, np.asarray(arms, dtype=np.int64), np.asarray(rewards, dtype=float))
    return [ArmState(int(ki), float(si / (ki + 1))) for ki, si in zip(k, s)]


# --------------------------------------------------------------------------
# policy interface and the batched engine
# --------------------------------------------------------------------------


class Policy:
    """Batched bandit policy.

    A policy instance runs ``batch`` independent episodes in lockstep.
    ``choose`` receives, when ``uses_noise`` is true, one clamped uniform per
    (episode, arm) taken from each episode's own policy stream; policies turn
    them into their noise draws by inverse-CDF transforms.  Subclasses
    implement :meth:`choose`; the default bookkeeping keeps pull counts and
    reward sums per arm.
    """

    name = "policy"
    uses_noise = False
    alpha: float | None = None

    def reset(self, n_arms: int, horizon: int, batch: int = 1) -> None:
        self.n_arms = n_arms
        self.horizon = horizon
        self.batch = batch
        self.counts = np.zeros((batch, n_arms), dtype=np.int64)
        self.sums = np.zeros((batch, n_arms))
        self._rows = np.arange(batch)

    def choose(self, t: int, u: np.ndarray | None) -> np.ndarray:
        raise NotImplementedError

    def observe(self, arms: np.ndarray, rewards: np.ndarray) -> None:
        self.counts[self._rows, arms] += 1
        self.sums[self._rows, arms] += rewards

    @property
    def mu_hat(self) -> np.ndarray:
        return self.sums / (self.counts + 1)

    def spawn(self) -> "Policy":
        """Fresh copy for an independent batch (shares read-only tables)."""
        return copy.copy(self)


def _reward_tables(streams: Sequence[RngStream], n_arms: int, horizon: int) -> np.ndarray:
    # u[b, arm, j] drives the (j+1)-th pull of `arm` in episode b
    return np.stack([s.child(REWARDS).generator.random((n_arms, horizon)) for s in streams])


def _policy_uniforms(streams: Sequence[RngStream], n_arms: int, horizon: int) -> np.ndarray:
    u = np.stack([s.child(POLICY).generator.random((horizon, n_arms)) for s in streams])
    return np.clip(u, U_MIN, U_MAX, out=u)


def simulate_batch(policy: Policy, means: np.ndarray, horizon: int, streams: Sequence[RngStream]):
    """Run ``len(streams)`` episodes in lockstep.

    Returns ``(arms, rewards)``, each of shape ``(batch, horizon)``.
    """
    means = np.asarray(means, dtype=float)
    batch, n_arms = means.shape
    policy.reset(n_arms, horizon, batch)
    arms_out = np.zeros((batch, horizon), dtype=np.int8 if n_arms < 128 else np.int64)
    rewards_out = np.zeros((batch, horizon), dtype=np.int8)
    if horizon == 0:
        return arms_out, rewards_out
    table = _reward_tables(streams, n_arms, horizon)
    noise = _policy_uniforms(streams, n_arms, horizon) if policy.uses_noise else None
    rows = np.arange(batch)
    pulls = np.zeros((batch, n_arms), dtype=np.int64)
    for t in range(horizon):
        arms = policy.choose(t + 1, None if noise is None else noise[:, t, :])
        j = pulls[rows, arms]
        r = table[rows, arms, j] < means[rows, arms]
        pulls[rows, arms] = j + 1
        policy.observe(arms, r)
        arms_out[:, t] = arms
        rewards_out[:, t] = r
    return arms_out, rewards_out


def run_episode(policy: Policy, instance: BanditInstance, horizon: int, rng: RngStream) -> Trajectory:
    arms, rewards = simulate_batch(policy, np.asarray([instance.means]), horizon, [rng])
    return Trajectory(
        instance=instance,
        policy=policy.name,
        arms=arms[0],
        rewards=rewards[0],
        alpha=policy.alpha,
        seed=rng.seed,
        stream=rng.stream,
    )


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    n_arms: int = 2
    horizon: int = 100
    replications: int = 1000
    seed: int = 0
    instance: tuple[float, ...] | None = None  # fixed-instance mode when set
    keep_trajectories: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.instance is not None and len(self.instance) != self.n_arms:
            raise ValueError("fixed instance must have n_arms means")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    policy: str
    alpha: float | None
    means: np.ndarray  # (R, N)
    total_rewards: np.ndarray  # (R,)
    regrets: np.ndarray  # (R,)
    counts: np.ndarray  # (R, N)
    arms: np.ndarray | None = None  # (R, T), kept on request
    rewards: np.ndarray | None = None

    @property
    def replications(self) -> int:
        return len(self.total_rewards)

    @property
    def mean_reward(self) -> float:
        return float(np.mean(self.total_rewards))

    @property
    def se_reward(self) -> float:
        return _se(self.total_rewards)

    @property
    def mean_regret(self) -> float:
        return float(np.mean(self.regrets))

    @property
    def se_regret(self) -> float:
        return _se(self.regrets)

    @property
    def mean_counts(self) -> np.ndarray:
        return self.counts.mean(axis=0)

    def trajectories(self) -> Iterator[Trajectory]:
        if self.arms is None:
            raise ValueError("trajectories were not kept; set keep_trajectories=True")
        for r in range(self.replications):
            yield Trajectory(
                instance=BanditInstance(tuple(self.means[r])),
                policy=self.policy,
                arms=self.arms[r],
                rewards=self.rewards[r],
                alpha=self.alpha,
                seed=self.config.seed,
                stream=r,
            )

    def summary(self) -> dict:
        return {
            "T": self.config.horizon,
            "policy": self.policy,
            "replications": self.replications,
            "mean_reward": self.mean_reward,
            "se_reward": self.se_reward,
            "mean_regret": self.mean_regret,
            "se_regret": self.se_regret,
            "mean_counts": self.mean_counts.tolist(),
        }


def _se(x: np.ndarray) -> float:
    if len(x) < 2:
        return math.nan
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def _run_chunk(policy: Policy, cfg: ExperimentConfig, reps: range):
    streams = [RngStream(cfg.seed, r) for r in reps]
    if cfg.instance is not None:
        means = np.tile(np.asarray(cfg.instance, dtype=float), (len(streams), 1))
    else:
        means = np.stack([s.child(INSTANCE).generator.random(cfg.n_arms) for s in streams])
    arms, rewards = simulate_batch(policy, means, cfg.horizon, streams)
    return means, arms, rewards, policy.alpha


def run_experiment(policy, config: ExperimentConfig) -> ExperimentResult:
    """Run ``config.replications`` independent episodes of ``policy``.

    ``policy`` is a :class:`Policy` or a policy-spec string.  Replications are
    processed in fixed-size chunks; the output depends only on the seed and
    never on ``config.threads``.
    """
    if isinstance(policy, str):
        from .policies import make_policy

        policy = make_policy(policy, horizon=config.horizon)
    cfg = config
    bounds = [range(lo, min(lo + CHUNK_SIZE, cfg.replications)) for lo in range(0, cfg.replications, CHUNK_SIZE)]
    if cfg.threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(lambda b: _run_chunk(policy.spawn(), cfg, b), bounds))
    else:
        parts = [_run_chunk(policy.spawn(), cfg, b) for b in bounds]

    means = np.concatenate([p[0] for p in parts])
    arms = np.concatenate([p[1] for p in parts])
    rewards = np.concatenate([p[2] for p in parts])
    n = cfg.n_arms
    counts = np.stack([(arms == i).sum(axis=1) for i in range(n)], axis=1)
    gaps = means.max(axis=1, keepdims=True) - means
    return ExperimentResult(
        config=cfg,
        policy=policy.name,
        alpha=parts[0][3],
        means=means,
        total_rewards=rewards.sum(axis=1, dtype=np.int64).astype(float),
        regrets=(gaps * counts).sum(axis=1),
        counts=counts,
        arms=arms if cfg.keep_trajectories else None,
        rewards=rewards if cfg.keep_trajectories else None,
    )
