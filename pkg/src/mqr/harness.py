"""Policy comparisons with common random numbers.

Every policy runs on the same replication streams, so replication ``r`` sees
the same instance and the same reward for the j-th pull of each arm under
all policies.  Differences are taken replication by replication, which is
what makes the small large-T gaps measurable.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .bandit import ExperimentConfig, ExperimentResult, run_experiment
from .estimation import build_choice_data, estimate_alpha
from .policies import AlphaCurveParams, MQRPolicy, make_policy

__all__ = [
    "LOG_GRID",
    "FULL_LOG_GRID",
    "log_grid",
    "DiffRow",
    "Comparison",
    "compare_policies",
    "ols_slope",
    "Diagnosis",
    "diagnose_policy",
]


def log_grid(exponents: Sequence[int]) -> list[int]:
    """Horizons ``round(e^x)``."""
    return [int(round(math.exp(x))) for x in exponents]


LOG_GRID = log_grid(range(4, 8))  # 55, 148, 403, 1097
FULL_LOG_GRID = log_grid(range(4, 10))  # adds 2981, 8103


@dataclass
class DiffRow:
    policy_a: str
    policy_b: str
    T: int
    diff: float
    se: float
    log_T: float
    log_diff: float | None  # None when diff <= 0
    negative: bool


@dataclass
class Comparison:
    results: dict[tuple[str, int], ExperimentResult]
    diffs: list[DiffRow]
    slopes: dict[str, float] = field(default_factory=dict)  # per challenger, OLS of log_diff on log_T

    def long_rows(self):
        for (spec, T), res in self.results.items():
            yield spec, T, res.policy, res.alpha, res.mean_reward, res.se_reward, res.mean_regret, res.se_regret

    def write_long(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "T", "policy_name", "alpha", "mean_reward", "se", "mean_regret", "se_regret"])
        for spec, T, name, alpha, mr, se, mg, seg in self.long_rows():
            w.writerow([spec, T, name, "" if alpha is None else repr(float(alpha)), repr(mr), repr(se), repr(mg), repr(seg)])

    def write_diffs(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy_a", "policy_b", "T", "diff", "se", "log_T", "log_diff", "negative", "slope"])
        for d in self.diffs:
            slope = self.slopes.get(d.policy_b)
            w.writerow(
                [
                    d.policy_a,
                    d.policy_b,
                    d.T,
                    repr(d.diff),
                    repr(d.se),
                    repr(d.log_T),
                    "" if d.log_diff is None else repr(d.log_diff),
                    int(d.negative),
                    "" if slope is None or math.isnan(slope) else repr(slope),
                ]
            )


def ols_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


def compare_policies(
    specs: Sequence[str],
    horizons: Sequence[int],
    reps: int,
    seed: int = 0,
    n_arms: int = 2,
    threads: int = 1,
    curve: AlphaCurveParams | None = None,
) -> Comparison:
    """Run every policy at every horizon; differences are ``specs[0]`` minus each other policy.

    The slope per challenger uses only horizons with a positive difference.
    """
    if len(specs) < 2:
        raise ValueError("compare needs at least two policies")
    results: dict[tuple[str, int], ExperimentResult] = {}
    for T in horizons:
        cfg = ExperimentConfig(n_arms=n_arms, horizon=int(T), replications=reps, seed=seed, threads=threads)
        for spec in specs:
            results[(spec, int(T))] = run_experiment(make_policy(spec, horizon=int(T), curve=curve), cfg)

    ref = specs[0]
    diffs = []
    slopes = {}
    for other in specs[1:]:
        xs, ys = [], []
        for T in horizons:
            d = results[(ref, int(T))].total_rewards - results[(other, int(T))].total_rewards
            mean = float(d.mean())
            se = float(d.std(ddof=1) / math.sqrt(len(d))) if len(d) > 1 else math.nan
            neg = not mean > 0
            log_d = None if neg else math.log(mean)
            diffs.append(DiffRow(ref, other, int(T), mean, se, math.log(T), log_d, neg))
            if log_d is not None:
                xs.append(math.log(T))
                ys.append(log_d)
        slopes[other] = ols_slope(xs, ys)
    return Comparison(results, diffs, slopes)


@dataclass
class Diagnosis:
    """One row of a "which alpha does this policy behave like" table.

    ``gap`` compares the policy itself with the Bayes-optimal value;
    ``replay_gap`` compares Gaussian MQR run at the estimated alpha instead.
    Both are ``(V(T) - mean reward) / V(T)``.
    """

    policy: str
    T: int
    reps: int
    alpha_hat: float
    bo_value: float
    mean_reward: float
    se_reward: float
    gap: float
    replay_mean_reward: float
    replay_gap: float
    n_clamped: int

    def record(self) -> dict:
        return dict(self.__dict__)


def diagnose_policy(spec: str, T: int, reps: int = 1000, seed: int = 0, threads: int = 1, table=None) -> Diagnosis:
    """Simulate ``spec`` on two arms, estimate its alpha and score both gap readings."""
    from .bayes_opt import solve_bayes_optimal

    if table is None or table.horizon != T:
        table = solve_bayes_optimal(T)
    cfg = ExperimentConfig(n_arms=2, horizon=T, replications=reps, seed=seed, keep_trajectories=True, threads=threads)
    res = run_experiment(make_policy(spec, horizon=T, table=table if spec == "bayes-opt" else None), cfg)
    fit = estimate_alpha(build_choice_data(res.trajectories()))
    replay_cfg = ExperimentConfig(n_arms=2, horizon=T, replications=reps, seed=seed, threads=threads)
    replay = run_experiment(MQRPolicy(fit.alpha_hat), replay_cfg)
    v = table.root_value
    return Diagnosis(
        policy=spec,
        T=T,
        reps=reps,
        alpha_hat=fit.alpha_hat,
        bo_value=v,
        mean_reward=res.mean_reward,
        se_reward=res.se_reward,
        gap=(v - res.mean_reward) / v,
        replay_mean_reward=replay.mean_reward,
        replay_gap=(v - replay.mean_reward) / v,
        n_clamped=fit.n_clamped,
    )
