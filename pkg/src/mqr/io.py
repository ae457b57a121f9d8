"""Line-delimited trajectory files and summary CSVs.

A trajectory file is UTF-8 JSON Lines.  Every trajectory starts with a header

    {"traj_id": 0, "n_arms": 2, "T": 3, "policy": "ts-beta", "alpha": null,
     "seed": 7, "stream": 0, "means": [0.41, 0.87]}

followed by exactly ``T`` step records ``{"traj_id": 0, "t": 1, "arm": 2,
"reward": 1}`` with ``t`` running 1..T and 1-based arms.
"""
from __future__ import annotations

import csv
import json
import math
from typing import IO, Iterable, Iterator

import numpy as np

from .bandit import BanditInstance, ExperimentResult, Trajectory
from .errors import MalformedTrajectoryError

__all__ = [
    "write_trajectories",
    "read_trajectories",
    "iter_trajectories",
    "SUMMARY_COLUMNS",
    "write_summary",
]

_HEADER_KEYS = {"traj_id", "n_arms", "T", "policy", "alpha", "seed", "stream", "means"}
_STEP_KEYS = {"traj_id", "t", "arm", "reward"}


def _fmt_reward(r: float) -> str:
    return str(int(r)) if float(r).is_integer() else repr(float(r))


def write_trajectories(trajs: Iterable[Trajectory], fh: IO[str]) -> int:
    """Write trajectories in order; returns the number written."""
    n = 0
    for traj_id, traj in enumerate(trajs):
        header = {
            "traj_id": traj_id,
            "n_arms": traj.n_arms,
            "T": traj.horizon,
            "policy": traj.policy,
            "alpha": None if traj.alpha is None else float(traj.alpha),
            "seed": int(traj.seed),
            "stream": int(traj.stream),
            "means": [float(m) for m in traj.instance.means],
        }
        fh.write(json.dumps(header) + "\n")
        # step lines are formatted by hand; json.dumps per step dominates runtime otherwise
        fh.writelines(
            f'{{"traj_id": {traj_id}, "t": {t}, "arm": {a + 1}, "reward": {_fmt_reward(r)}}}\n'
            for t, (a, r) in enumerate(zip(traj.arms.tolist(), traj.rewards.tolist()), 1)
        )
        n += 1
    return n


def _int_field(rec, key, lineno):
    v = rec.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise MalformedTrajectoryError(f"field {key!r} must be an integer, got {v!r}", lineno)
    return v


def iter_trajectories(fh: IO[str]) -> Iterator[Trajectory]:
    """Stream trajectories, validating structure as it goes."""
    header = None
    header_line = 0
    arms: list[int] = []
    rewards: list[float] = []

    def finish():
        if len(arms) != header["T"]:
            raise MalformedTrajectoryError(
                f"trajectory {header['traj_id']} has {len(arms)} steps, header says T={header['T']}", header_line
            )
        return Trajectory(
            instance=BanditInstance(tuple(header["means"])),
            policy=header["policy"],
            arms=np.asarray(arms, dtype=np.int64) - 1,
            rewards=np.asarray(rewards, dtype=float),
            alpha=header["alpha"],
            seed=header["seed"],
            stream=header["stream"],
        )

    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedTrajectoryError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(rec, dict):
            raise MalformedTrajectoryError("record is not an object", lineno)
        keys = set(rec)
        if "means" in keys or "n_arms" in keys:
            missing = _HEADER_KEYS - keys
            if missing:
                raise MalformedTrajectoryError(f"header missing {sorted(missing)}", lineno)
            if header is not None:
                yield finish()
            for key in ("traj_id", "n_arms", "T", "seed", "stream"):
                _int_field(rec, key, lineno)
            if rec["n_arms"] < 1 or rec["T"] < 0:
                raise MalformedTrajectoryError("n_arms must be >= 1 and T >= 0", lineno)
            means = rec["means"]
            if not isinstance(means, list) or len(means) != rec["n_arms"]:
                raise MalformedTrajectoryError("means must list one value per arm", lineno)
            alpha = rec["alpha"]
            if alpha is not None and not isinstance(alpha, (int, float)):
                raise MalformedTrajectoryError(f"alpha must be a number or null, got {alpha!r}", lineno)
            try:
                BanditInstance(tuple(float(m) for m in means))
            except (TypeError, ValueError) as exc:
                raise MalformedTrajectoryError(f"bad means: {exc}", lineno) from None
            header, header_line = rec, lineno
            arms, rewards = [], []
            continue

        if keys != _STEP_KEYS:
            raise MalformedTrajectoryError(f"step record must have exactly {sorted(_STEP_KEYS)}", lineno)
        if header is None:
            raise MalformedTrajectoryError("step record before any header", lineno)
        if _int_field(rec, "traj_id", lineno) != header["traj_id"]:
            raise MalformedTrajectoryError(
                f"step for traj_id {rec['traj_id']} inside trajectory {header['traj_id']}", lineno
            )
        t = _int_field(rec, "t", lineno)
        if t != len(arms) + 1:
            raise MalformedTrajectoryError(f"expected t={len(arms) + 1}, got t={t}", lineno)
        if t > header["T"]:
            raise MalformedTrajectoryError(f"t={t} exceeds T={header['T']}", lineno)
        arm = _int_field(rec, "arm", lineno)
        if not 1 <= arm <= header["n_arms"]:
            raise MalformedTrajectoryError(f"arm {arm} outside 1..{header['n_arms']}", lineno)
        reward = rec["reward"]
        if isinstance(reward, bool) or reward not in (0, 1):
            raise MalformedTrajectoryError(f"reward must be 0 or 1, got {reward!r}", lineno)
        arms.append(arm)
        rewards.append(float(reward))

    if header is not None:
        yield finish()


def read_trajectories(path) -> list[Trajectory]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_trajectories(fh))


SUMMARY_COLUMNS = ["T", "policy", "mean_reward", "mean_regret", "se", "se_regret", "replications"]


def _num(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_summary(results: Iterable[ExperimentResult], fh: IO[str]) -> None:
    """One row per result; ``se`` is the standard error of the mean reward."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for res in results:
        writer.writerow(
            [
                res.config.horizon,
                res.policy,
                _num(res.mean_reward),
                _num(res.mean_regret),
                _num(res.se_reward),
                _num(res.se_regret),
                res.replications,
            ]
        )
