"""Exact finite-horizon Bayes-optimal policy for the two-armed Beta(1,1)-Bernoulli bandit.

Posterior states at stage ``t`` have exactly ``n = t - 1`` pulls, so a state
is determined by ``(s1, f1, s2)`` with ``f2 = n - s1 - f1 - s2``.  Each stage is
stored as flat arrays over the ``C(n+3, 3)`` valid states in lexicographic
``(s1, f1, s2)`` order; :func:`state_rank` maps a state to its slot.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .bandit import Policy
from .errors import HorizonTooLargeError, StageOutOfRangeError, UnreachableStateError

__all__ = [
    "MAX_HORIZON",
    "PosteriorState",
    "DPTable",
    "state_rank",
    "solve_bayes_optimal",
    "bo_choose",
    "bo_value",
    "BayesOptPolicy",
    "save_table",
    "load_table",
]

MAX_HORIZON = 200
CACHE_MAGIC = b"MQRBODP\x00"
CACHE_VERSION = 1


class PosteriorState(NamedTuple):
    s1: int
    f1: int
    s2: int
    f2: int

    @property
    def pulls(self) -> int:
        return self.s1 + self.f1 + self.s2 + self.f2


def _n_states(n):
    return (n + 1) * (n + 2) * (n + 3) // 6


def state_rank(n, s1, f1, s2):
    """Slot of ``(s1, f1, s2)`` among the stage-``n`` states (vectorized)."""
    m = n - s1
    return _n_states(n) - (m + 1) * (m + 2) * (m + 3) // 6 + f1 * (m + 1) - f1 * (f1 - 1) // 2 + s2


@dataclass
class DPTable:
    """Solved value-to-go and optimal action for every reachable state.

    ``values[t-1]`` and ``actions[t-1]`` hold stage ``t``; actions are 0 for
    arm 1 and 1 for arm 2.
    """

    horizon: int
    values: list[np.ndarray]
    actions: list[np.ndarray]

    @property
    def root_value(self) -> float:
        return float(self.values[0][0])

    def _slot(self, t, s1, f1, s2, f2):
        if not 1 <= t <= self.horizon:
            raise StageOutOfRangeError(f"stage {t} outside 1..{self.horizon}")
        s1, f1, s2, f2 = (np.asarray(v, dtype=np.int64) for v in (s1, f1, s2, f2))
        n = t - 1
        if np.any((s1 < 0) | (f1 < 0) | (s2 < 0) | (f2 < 0)) or np.any(s1 + f1 + s2 + f2 != n):
            raise UnreachableStateError(f"state does not have {n} pulls at stage {t}")
        return state_rank(n, s1, f1, s2)

    def value(self, t: int, state) -> float:
        slot = self._slot(t, *state)
        return float(self.values[t - 1][slot])

    def action(self, t: int, state) -> int:
        slot = self._slot(t, *state)
        return int(self.actions[t - 1][slot])

    def all_states(self, t: int) -> np.ndarray:
        """Rows ``(s1, f1, s2, f2)`` of stage ``t`` in storage order."""
        n = t - 1
        s1, f1, s2 = np.nonzero(_valid_mask(n))
        return np.stack([s1, f1, s2, n - s1 - f1 - s2], axis=1)


def _valid_mask(n):
    i = np.arange(n + 1)
    return (i[:, None, None] + i[None, :, None] + i[None, None, :]) <= n


def solve_bayes_optimal(horizon: int, max_horizon: int = MAX_HORIZON) -> DPTable:
    """Backward induction over posterior states.

    ``V_t = max_i p_i (1 + V_{t+1}(success_i)) + (1 - p_i) V_{t+1}(failure_i)``
    with posterior means ``p_i = (s_i + 1) / (s_i + f_i + 2)``.  Ties go to arm 1.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if horizon > max_horizon:
        raise HorizonTooLargeError(f"horizon {horizon} exceeds the solver bound {max_horizon}")
    values: list[np.ndarray] = [None] * horizon  # type: ignore[list-item]
    actions: list[np.ndarray] = [None] * horizon  # type: ignore[list-item]
    nxt = np.zeros((horizon + 1,) * 3)  # terminal stage, all zeros
    for t in range(horizon, 0, -1):
        n = t - 1
        i = np.arange(n + 1, dtype=float)
        s1 = i[:, None, None]
        f1 = i[None, :, None]
        s2 = i[None, None, :]
        n2 = n - s1 - f1  # pulls of arm 2
        mask = _valid_mask(n)
        p1 = (s1 + 1.0) / (s1 + f1 + 2.0)
        # clamp n2 so invalid cells (masked out below) stay finite
        p2 = (s2 + 1.0) / (np.maximum(n2, 0.0) + 2.0)
        stay = nxt[: n + 1, : n + 1, : n + 1]
        q1 = p1 * (1.0 + nxt[1 : n + 2, : n + 1, : n + 1]) + (1.0 - p1) * nxt[: n + 1, 1 : n + 2, : n + 1]
        # arm-2 failure leaves (s1, f1, s2) unchanged; f2 is implied by the stage
        q2 = p2 * (1.0 + nxt[: n + 1, : n + 1, 1 : n + 2]) + (1.0 - p2) * stay
        act = q2 > q1
        v = np.where(act, q2, q1)
        v[~mask] = 0.0
        values[n] = v[mask]
        actions[n] = act[mask].astype(np.uint8)
        nxt = v
    return DPTable(horizon, values, actions)


def bo_value(table: DPTable) -> float:
    return table.root_value


def bo_choose(table: DPTable, state, t: int) -> int:
    """Stored optimal arm (0-based) for ``state = (s1, f1, s2, f2)`` at stage ``t``."""
    return table.action(t, state)


class BayesOptPolicy(Policy):
    """Replays a solved :class:`DPTable`; requires 0/1 rewards and two arms."""

    name = "bayes-opt"

    def __init__(self, table: DPTable):
        self.table = table

    def reset(self, n_arms, horizon, batch=1):
        if n_arms != 2:
            raise ValueError("the Bayes-optimal policy is solved for two arms only")
        # a table for another horizon would act with the wrong number of remaining pulls
        if horizon != self.table.horizon:
            raise ValueError(f"table solved for T={self.table.horizon}, episode has T={horizon}")
        super().reset(n_arms, horizon, batch)

    def choose(self, t, u):
        k = self.counts
        s = self.sums.astype(np.int64)
        slot = state_rank(t - 1, s[:, 0], k[:, 0] - s[:, 0], s[:, 1])
        return self.table.actions[t - 1][slot].astype(np.int64)


# --------------------------------------------------------------------------
# binary cache
# --------------------------------------------------------------------------

_HEADER = struct.Struct("<8sII")


def save_table(table: DPTable, path) -> None:
    """Header ``(magic, version, T)`` then, per stage, float64 values and uint8 actions (little-endian)."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, table.horizon))
        for v, a in zip(table.values, table.actions):
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(a, dtype=np.uint8).tobytes())


def load_table(path) -> DPTable:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated DP cache")
    magic, version, horizon = _HEADER.unpack_from(data)
    if magic != CACHE_MAGIC or version != CACHE_VERSION:
        raise ValueError(f"{path}: not a DP cache (magic={magic!r}, version={version})")
    offset = _HEADER.size
    values, actions = [], []
    for n in range(horizon):
        m = _n_states(n)
        if offset + 9 * m > len(data):
            raise ValueError(f"{path}: truncated DP cache at stage {n + 1}")
        values.append(np.frombuffer(data, dtype="<f8", count=m, offset=offset).astype(float))
        offset += 8 * m
        actions.append(np.frombuffer(data, dtype=np.uint8, count=m, offset=offset).copy())
        offset += m
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes in DP cache")
    return DPTable(horizon, values, actions)
