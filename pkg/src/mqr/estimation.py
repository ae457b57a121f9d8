"""Maximum-likelihood estimation of the exploitation coefficient alpha.

Choices are modelled as Gaussian-noise MQR decisions: at every step the
observed arm is the argmax of ``mu_hat_i + eps_i * (k_i + 1) ** -alpha`` with
``eps_i ~ N(0, 1)``.  The estimator only reads arms and rewards; the arm
means stored alongside a trajectory are never touched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import special

from .bandit import Trajectory
from .errors import DegenerateLikelihoodError, EmptyDatasetError, MalformedTrajectoryError, NonPositiveAlphaError
from .stats_dist import gauss_legendre

__all__ = [
    "PROB_CLAMP",
    "ChoiceData",
    "LikelihoodResult",
    "reconstruct_states",
    "choice_prob_2",
    "choice_prob_n",
    "build_choice_data",
    "log_likelihood",
    "estimate_alpha",
]

PROB_CLAMP = 1e-12
_BREAK_OFFSETS = np.array([-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0])
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _check_alpha(alpha):
    if not alpha > 0:
        raise NonPositiveAlphaError(f"alpha must be positive, got {alpha}")


def reconstruct_states(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Information set before each decision.

    Returns ``(mu_hat, k)`` of shape ``(T, N)``; row ``t`` reflects steps
    ``1..t`` exclusive of ``t + 1`` (row 0 is all zeros).
    """
    arms = np.asarray(traj.arms, dtype=np.int64)
    rewards = np.asarray(traj.rewards, dtype=float)
    n = traj.n_arms
    if arms.ndim != 1 or arms.shape != rewards.shape:
        raise MalformedTrajectoryError("arms and rewards must be 1-D and of equal length")
    if arms.size and (arms.min() < 0 or arms.max() >= n):
        raise MalformedTrajectoryError(f"arm index outside 1..{n}")
    if np.any((rewards < 0) | (rewards > 1)):
        raise MalformedTrajectoryError("reward outside [0, 1]")
    onehot = arms[:, None] == np.arange(n)[None, :]
    k = np.cumsum(onehot, axis=0) - onehot
    sums = np.cumsum(onehot * rewards[:, None], axis=0) - onehot * rewards[:, None]
    return sums / (k + 1), k


def choice_prob_2(mu_hat, k, alpha: float):
    """Probability that arm 1 is chosen among two, ``Phi(dmu / sqrt(b1^2 + b2^2))``."""
    _check_alpha(alpha)
    mu_hat = np.asarray(mu_hat, dtype=float)
    k = np.asarray(k, dtype=float)
    b2 = np.power(k + 1.0, -2.0 * alpha)
    z = (mu_hat[..., 0] - mu_hat[..., 1]) / np.sqrt(b2[..., 0] + b2[..., 1])
    out = special.ndtr(z)
    return float(out) if out.ndim == 0 else out


def choice_prob_n(mu_hat, k, alpha: float, n_nodes: int = 10, chunk: int = 4096):
    """Choice probabilities for any number of arms by composite Gauss-Legendre.

    ``p_i = int phi((x - mu_i)/b_i)/b_i * prod_{j != i} Phi((x - mu_j)/b_j) dx``.
    Each ``p_i`` is integrated in arm i's standardized coordinate
    ``z = (x - mu_i) / b_i`` over ``[-8, 8]`` (inside the common window
    ``[min mu - 8 max b, max mu + 8 max b]``), split wherever another arm's
    standardized argument crosses ``{0, +-1, +-2, +-4, +-8}``.  Working in z
    keeps abscissae well conditioned when every ``b`` is tiny.
    """
    _check_alpha(alpha)
    mu_hat = np.asarray(mu_hat, dtype=float)
    shape = mu_hat.shape
    n_arms = shape[-1]
    if n_arms < 2:
        raise ValueError("need at least two arms")
    mu = mu_hat.reshape(-1, n_arms)
    beta = np.broadcast_to(np.power(np.asarray(k, dtype=float) + 1.0, -alpha), shape).reshape(-1, n_arms)
    out = np.empty_like(mu)
    nodes, weights = gauss_legendre(n_nodes)
    for lo_row in range(0, len(mu), chunk):
        sl = slice(lo_row, lo_row + chunk)
        for i in range(n_arms):
            out[sl, i] = _arm_prob(mu[sl], beta[sl], i, nodes, weights)
    return out.reshape(shape)


def _arm_prob(mu, beta, i, nodes, weights):
    others = [j for j in range(mu.shape[1]) if j != i]
    shift = (mu[:, i, None] - mu[:, others]) / beta[:, others]  # (B, N-1)
    ratio = beta[:, i, None] / beta[:, others]
    # z at which another arm's argument shift + ratio * z hits a cut offset
    cuts = ((_BREAK_OFFSETS - shift[:, :, None]) / ratio[:, :, None]).reshape(len(mu), -1)
    ends = np.full((len(mu), 1), 8.0)
    edges = np.concatenate([-ends, np.broadcast_to(_BREAK_OFFSETS, (len(mu), _BREAK_OFFSETS.size)), np.clip(cuts, -8.0, 8.0), ends], axis=1)
    edges = np.sort(edges, axis=1)
    half = 0.5 * np.diff(edges, axis=1)  # (B, P)
    z = 0.5 * (edges[:, 1:] + edges[:, :-1])[:, :, None] + half[:, :, None] * nodes  # (B, P, n)
    arg = shift[:, None, None, :] + ratio[:, None, None, :] * z[..., None]
    log_f = -0.5 * z * z - _LOG_SQRT_2PI + special.log_ndtr(arg).sum(axis=-1)
    return np.einsum("bpn,bpn->b", half[:, :, None] * weights, np.exp(log_f))


# --------------------------------------------------------------------------
# likelihood
# --------------------------------------------------------------------------


@dataclass
class ChoiceData:
    """Flattened decisions of a dataset: one row per (trajectory, step)."""

    n_arms: int
    mu_hat: np.ndarray  # (M, N)
    log_k1: np.ndarray  # (M, N), log(k + 1)
    chosen: np.ndarray  # (M,)
    n_trajectories: int

    @property
    def n_decisions(self) -> int:
        return len(self.chosen)

    def __post_init__(self):
        if self.n_arms == 2:
            rows = np.arange(len(self.chosen))
            other = 1 - self.chosen
            self._diff = self.mu_hat[rows, self.chosen] - self.mu_hat[rows, other]
            self._lc = self.log_k1[rows, self.chosen]
            self._lo = self.log_k1[rows, other]
        else:
            # early-episode states repeat across trajectories; integrate each distinct one once
            keys = np.concatenate([self.mu_hat, self.log_k1], axis=1)
            uniq, self._inverse = np.unique(keys, axis=0, return_inverse=True)
            self._inverse = self._inverse.reshape(-1)
            self._u_mu = uniq[:, : self.n_arms]
            self._u_k = np.rint(np.expm1(uniq[:, self.n_arms :]))

    def chosen_probs(self, alpha: float) -> np.ndarray:
        _check_alpha(alpha)
        if self.n_arms == 2:
            scale = np.sqrt(np.exp(-2.0 * alpha * self._lc) + np.exp(-2.0 * alpha * self._lo))
            return special.ndtr(self._diff / scale)
        probs = choice_prob_n(self._u_mu, self._u_k, alpha)
        return probs[self._inverse, self.chosen]


def build_choice_data(dataset: Iterable[Trajectory]) -> ChoiceData:
    mus, ks, chosen = [], [], []
    n_arms = None
    count = 0
    for traj in dataset:
        if n_arms is None:
            n_arms = traj.n_arms
        elif traj.n_arms != n_arms:
            raise MalformedTrajectoryError(f"mixed arm counts in dataset ({n_arms} vs {traj.n_arms})")
        mu, k = reconstruct_states(traj)
        mus.append(mu)
        ks.append(k)
        chosen.append(np.asarray(traj.arms, dtype=np.int64))
        count += 1
    if count == 0 or sum(len(c) for c in chosen) == 0:
        raise EmptyDatasetError("dataset has no decisions")
    return ChoiceData(
        n_arms=n_arms,
        mu_hat=np.concatenate(mus),
        log_k1=np.log1p(np.concatenate(ks).astype(float)),
        chosen=np.concatenate(chosen),
        n_trajectories=count,
    )


def _as_choice_data(data) -> ChoiceData:
    if isinstance(data, ChoiceData):
        return data
    if isinstance(data, Trajectory):
        data = [data]
    return build_choice_data(data)


def log_likelihood(data, alpha: float, return_clamped: bool = False):
    """Pooled log-likelihood ``sum log p(chosen arm)``, probabilities clamped to [1e-12, 1 - 1e-12]."""
    cd = _as_choice_data(data)
    p = cd.chosen_probs(alpha)
    clamped = int(np.count_nonzero((p < PROB_CLAMP) | (p > 1.0 - PROB_CLAMP)))
    ll = float(np.sum(np.log(np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP))))
    return (ll, clamped) if return_clamped else ll


@dataclass
class LikelihoodResult:
    alpha_hat: float
    log_likelihood: float
    evaluations: int
    bracket: tuple[float, float]
    n_clamped: int = 0
    n_trajectories: int = 0
    n_decisions: int = 0
    at_lower_bound: bool = False
    at_upper_bound: bool = False
    n_local_maxima: int = 1
    grid: np.ndarray = field(default=None, repr=False)
    grid_loglik: np.ndarray = field(default=None, repr=False)

    @property
    def unimodal(self) -> bool:
        return self.n_local_maxima == 1

    def record(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "loglik": self.log_likelihood,
            "n_trajectories": self.n_trajectories,
            "n_decisions": self.n_decisions,
            "n_clamped": self.n_clamped,
            "evaluations": self.evaluations,
            "bracket": list(self.bracket),
            "bracket_flags": {"at_lower": self.at_lower_bound, "at_upper": self.at_upper_bound},
            "n_local_maxima": self.n_local_maxima,
        }


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _count_local_maxima(values: np.ndarray) -> int:
    v = np.asarray(values)
    left = np.concatenate([[-np.inf], v[:-1]])
    right = np.concatenate([v[1:], [-np.inf]])
    return int(np.count_nonzero((v > left) & (v >= right)))


def estimate_alpha(
    data,
    bracket: tuple[float, float] = (0.01, 3.0),
    grid_step: float = 0.05,
    tol: float = 1e-4,
) -> LikelihoodResult:
    """Maximize the pooled likelihood over ``alpha`` in ``bracket``.

    A coarse grid locates the best cell, then golden-section search narrows
    it to width ``tol``.  A likelihood that is flat over the whole bracket
    raises :class:`DegenerateLikelihoodError`.
    """
    cd = _as_choice_data(data)
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket}")
    grid = lo + grid_step * np.arange(int(math.floor((hi - lo) / grid_step + 1e-9)) + 1)
    if hi - grid[-1] > 1e-9:
        grid = np.append(grid, hi)
    values = np.array([log_likelihood(cd, a) for a in grid])
    evaluations = len(grid)
    top = float(values.max())
    if top - float(values.min()) <= 1e-10 * max(1.0, abs(top)):
        raise DegenerateLikelihoodError("log-likelihood is flat over the search bracket")

    i = int(np.argmax(values))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    best_alpha, best_ll = float(grid[i]), float(values[i])

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = log_likelihood(cd, c), log_likelihood(cd, d)
    evaluations += 2
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = log_likelihood(cd, c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = log_likelihood(cd, d)
        evaluations += 1
    for x, fx in ((c, fc), (d, fd)):
        if fx > best_ll:
            best_alpha, best_ll = float(x), float(fx)

    ll, clamped = log_likelihood(cd, best_alpha, return_clamped=True)
    edge = grid_step
    return LikelihoodResult(
        alpha_hat=best_alpha,
        log_likelihood=ll,
        evaluations=evaluations,
        bracket=(float(lo), float(hi)),
        n_clamped=clamped,
        n_trajectories=cd.n_trajectories,
        n_decisions=cd.n_decisions,
        at_lower_bound=best_alpha - lo < edge and i == 0,
        at_upper_bound=hi - best_alpha < edge and i == len(grid) - 1,
        n_local_maxima=_count_local_maxima(values),
        grid=grid,
        grid_loglik=values,
    )
