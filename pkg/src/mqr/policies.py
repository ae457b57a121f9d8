"""Myopic quantal response (MQR) policies and the baselines they are compared with.

The stand-alone ``*_choose`` functions act on one state (or a stack of
identical decisions when ``size`` is given) and are what the property tests
exercise.  The :class:`~mqr.bandit.Policy` subclasses below run the same
decision rules over a batch of episodes; both paths turn uniforms into noise
through the same inverse-CDF transforms.

Arm indices returned here are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .bandit import Policy
from .errors import NonPositiveAlphaError, UnknownPolicyError
from .stats_dist import GAUSSIAN, NoiseKind, NoiseSpec, RngStream

__all__ = [
    "MQRParams",
    "AlphaCurveParams",
    "PAPER_CURVE",
    "mqr_beta",
    "mqr_choose",
    "ts_gaussian_choose",
    "ts_beta_bernoulli_choose",
    "ucb1_choose",
    "alpha_star",
    "MQRPolicy",
    "TSGaussianPolicy",
    "TSBetaPolicy",
    "UCB1Policy",
    "UCB1TunedPolicy",
    "make_policy",
]


@dataclass(frozen=True)
class MQRParams:
    alpha: float
    noise: NoiseSpec = GAUSSIAN

    def __post_init__(self):
        if not self.alpha > 0:
            raise NonPositiveAlphaError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class AlphaCurveParams:
    """Parameters of the horizon schedule ``alpha*(T) = exp(a * T**b + c) + 0.5``."""

    a: float
    b: float
    c: float

    def __call__(self, T):
        return alpha_star(T, self)


PAPER_CURVE = AlphaCurveParams(a=2.741, b=-0.2215, c=-1.436)


def mqr_beta(k, alpha: float):
    """Exploration scale ``(k + 1) ** -alpha``."""
    if not alpha > 0:
        raise NonPositiveAlphaError(f"alpha must be positive, got {alpha}")
    return np.power(np.asarray(k, dtype=float) + 1.0, -alpha)


def alpha_star(T, params: AlphaCurveParams = PAPER_CURVE):
    T = np.asarray(T, dtype=float)
    if np.any(T < 1):
        raise ValueError("horizon must be >= 1")
    out = np.exp(params.a * T**params.b + params.c) + 0.5
    return float(out) if out.ndim == 0 else out


def _argmax(theta: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. lowest-index tie-breaking
    out = np.argmax(theta, axis=-1)
    return int(out) if out.ndim == 0 else out


def _shape(size, n_arms):
    if size is None:
        return (n_arms,)
    if isinstance(size, int):
        return (size, n_arms)
    return tuple(size) + (n_arms,)


def mqr_choose(mu_hat, k, params: MQRParams, rng: RngStream, size=None):
    """Play ``argmax_i mu_hat_i + eps_i * (k_i + 1) ** -alpha``.

    With ``size`` the decision is repeated independently ``size`` times from
    the same state and an array of choices is returned.
    """
    mu_hat = np.asarray(mu_hat, dtype=float)
    if mu_hat.shape[-1] < 2:
        raise ValueError("need at least two arms")
    eps = params.noise.ppf(rng.uniform(_shape(size, mu_hat.shape[-1])))
    return _argmax(mu_hat + eps * mqr_beta(k, params.alpha))


def ts_gaussian_choose(mu_hat, k, rng: RngStream, size=None):
    """Thompson draw from ``N(mu_hat_i, 1 / (k_i + 1))`` per arm."""
    mu_hat = np.asarray(mu_hat, dtype=float)
    sd = np.sqrt(1.0 / (np.asarray(k, dtype=float) + 1.0))
    z = special.ndtri(rng.uniform(_shape(size, mu_hat.shape[-1])))
    return _argmax(mu_hat + sd * z)


def ts_beta_bernoulli_choose(successes, failures, rng: RngStream, size=None):
    """Thompson draw from ``Beta(s_i + 1, f_i + 1)`` per arm."""
    s = np.asarray(successes, dtype=float)
    f = np.asarray(failures, dtype=float)
    u = rng.uniform(_shape(size, s.shape[-1]))
    return _argmax(special.betaincinv(s + 1.0, f + 1.0, u))


def ucb1_choose(counts, sums, t: int) -> int:
    """UCB1 index ``sum/k + sqrt(2 ln t / k)``; unpulled arms first."""
    if t < 1:
        raise ValueError("t must be >= 1")
    counts = np.asarray(counts, dtype=float)
    sums = np.asarray(sums, dtype=float)
    unpulled = np.flatnonzero(counts == 0)
    if unpulled.size:
        return int(unpulled[0])
    index = sums / counts + np.sqrt(2.0 * math.log(t) / counts)
    return int(np.argmax(index))


# --------------------------------------------------------------------------
# batched policies
# --------------------------------------------------------------------------


class MQRPolicy(Policy):
    uses_noise = True

    def __init__(self, alpha: float | None, noise: NoiseSpec = GAUSSIAN, curve: AlphaCurveParams | None = None):
        """``alpha=None`` selects ``alpha_star(horizon, curve)`` at every reset."""
        if alpha is None and curve is None:
            curve = PAPER_CURVE
        if alpha is not None:
            MQRParams(alpha, noise)
        self.fixed_alpha = alpha
        self.curve = curve
        self.noise = noise
        self.alpha = alpha
        suffix = "auto" if alpha is None else f"{alpha:g}"
        self.name = f"mqr:{noise.name}:{suffix}"

    def reset(self, n_arms, horizon, batch=1):
        super().reset(n_arms, horizon, batch)
        if self.fixed_alpha is None:
            self.alpha = alpha_star(max(horizon, 1), self.curve)
        self._beta = mqr_beta(np.arange(horizon + 1), self.alpha)

    def choose(self, t, u):
        theta = self.mu_hat + self.noise.ppf(u) * self._beta[self.counts]
        return np.argmax(theta, axis=1)


class TSGaussianPolicy(Policy):
    name = "ts-gauss"
    uses_noise = True

    def choose(self, t, u):
        theta = self.mu_hat + special.ndtri(u) * np.sqrt(1.0 / (self.counts + 1.0))
        return np.argmax(theta, axis=1)


class TSBetaPolicy(Policy):
    """Beta(1, 1)-prior Thompson sampling; assumes 0/1 rewards."""

    name = "ts-beta"
    uses_noise = True

    def choose(self, t, u):
        s = self.sums
        f = self.counts - s
        return np.argmax(special.betaincinv(s + 1.0, f + 1.0, u), axis=1)


class UCB1Policy(Policy):
    name = "ucb1"

    def choose(self, t, u):
        if t <= self.n_arms:
            # forced initial round: every episode pulls arm t-1 at step t
            return np.full(self.batch, t - 1)
        counts = self.counts
        index = self.sums / counts + np.sqrt(2.0 * math.log(t) / counts)
        return np.argmax(index, axis=1)


class UCB1TunedPolicy(Policy):
    """UCB1-Tuned: the exploration bonus is capped by the arm's empirical variance.

    Index ``m + sqrt(ln t / k * min(1/4, v + sqrt(2 ln t / k)))`` with ``m`` the
    plain sample mean and ``v`` the sample variance of the arm's rewards.
    """

    name = "ucb1-tuned"

    def choose(self, t, u):
        if t <= self.n_arms:
            return np.full(self.batch, t - 1)
        k = self.counts
        m = self.sums / k
        v = np.maximum(self.sq_sums / k - m * m, 0.0)
        log_t = math.log(t)
        bonus = np.sqrt(log_t / k * np.minimum(0.25, v + np.sqrt(2.0 * log_t / k)))
        return np.argmax(m + bonus, axis=1)

    def reset(self, n_arms, horizon, batch=1):
        super().reset(n_arms, horizon, batch)
        self.sq_sums = np.zeros((batch, n_arms))

    def observe(self, arms, rewards):
        super().observe(arms, rewards)
        self.sq_sums[self._rows, arms] += np.asarray(rewards, dtype=float) ** 2


def make_policy(spec: str, horizon: int | None = None, curve: AlphaCurveParams | None = None, table=None) -> Policy:
    """Build a policy from a CLI spec string.

    Accepted forms: ``mqr:gaussian:ALPHA``, ``mqr:gumbel:ALPHA``,
    ``mqr:gaussian:auto``, ``ts-gauss``, ``ts-beta``, ``ucb1``, ``ucb1-tuned`` and
    ``bayes-opt``.  ``bayes-opt`` needs ``horizon`` (or a solved ``table``).
    """
    text = spec.strip().lower()
    if text == "ts-gauss":
        return TSGaussianPolicy()
    if text == "ts-beta":
        return TSBetaPolicy()
    if text == "ucb1":
        return UCB1Policy()
    if text == "ucb1-tuned":
        return UCB1TunedPolicy()
    if text == "bayes-opt":
        from .bayes_opt import BayesOptPolicy, solve_bayes_optimal

        if table is None:
            if horizon is None:
                raise UnknownPolicyError("bayes-opt needs a horizon")
            table = solve_bayes_optimal(horizon)
        return BayesOptPolicy(table)
    parts = text.split(":")
    if len(parts) == 3 and parts[0] == "mqr":
        try:
            noise = NoiseSpec(NoiseKind(parts[1]))
        except ValueError:
            raise UnknownPolicyError(f"unknown noise in policy spec {spec!r}") from None
        if parts[2] == "auto":
            if noise != GAUSSIAN:
                raise UnknownPolicyError("the auto schedule is defined for gaussian noise only")
            return MQRPolicy(None, noise, curve or PAPER_CURVE)
        try:
            alpha = float(parts[2])
        except ValueError:
            raise UnknownPolicyError(f"bad alpha in policy spec {spec!r}") from None
        return MQRPolicy(alpha, noise)
    raise UnknownPolicyError(f"unknown policy spec {spec!r}")
