"""Noise distributions, seeded random streams and Gauss-Legendre quadrature.

Every random draw in the package goes through an :class:`RngStream`, which is
keyed by ``(seed, stream)`` so that each replication owns an independent,
reproducible sequence no matter how replications are scheduled.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import InvalidIntervalError

__all__ = [
    "NoiseKind",
    "NoiseSpec",
    "GAUSSIAN",
    "GUMBEL",
    "RngStream",
    "gaussian_cdf",
    "gaussian_sample",
    "gumbel_cdf",
    "gumbel_ppf",
    "gumbel_sample",
    "noise_moments",
    "Assumption1Report",
    "check_assumption1",
    "default_assumption_grid",
    "gauss_legendre",
    "integrate",
]

EULER_GAMMA = 0.57721566490153286061
U_MIN = 2.0**-53
U_MAX = 1.0 - 2.0**-53
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_MAX_U64 = 2**64


# --------------------------------------------------------------------------
# random streams
# --------------------------------------------------------------------------


class RngStream:
    """Reproducible random stream identified by ``(seed, stream)``.

    ``stream`` is usually the replication index.  Sub-streams for distinct
    purposes (instance draw, rewards, policy noise) are obtained with
    :meth:`child`; they are statistically independent of each other and of
    every other ``(seed, stream)`` pair.
    """

    __slots__ = ("seed", "stream", "path", "_gen")

    def __init__(self, seed: int, stream: int = 0, path: tuple[int, ...] = ()):
        for name, value in (("seed", seed), ("stream", stream)):
            if not 0 <= int(value) < _MAX_U64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")
        self.seed = int(seed)
        self.stream = int(stream)
        self.path = tuple(int(p) for p in path)
        self._gen: np.random.Generator | None = None

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream}, path={self.path})"

    @property
    def key(self) -> tuple:
        return (self.seed, self.stream, self.path)

    def child(self, purpose: int) -> "RngStream":
        return RngStream(self.seed, self.stream, self.path + (int(purpose),))

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,) + self.path)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def uniform(self, size=None):
        """Uniform(0, 1) draws clamped into ``[2**-53, 1 - 2**-53]``."""
        u = self.generator.random(size)
        return np.clip(u, U_MIN, U_MAX)


# --------------------------------------------------------------------------
# Gaussian and Gumbel
# --------------------------------------------------------------------------


def gaussian_cdf(x):
    """Standard normal CDF (complementary-error-function based)."""
    return special.ndtr(x)


def gaussian_ppf(u):
    return special.ndtri(u)


def gaussian_sample(rng: RngStream, size=None):
    """Standard normal draws by inverse-CDF transform of clamped uniforms."""
    return special.ndtri(rng.uniform(size))


def gumbel_cdf(x):
    """CDF of the standard Gumbel (max) law, ``exp(-exp(-x))``."""
    return np.exp(-np.exp(-np.asarray(x, dtype=float)))


def gumbel_ppf(u):
    u = np.clip(np.asarray(u, dtype=float), U_MIN, U_MAX)
    return -np.log(-np.log(u))


def gumbel_sample(rng: RngStream, size=None):
    return gumbel_ppf(rng.uniform(size))


class NoiseKind(enum.Enum):
    GAUSSIAN = "gaussian"
    GUMBEL = "gumbel"


@dataclass(frozen=True)
class NoiseSpec:
    """One of the two shipped noise laws: standard Gaussian or standard Gumbel."""

    kind: NoiseKind

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        try:
            return cls(NoiseKind(text.strip().lower()))
        except ValueError:
            raise ValueError(f"unknown noise kind {text!r}; expected 'gaussian' or 'gumbel'") from None

    @property
    def name(self) -> str:
        return self.kind.value

    def cdf(self, x):
        if self.kind is NoiseKind.GAUSSIAN:
            return gaussian_cdf(x)
        return gumbel_cdf(x)

    def logcdf(self, x):
        if self.kind is NoiseKind.GAUSSIAN:
            return special.log_ndtr(x)
        return -np.exp(-np.asarray(x, dtype=float))

    def logsf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is NoiseKind.GAUSSIAN:
            return special.log_ndtr(-x)
        return np.log(-np.expm1(-np.exp(-x)))

    def ppf(self, u):
        """Inverse CDF; maps uniforms to noise draws."""
        if self.kind is NoiseKind.GAUSSIAN:
            return gaussian_ppf(u)
        return gumbel_ppf(u)

    def sample(self, rng: RngStream, size=None):
        return self.ppf(rng.uniform(size))

    def moments(self) -> tuple[float, float]:
        return noise_moments(self)


GAUSSIAN = NoiseSpec(NoiseKind.GAUSSIAN)
GUMBEL = NoiseSpec(NoiseKind.GUMBEL)


def noise_moments(spec: NoiseSpec) -> tuple[float, float]:
    """Return ``(mean, standard deviation)`` of the noise law."""
    if spec.kind is NoiseKind.GAUSSIAN:
        return 0.0, 1.0
    return EULER_GAMMA, math.pi / math.sqrt(6.0)


# --------------------------------------------------------------------------
# tail conditions on the noise CDF
# --------------------------------------------------------------------------


@dataclass
class Assumption1Report:
    """Outcome of the three tail/moment conditions on a noise CDF.

    Each violation is a tuple ``(condition, x, lhs, rhs)`` where the
    condition required ``lhs <= rhs``.
    """

    name: str
    n_points: int
    mean: float | None = None
    std: float | None = None
    violations: list[tuple[int, float, float, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def default_assumption_grid(upper: float = 40.0, step: float = 0.01) -> np.ndarray:
    n = int(round(upper / step))
    return np.arange(n + 1) * step


def _anti_concentration_bound(x):
    # (1/sqrt(2 pi)) * x / (x^2 + 1) * exp(-x^2 / 2)
    return x / (x * x + 1.0) * np.exp(-0.5 * x * x) / _SQRT_2PI


def check_assumption1(spec, grid=None) -> Assumption1Report:
    """Check the noise-tail conditions on a grid of nonnegative points.

    Condition 1: ``F(x) <= 1 - x/(x^2+1) * exp(-x^2/2) / sqrt(2 pi)`` for x >= 0.
    Condition 2: ``F(-x) <= exp(-x^2/2) / 2`` for x >= 8.
    Condition 3: mean >= 0 and finite standard deviation.

    ``spec`` is a :class:`NoiseSpec` or any callable CDF.  For a shipped
    NoiseSpec both sides are compared in log space so that the far tails are
    not lost to rounding against 1.
    """
    x = default_assumption_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any(x < 0):
        raise ValueError("grid values must be nonnegative")
    report = Assumption1Report(name=getattr(spec, "name", getattr(spec, "__name__", "cdf")), n_points=x.size)
    bound1 = _anti_concentration_bound(x)
    tail = x >= 8.0
    bound2 = 0.5 * np.exp(-0.5 * x * x)

    if isinstance(spec, NoiseSpec):
        with np.errstate(divide="ignore"):
            # analytic log of the bound; exp(-x^2/2) goes subnormal near x = 38
            log_bound1 = np.log(x) - np.log1p(x * x) - 0.5 * x * x - math.log(_SQRT_2PI)
            bad1 = spec.logsf(x) < log_bound1
            bad2 = tail & (spec.logcdf(-x) > math.log(0.5) - 0.5 * x * x)
        cdf = spec.cdf
        report.mean, report.std = spec.moments()
    else:
        cdf = spec
        bad1 = np.asarray(cdf(x)) > 1.0 - bound1
        bad2 = tail & (np.asarray(cdf(-x)) > bound2)

    for xi in x[bad1]:
        report.violations.append((1, float(xi), float(cdf(xi)), float(1.0 - _anti_concentration_bound(xi))))
    for xi in x[bad2]:
        report.violations.append((2, float(xi), float(cdf(-xi)), float(0.5 * math.exp(-0.5 * xi * xi))))
    if report.mean is not None:
        if not report.mean >= 0.0:
            report.violations.append((3, math.nan, report.mean, 0.0))
        if not math.isfinite(report.std):
            report.violations.append((3, math.nan, report.std, math.inf))
    return report


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------


@lru_cache(maxsize=64)
def gauss_legendre(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]; exact for polynomials of degree 2n-1."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be positive")
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def integrate(f, lo: float, hi: float, n_nodes: int = 32) -> float:
    """Fixed-node Gauss-Legendre quadrature of ``f`` over ``[lo, hi]``.

    ``f`` must accept a numpy array of abscissae.
    """
    if not lo < hi:
        raise InvalidIntervalError(f"need lo < hi, got [{lo}, {hi}]")
    if n_nodes < 2:
        raise ValueError("n_nodes must be at least 2")
    nodes, weights = gauss_legendre(n_nodes)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    values = np.asarray(f(mid + half * nodes), dtype=float)
    if values.shape == ():
        values = np.full(n_nodes, float(values))
    return float(half * np.dot(weights, values))
