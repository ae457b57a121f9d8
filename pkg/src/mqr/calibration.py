"""Horizon-dependent exploitation schedule learned from Bayes-optimal play.

Pipeline: for every training horizon, solve the Bayes-optimal policy, simulate
it, estimate the MQR-implied alpha, then fit ``alpha*(T) = exp(a T^b + c) + 0.5``
to the estimates by multi-start Nelder-Mead.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .bandit import ExperimentConfig, run_experiment
from .bayes_opt import BayesOptPolicy, solve_bayes_optimal
from .errors import NoConvergenceError, TooFewPointsError
from .estimation import build_choice_data, estimate_alpha
from .policies import PAPER_CURVE, AlphaCurveParams

__all__ = [
    "AlphaCurveParams",
    "PAPER_CURVE",
    "CalibrationPoint",
    "FitReport",
    "DEFAULT_TRAIN_GRID",
    "build_training_points",
    "fit_alpha_curve",
    "train_pipeline",
    "write_points",
    "read_points",
    "write_params",
    "read_params",
]

log = logging.getLogger(__name__)

DEFAULT_TRAIN_GRID = tuple(range(10, 151, 5))
B_MAX = -1e-6  # keeps the exponent strictly negative
_BOUNDS = [(-50.0, 50.0), (-5.0, B_MAX), (-30.0, 5.0)]
_START_BOX = [(0.5, 5.0), (-1.0, -0.05), (-3.0, 0.0)]


@dataclass(frozen=True)
class CalibrationPoint:
    T: int
    alpha_hat: float
    weight: float = 1.0

    def __post_init__(self):
        if self.T < 1 or not self.alpha_hat > 0 or not self.weight > 0:
            raise ValueError(f"invalid calibration point {self}")


@dataclass
class FitReport:
    sse: float
    iterations: int
    converged: bool
    starts: int
    b_at_bound: bool
    constant_sse: float


def build_training_points(
    T_grid: Sequence[int], reps: int = 1000, seed: int = 0, threads: int = 1
) -> list[CalibrationPoint]:
    """Estimate alpha from simulated Bayes-optimal play at every horizon in ``T_grid``."""
    points = []
    for T in T_grid:
        table = solve_bayes_optimal(int(T))
        res = run_experiment(
            BayesOptPolicy(table),
            ExperimentConfig(n_arms=2, horizon=int(T), replications=reps, seed=seed, keep_trajectories=True, threads=threads),
        )
        fit = estimate_alpha(build_choice_data(res.trajectories()))
        log.info("T=%d alpha_hat=%.4f", T, fit.alpha_hat)
        points.append(CalibrationPoint(int(T), fit.alpha_hat))
    return points


def _sse(theta, T, y, w):
    a, b, c = theta
    with np.errstate(over="ignore", invalid="ignore"):
        pred = np.exp(a * T**b + c) + 0.5
        val = float(np.sum(w * (pred - y) ** 2))
    return val if math.isfinite(val) else 1e300


def fit_alpha_curve(points: Sequence[CalibrationPoint], n_starts: int = 8, seed: int = 0):
    """Least-squares fit of ``exp(a T^b + c) + 0.5`` with ``b < 0``.

    Returns ``(AlphaCurveParams, FitReport)``.  Starts are drawn uniformly from
    ``a in [0.5, 5], b in [-1, -0.05], c in [-3, 0]``; the best converged
    minimum wins.
    """
    if len(points) < 4 or len({p.T for p in points}) < 3:
        raise TooFewPointsError("need at least 4 points over 3 distinct horizons")
    T = np.array([p.T for p in points], dtype=float)
    y = np.array([p.alpha_hat for p in points])
    w = np.array([p.weight for p in points])
    rng = np.random.default_rng(seed)
    starts = rng.uniform([lo for lo, _ in _START_BOX], [hi for _, hi in _START_BOX], size=(n_starts, 3))

    best = None
    iterations = 0
    for x0 in starts:
        res = minimize(
            _sse,
            x0,
            args=(T, y, w),
            method="Nelder-Mead",
            bounds=_BOUNDS,
            options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 40000, "maxfev": 80000, "adaptive": True},
        )
        iterations += res.nit
        if res.success and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise NoConvergenceError(f"no start out of {n_starts} converged")
    const = float(np.sum(w * (y - np.average(y, weights=w)) ** 2))
    a, b, c = (float(v) for v in best.x)
    report = FitReport(
        sse=float(best.fun),
        iterations=iterations,
        converged=True,
        starts=n_starts,
        b_at_bound=b >= B_MAX - 1e-12,
        constant_sse=const,
    )
    return AlphaCurveParams(a, b, c), report


def train_pipeline(
    T_train: Sequence[int] = DEFAULT_TRAIN_GRID,
    reps: int = 1000,
    seed: int = 0,
    out_dir=None,
    threads: int = 1,
):
    """Training points, then the curve fit; both are written to ``out_dir`` when given.

    Returns ``(params, points, report)``.
    """
    points = build_training_points(T_train, reps=reps, seed=seed, threads=threads)
    params, report = fit_alpha_curve(points)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_points(points, out / "points.csv")
        write_params(params, out / "params.txt", report)
    return params, points, report


# --------------------------------------------------------------------------
# plain-text persistence
# --------------------------------------------------------------------------


def write_points(points: Sequence[CalibrationPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["T", "alpha_hat", "weight"])
        for p in points:
            writer.writerow([p.T, repr(p.alpha_hat), repr(p.weight)])


def read_points(path) -> list[CalibrationPoint]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"T", "alpha_hat"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [
            CalibrationPoint(int(row["T"]), float(row["alpha_hat"]), float(row.get("weight") or 1.0))
            for row in reader
        ]


def write_params(params: AlphaCurveParams, path, report: FitReport | None = None) -> None:
    lines = [f"a={params.a!r}", f"b={params.b!r}", f"c={params.c!r}"]
    if report is not None:
        lines += [f"sse={report.sse!r}", f"converged={report.converged}", f"b_at_bound={report.b_at_bound}"]
    Path(path).write_text("\n".join(lines) + "\n")


def read_params(path) -> AlphaCurveParams:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        values[key.strip()] = value.strip()
    try:
        return AlphaCurveParams(float(values["a"]), float(values["b"]), float(values["c"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing parameter {exc.args[0]}") from None
