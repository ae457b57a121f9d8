"""Command-line front end: ``mqr <command> [options]``.

Global options (``--seed``, ``--reps``, ``--out``, ``--threads``) may be
given before or after the subcommand.  ``--threads`` changes speed only;
every artifact depends on the seed alone.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .bandit import ExperimentConfig, run_experiment
from .bayes_opt import MAX_HORIZON, load_table, save_table, solve_bayes_optimal
from .calibration import DEFAULT_TRAIN_GRID, fit_alpha_curve, read_params, read_points, train_pipeline, write_params
from .errors import MQRError
from .estimation import build_choice_data, estimate_alpha
from .harness import FULL_LOG_GRID, LOG_GRID, compare_policies, diagnose_policy
from .io import iter_trajectories, write_summary, write_trajectories
from .policies import make_policy
from .stats_dist import GAUSSIAN, GUMBEL, check_assumption1, default_assumption_grid

log = logging.getLogger("mqr")


def _int_list(text: str) -> list[int]:
    """``"10,50,100"`` or a range ``"10:100:5"`` (inclusive stop)."""
    text = text.strip()
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) not in (2, 3):
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) == 3 else 1
        if step < 1:
            raise argparse.ArgumentTypeError("range step must be >= 1")
        return list(range(lo, hi + 1, step))
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _fmt_value(v: float) -> str:
    return f"{v:.6f}".rstrip("0").rstrip(".")


def _curve(args):
    return read_params(args.curve) if getattr(args, "curve", None) else None


def _out(args, default: str) -> Path:
    return Path(args.out if args.out is not None else default)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.instance is not None and len(args.instance) != args.arms:
        raise MQRError(f"--instance lists {len(args.instance)} means for {args.arms} arms")
    policy = make_policy(args.policy, horizon=args.T, curve=_curve(args))
    cfg = ExperimentConfig(
        n_arms=args.arms,
        horizon=args.T,
        replications=args.reps,
        seed=args.seed,
        instance=args.instance,
        keep_trajectories=True,
        threads=args.threads,
    )
    res = run_experiment(policy, cfg)
    out = _out(args, "trajectories.jsonl")
    with open(out, "w", encoding="utf-8") as fh:
        write_trajectories(res.trajectories(), fh)
    summary = Path(args.summary) if args.summary else out.with_suffix(".summary.csv")
    with open(summary, "w", encoding="utf-8") as fh:
        write_summary([res], fh)
    print(f"wrote {res.replications} trajectories to {out}; summary in {summary}")
    print(f"mean_reward={res.mean_reward:.6f} se={res.se_reward:.6f} mean_regret={res.mean_regret:.6f}")
    return 0


def cmd_estimate_alpha(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        data = build_choice_data(iter_trajectories(fh))
    fit = estimate_alpha(data, bracket=(args.lo, args.hi), grid_step=args.grid_step, tol=args.tol)
    rec = fit.record()
    text = json.dumps(rec, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    if fit.at_lower_bound or fit.at_upper_bound:
        log.warning("alpha_hat %.4f sits at the edge of the search bracket", fit.alpha_hat)
    return 0


def cmd_bayes_opt(args) -> int:
    cache = args.cache or args.out
    table = None
    if cache and Path(cache).exists() and not args.force:
        table = load_table(cache)
        if table.horizon != args.T:
            log.info("cache %s holds T=%d, re-solving for T=%d", cache, table.horizon, args.T)
            table = None
    if table is None:
        table = solve_bayes_optimal(args.T, max_horizon=args.max_horizon)
        if cache:
            save_table(table, cache)
    print(_fmt_value(table.root_value))
    return 0


def cmd_fit_curve(args) -> int:
    points = read_points(args.points)
    params, report = fit_alpha_curve(points, n_starts=args.starts, seed=args.seed)
    out = _out(args, "params.txt")
    write_params(params, out, report)
    print(f"a={params.a:.6g} b={params.b:.6g} c={params.c:.6g} sse={report.sse:.6g} (constant model {report.constant_sse:.6g})")
    if report.b_at_bound:
        log.warning("exponent b sits at its upper bound; the data may not support a decaying schedule")
    return 0


def cmd_train(args) -> int:
    out = _out(args, "calibration")
    grid = args.T or (list(range(10, 151)) if args.full_grid else list(DEFAULT_TRAIN_GRID))
    params, points, report = train_pipeline(grid, reps=args.reps, seed=args.seed, out_dir=out, threads=args.threads)
    for p in points:
        print(f"T={p.T} alpha_hat={p.alpha_hat:.4f}")
    print(f"a={params.a:.6g} b={params.b:.6g} c={params.c:.6g} sse={report.sse:.6g}")
    return 0


def cmd_diagnose(args) -> int:
    rows = []
    for T in args.T:
        table = solve_bayes_optimal(T)
        for spec in args.policies:
            d = diagnose_policy(spec, T, reps=args.reps, seed=args.seed, threads=args.threads, table=table)
            rows.append(d)
            print(
                f"{spec} T={T}: alpha_hat={d.alpha_hat:.4f} gap={100 * d.gap:.2f}% "
                f"replay_gap={100 * d.replay_gap:.2f}% (V={d.bo_value:.4f})"
            )
    out = _out(args, "diagnose.csv")
    with open(out, "w", encoding="utf-8") as fh:
        cols = list(rows[0].record())
        fh.write(",".join(cols) + "\n")
        for d in rows:
            fh.write(",".join(str(v) if isinstance(v, str) else repr(v) for v in d.record().values()) + "\n")
    return 0


def cmd_compare(args) -> int:
    horizons = args.T if args.T else (FULL_LOG_GRID if args.full_grid else LOG_GRID)
    comp = compare_policies(
        args.policies, horizons, reps=args.reps, seed=args.seed, n_arms=args.arms, threads=args.threads, curve=_curve(args)
    )
    out = _out(args, "compare.csv")
    with open(out, "w", encoding="utf-8") as fh:
        comp.write_long(fh)
    diff_path = Path(args.diff_out) if args.diff_out else out.with_suffix(".diff.csv")
    with open(diff_path, "w", encoding="utf-8") as fh:
        comp.write_diffs(fh)
    for d in comp.diffs:
        flag = "  NEGATIVE (log omitted)" if d.negative else ""
        print(f"{d.policy_a} - {d.policy_b} @ T={d.T}: {d.diff:+.4f} (se {d.se:.4f}){flag}")
    for other, slope in comp.slopes.items():
        print(f"log-log slope vs {other}: {'n/a' if math.isnan(slope) else f'{slope:.4f}'}")
    return 0


def cmd_check_assumptions(args) -> int:
    grid = default_assumption_grid(args.upper, args.step)
    failed = False
    lines = []
    for spec in (GAUSSIAN, GUMBEL):
        rep = check_assumption1(spec, grid)
        status = "ok" if rep.ok else f"{len(rep.violations)} violations"
        lines.append(f"{rep.name}: {rep.n_points} points, mean={rep.mean:.6f} std={rep.std:.6f}: {status}")
        for cond, x, lhs, rhs in rep.violations[:5]:
            lines.append(f"  condition {cond} at x={x:.2f}: {lhs:.6g} vs {rhs:.6g}")
        failed |= not rep.ok
    print("\n".join(lines))
    if args.out is not None:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 1 if failed else 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _add_globals(p, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=_seed, default=d(0), help="base seed (default 0)")
    p.add_argument("--reps", type=_positive, default=d(1000), help="replications (default 1000)")
    p.add_argument("--out", default=d(None), help="output path")
    p.add_argument("--threads", type=_positive, default=d(1), help="worker threads; never changes output")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a policy and write trajectories")
    p.add_argument("--policy", required=True, help="mqr:gaussian:0.5, mqr:gumbel:1, mqr:gaussian:auto, ts-gauss, ts-beta, ucb1, ucb1-tuned, bayes-opt")
    p.add_argument("--T", type=int, required=True, help="horizon")
    p.add_argument("--arms", type=_positive, default=2)
    p.add_argument("--instance", type=_float_list, help="fixed arm means, comma separated")
    p.add_argument("--curve", help="params file for mqr:gaussian:auto")
    p.add_argument("--summary", help="summary CSV path (default <out>.summary.csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-alpha", parents=[common], help="maximum-likelihood alpha from a trajectory file")
    p.add_argument("input")
    p.add_argument("--lo", type=float, default=0.01)
    p.add_argument("--hi", type=float, default=3.0)
    p.add_argument("--grid-step", type=float, default=0.05)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_estimate_alpha)

    p = sub.add_parser("bayes-opt", parents=[common], help="solve the Bayes-optimal policy and print V(T)")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--cache", help="binary table cache (loaded when it matches T)")
    p.add_argument("--max-horizon", type=int, default=MAX_HORIZON)
    p.add_argument("--force", action="store_true", help="ignore an existing cache")
    p.set_defaults(func=cmd_bayes_opt)

    p = sub.add_parser("fit-curve", parents=[common], help="fit alpha*(T) to a points CSV")
    p.add_argument("points", help="CSV with columns T, alpha_hat[, weight]")
    p.add_argument("--starts", type=_positive, default=8)
    p.set_defaults(func=cmd_fit_curve)

    p = sub.add_parser("train", parents=[common], help="Bayes-optimal play -> alpha estimates -> curve fit")
    p.add_argument("--T", type=_int_list, help="horizons, e.g. 10:100:5 (default 10:150:5)")
    p.add_argument("--full-grid", action="store_true", help="every integer horizon 10..150")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("diagnose", parents=[common], help="estimate alpha and optimality gaps of two-armed policies")
    p.add_argument("--policies", type=lambda s: [x.strip() for x in s.split(",") if x.strip()], required=True)
    p.add_argument("--T", type=_int_list, default=[10, 50, 100], help="horizons (at most the solver bound)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("compare", parents=[common], help="paired-seed comparison of policies")
    p.add_argument("--policies", type=lambda s: [x.strip() for x in s.split(",") if x.strip()], required=True,
                   help="comma separated; differences are the first minus each other")
    p.add_argument("--T", type=_int_list, help="horizons (default round(e^4..e^7))")
    p.add_argument("--full-grid", action="store_true", help="use round(e^4..e^9)")
    p.add_argument("--arms", type=_positive, default=2)
    p.add_argument("--curve", help="params file for mqr:gaussian:auto")
    p.add_argument("--diff-out", help="difference table path (default <out>.diff.csv)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check-assumptions", parents=[common], help="check the noise conditions for both noise families")
    p.add_argument("--upper", type=float, default=40.0)
    p.add_argument("--step", type=float, default=0.01)
    p.set_defaults(func=cmd_check_assumptions)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (MQRError, ValueError) as exc:
        # library errors are user-facing here: bad specs, bad inputs, bad ranges
        print(f"mqr {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mqr {args.command}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
