"""Command-line front end: ``baco analytic | simulate | compare | sweep``.

Exit codes: 0 success, 1 a compared group left its 3-standard-error band,
2 usage error, 3 an analytic precondition does not hold.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import experiment as ex
from . import markov
from .engine import DEFAULT_MAX_ITERS, Problem
from .ratio import RatioExpression

EXIT_OK, EXIT_BAND, EXIT_USAGE, EXIT_PRECONDITION = 0, 1, 2, 3

# Default problem-size ranges, repetitions and ratios for each problem.
SIMULATE_DEFAULTS = {
    Problem.LEADING_ONES: ("5:200:5", 20, "1/n"),
    Problem.SORTING: ("5:100:5", 40, "1/n^2"),
    Problem.ONE_MAX: ("5:100:5", 20, "1/n"),
}

METHODS = ("closed", "matrix", "explicit", "truncated", "bound")


class UsageError(Exception):
    pass


def parse_n_list(text: str) -> list[int]:
    """Comma-separated sizes; ``a:b[:step]`` expands to an inclusive range."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ":" in part:
                bits = [int(b) for b in part.split(":")]
                if len(bits) not in (2, 3) or (len(bits) == 3 and bits[2] <= 0):
                    raise ValueError
                lo, hi = bits[0], bits[1]
                step = bits[2] if len(bits) == 3 else 1
                out.extend(range(lo, hi + 1, step))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"bad problem-size list entry {part!r}") from None
    if not out:
        raise UsageError("empty problem-size list")
    if min(out) < 1:
        raise UsageError("problem sizes must be positive")
    return out


def _ratio(text: str) -> RatioExpression:
    try:
        return RatioExpression.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _resolve(expr: RatioExpression, n: int) -> float:
    try:
        return expr.resolve(n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _fmt(value: float) -> str:
    return format(value, ".12g")


def _evaluate(problem: Problem, n: int, t: float, method: str,
              horizon: Optional[int]) -> tuple[str, str]:
    """Value text and method label for one analytic evaluation."""
    if problem is Problem.ONE_MAX:
        if method != "bound":
            raise UsageError("OneMax has no exact Markov model; only --method bound is available")
        return _fmt(markov.onemax_upper_bound(n, t)), "bound"
    if problem is Problem.SORTING and n < 2:
        raise UsageError("Sorting needs n >= 2")
    if method == "bound":
        if problem is not Problem.SORTING:
            raise UsageError("--method bound is available for onemax and sorting only")
        lo, hi = markov.sort_bounds(n, t)
        return f"{_fmt(lo)} {_fmt(hi)}", "bound"
    if method == "closed":
        return _fmt(float(markov.expected_time_closed(problem, n, t).value)), "closed_form"
    if method == "truncated" and horizon is None:
        horizon = math.ceil(100 * float(markov.expected_time_closed(problem, n, t).value))
    if method == "truncated" and not math.isfinite(horizon):
        raise UsageError("default horizon overflows; pass --horizon")
    mdl = markov.model(problem, n, t)
    if method == "matrix":
        res = markov.expected_time_matrix(mdl.p, mdl.M)
    elif method == "explicit":
        res = markov.expected_time_explicit(mdl.p, mdl.M)
    else:
        res = markov.truncated_expected_time(mdl.p, mdl.M, horizon)
    return _fmt(float(res.value)), res.method.value


def cmd_analytic(args) -> int:
    problem = args.problem
    t = _resolve(_ratio(args.t), args.n)
    value, label = _evaluate(problem, args.n, t, args.method, args.horizon)
    print(f"{value} {label}")
    return EXIT_OK


def _config(args) -> ex.ExperimentConfig:
    problem = args.problem
    n_default, reps_sim, t_default = SIMULATE_DEFAULTS[problem]
    n_values = parse_n_list(args.n_list or n_default)
    expr = _ratio(args.t or t_default)
    reps = args.reps if args.reps is not None else reps_sim
    if reps < 1:
        raise UsageError("--reps must be at least 1")
    if problem is Problem.SORTING and min(n_values) < 2:
        raise UsageError("Sorting needs n >= 2")
    for n in n_values:
        _resolve(expr, n)
    try:
        return ex.ExperimentConfig(problem, tuple(n_values), expr, reps, args.seed, args.max_iters)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write(fn, *a) -> None:
    try:
        fn(*a)
    except ex.ExperimentIOError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    cfg = _config(args)
    records = ex.run_experiment(cfg, workers=args.workers)
    if args.out:
        _write(ex.write_records_csv, records, args.out)
    else:
        print(",".join(ex.RECORD_FIELDS))
        for r in records:
            print(",".join(ex._fmt(getattr(r, f)) for f in ex.RECORD_FIELDS))
    capped = sum(r.hit_max_iters for r in records)
    if capped:
        print(f"warning: {capped} run(s) hit --max-iters", file=sys.stderr)
    return EXIT_OK


def compare(cfg: ex.ExperimentConfig, workers: Optional[int] = None, analytic=None):
    """Run ``cfg`` and summarize it against ``analytic(problem, n, t)``.

    Returns ``(records, summaries, failures)``.  For LeadingOnes and Sorting a
    group fails when its mean leaves ``T +- 3 stderr``; for OneMax the
    reference is an upper bound and a group fails when its mean exceeds it.
    """
    analytic = analytic or ex.analytic_reference
    records = ex.run_experiment(cfg, workers=workers)
    summaries = ex.summarize(records, lambda n: analytic(cfg.problem, n, cfg.ratio(n)))
    if cfg.problem is Problem.ONE_MAX:
        failures = [s for s in summaries if s.capped_runs or s.mean_iterations > s.analytic_T]
    else:
        failures = [s for s in summaries if not s.within_band(3.0)]
    return records, summaries, failures


def cmd_compare(args) -> int:
    cfg = _config(args)
    if cfg.reps < 2:
        raise UsageError("compare needs --reps >= 2 to estimate a standard error")
    records, summaries, failures = compare(cfg, workers=args.workers)
    out = Path(args.out) if args.out else None
    if out is not None:
        _write(ex.write_summary_csv, summaries, out)
        plot_path = args.plot_out or out.with_name(out.stem + ".plot.csv")
        _write(ex.emit_plot_data, records, summaries, plot_path)
    print(",".join(ex.SUMMARY_FIELDS))
    for s in summaries:
        print(",".join(ex._fmt(getattr(s, f)) for f in ex.SUMMARY_FIELDS))
    for s in failures:
        print(f"FAIL n={s.n}: mean {s.mean_iterations:.6g} vs reference {s.analytic_T:.6g} "
              f"(stderr {s.stderr:.3g}, capped {s.capped_runs})", file=sys.stderr)
    return EXIT_BAND if failures else EXIT_OK


def cmd_sweep(args) -> int:
    problem = args.problem
    exprs = [_ratio(part) for part in args.t_list.split(",") if part.strip()]
    if not exprs:
        raise UsageError("empty --t-list")
    print("t,T")
    for expr in exprs:
        t = _resolve(expr, args.n)
        value, _ = _evaluate(problem, args.n, t, args.method, args.horizon)
        print(f"{format(t, '.17g')},{value}")
    return EXIT_OK


def _problem(text: str) -> Problem:
    try:
        return Problem.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="baco", description="Bivalent ACO simulation and exact expected optimization times.")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analytic", help="expected optimization time from the Markov chain")
    a.add_argument("--problem", type=_problem, required=True)
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--t", required=True, help="ratio: 0.5, 1/3, 1/n or 2/n^1.5")
    a.add_argument("--method", choices=METHODS, default="closed")
    a.add_argument("--horizon", type=int, help="truncation horizon for --method truncated")
    a.set_defaults(func=cmd_analytic)

    sw = sub.add_parser("sweep", help="expected time for a list of ratios")
    sw.add_argument("--problem", type=_problem, required=True)
    sw.add_argument("--n", type=int, required=True)
    sw.add_argument("--t-list", required=True, help="comma-separated ratios")
    sw.add_argument("--method", choices=METHODS, default="closed")
    sw.add_argument("--horizon", type=int)
    sw.set_defaults(func=cmd_sweep)

    for name, func, help_text in (("simulate", cmd_simulate, "run seeded BACO batches"),
                                  ("compare", cmd_compare, "simulate and compare with analytic T")):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--problem", type=_problem, required=True)
        s.add_argument("--n-list", help="e.g. 10,20 or 5:200:5 (default depends on --problem)")
        s.add_argument("--t", help="ratio rule (default: 1/n, or 1/n^2 for sorting)")
        s.add_argument("--reps", type=int)
        s.add_argument("--seed", type=int, default=1)
        s.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
        s.add_argument("--workers", type=int, default=1, help="worker processes")
        s.add_argument("--out", help="output CSV path (default: stdout for simulate)")
        if name == "compare":
            s.add_argument("--plot-out", help="plot-data path (default: <out>.plot.csv)")
        s.set_defaults(func=func)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "n", 1) < 1:
            raise UsageError("--n must be positive")
        if getattr(args, "horizon", None) is not None and args.horizon < 0:
            raise UsageError("--horizon must be non-negative")
        return args.func(args)
    except UsageError as exc:
        print(f"baco: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except markov.RowPropertyError as exc:
        print(f"baco: precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except markov.DegenerateChainError as exc:
        print(f"baco: precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
