"""Seeded batches of BACO runs, their summary statistics, and CSV persistence."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .engine import DEFAULT_MAX_ITERS, Problem, RunRecord, run_baco
from .markov import expected_time_closed, onemax_upper_bound
from .ratio import RatioExpression

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

RECORD_FIELDS = ("problem", "n", "t", "seed", "iterations", "hit_max_iters")
SUMMARY_FIELDS = ("problem", "n", "t", "reps", "mean_iterations", "stddev", "stderr",
                  "analytic_T", "rel_error", "capped_runs")
SUMMARY_NOTE = "# stddev: unbiased sample standard deviation (n-1 denominator); stderr = stddev/sqrt(reps)"


class ExperimentIOError(OSError):
    pass


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x``."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, n: int, rep: int) -> int:
    """Per-run seed ``mix(mix(mix(master) ^ n) ^ rep)``, stable across machines."""
    h = splitmix64(master_seed & MASK64)
    h = splitmix64(h ^ (n & MASK64))
    return splitmix64(h ^ (rep & MASK64))


@dataclass(frozen=True)
class ExperimentConfig:
    problem: Problem
    n_values: tuple[int, ...]
    t_expression: RatioExpression
    reps: int
    master_seed: int = 0
    max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self) -> None:
        object.__setattr__(self, "problem", Problem.parse(self.problem))
        if isinstance(self.t_expression, str):
            object.__setattr__(self, "t_expression", RatioExpression.parse(self.t_expression))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        if not self.n_values:
            raise ValueError("at least one problem size is required")
        if self.reps < 1:
            raise ValueError(f"reps must be at least 1, got {self.reps}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master seed must be an unsigned 64-bit integer")
        for n in self.n_values:
            if n < 1 or (self.problem is Problem.SORTING and n < 2):
                raise ValueError(f"invalid problem size {n} for {self.problem.value}")
            self.t_expression.resolve(n)

    def ratio(self, n: int) -> float:
        return self.t_expression.resolve(n)


def _run_task(task: tuple) -> RunRecord:
    return run_baco(*task)


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> list[RunRecord]:
    """All runs of ``cfg``, ordered by ``(n, rep)`` whatever the parallelism."""
    tasks = [(cfg.problem, n, cfg.ratio(n), derive_seed(cfg.master_seed, n, rep), cfg.max_iters)
             for n in cfg.n_values for rep in range(cfg.reps)]
    if workers is None or workers <= 1 or len(tasks) < 2:
        return [_run_task(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def analytic_reference(problem, n: int, t: float) -> float:
    """Exact expected time for LeadingOnes and Sorting; the upper bound for OneMax."""
    problem = Problem.parse(problem)
    if problem is Problem.ONE_MAX:
        return onemax_upper_bound(n, t)
    return float(expected_time_closed(problem, n, t).value)


@dataclass(frozen=True)
class ExperimentSummary:
    problem: Problem
    n: int
    t: float
    reps: int
    mean_iterations: float
    stddev: float
    stderr: float
    analytic_T: float
    rel_error: Optional[float]
    capped_runs: int

    def within_band(self, k: float = 3.0) -> bool:
        """``|mean - T| <= k * stderr``; a group with capped runs never passes."""
        if self.capped_runs:
            return False
        return abs(self.mean_iterations - self.analytic_T) <= k * self.stderr


AnalyticSource = Union[Mapping[int, float], Callable[[int], float]]


def summarize(records: Sequence[RunRecord], analytic: AnalyticSource) -> list[ExperimentSummary]:
    """Per-``n`` sample statistics against the analytic value for that ``n``."""
    if not records:
        raise ValueError("no records to summarize")
    problems = {r.problem for r in records}
    if len(problems) != 1:
        raise ValueError(f"records mix problems: {sorted(p.value for p in problems)}")
    groups: dict[int, list[RunRecord]] = {}
    for r in records:
        groups.setdefault(r.n, []).append(r)
    lookup = analytic if callable(analytic) else analytic.__getitem__
    out = []
    for n in sorted(groups):
        group = groups[n]
        ts = {r.t for r in group}
        if len(ts) != 1:
            raise ValueError(f"records for n={n} use different ratios {sorted(ts)}")
        its = np.array([r.iterations for r in group], dtype=float)
        reps = len(its)
        mean = float(its.mean())
        std = float(its.std(ddof=1)) if reps > 1 else math.nan
        stderr = std / math.sqrt(reps)
        T = float(lookup(n))
        capped = sum(r.hit_max_iters for r in group)
        rel = None if capped else (mean - T) / T
        out.append(ExperimentSummary(group[0].problem, n, group[0].t, reps, mean, std,
                                     stderr, T, rel, capped))
    return out


def markov_tail_check(records: Iterable[RunRecord], analytic: Union[float, AnalyticSource],
                      alpha: float) -> float:
    """Fraction of runs needing more than ``alpha * T`` iterations.

    Markov's inequality caps this at ``1/alpha``; with ``reps`` runs, allow
    ``3 * sqrt(0.25 / reps)`` of sampling slack on top.
    """
    if not alpha > 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    records = list(records)
    if not records:
        raise ValueError("no records")
    if isinstance(analytic, (int, float)):
        lookup = lambda n: analytic  # noqa: E731
    else:
        lookup = analytic if callable(analytic) else analytic.__getitem__
    over = sum(1 for r in records if r.iterations > alpha * lookup(r.n))
    return over / len(records)


# -- persistence --------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, Problem):
        return x.value
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _open(path, mode: str):
    try:
        return open(path, mode, encoding="utf-8", newline="")
    except OSError as exc:
        raise ExperimentIOError(f"cannot open {os.fspath(path)!s} ({mode}): {exc.strerror or exc}") from exc


def _write_rows(path, lines: list[list[str]], preamble: Sequence[str] = ()) -> None:
    with _open(path, "w") as fh:
        try:
            for line in preamble:
                fh.write(line + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerows(lines)
        except OSError as exc:
            raise ExperimentIOError(f"cannot write {os.fspath(path)!s}: {exc}") from exc


def write_records_csv(records: Iterable[RunRecord], path) -> None:
    rows = [list(RECORD_FIELDS)]
    rows += [[_fmt(getattr(r, f)) for f in RECORD_FIELDS] for r in records]
    _write_rows(path, rows)


def write_summary_csv(summaries: Iterable[ExperimentSummary], path) -> None:
    rows = [list(SUMMARY_FIELDS)]
    rows += [[_fmt(getattr(s, f)) for f in SUMMARY_FIELDS] for s in summaries]
    _write_rows(path, rows, preamble=[SUMMARY_NOTE])


def write_csv(items: Sequence, path) -> None:
    """Write records or summaries, whichever ``items`` holds."""
    items = list(items)
    if items and isinstance(items[0], ExperimentSummary):
        write_summary_csv(items, path)
    else:
        write_records_csv(items, path)


def _read_rows(path) -> list[list[str]]:
    with _open(path, "r") as fh:
        return [row for row in csv.reader(line for line in fh if not line.startswith("#"))]


def _bool(s: str) -> bool:
    if s not in ("true", "false"):
        raise ValueError(f"expected true/false, got {s!r}")
    return s == "true"


def read_records_csv(path) -> list[RunRecord]:
    rows = _read_rows(path)
    if not rows or tuple(rows[0]) != RECORD_FIELDS:
        raise ValueError(f"{path}: not a records CSV")
    return [RunRecord(Problem.parse(p), int(n), float(t), int(seed), int(it), _bool(hit))
            for p, n, t, seed, it, hit in rows[1:]]


def read_summary_csv(path) -> list[ExperimentSummary]:
    rows = _read_rows(path)
    if not rows or tuple(rows[0]) != SUMMARY_FIELDS:
        raise ValueError(f"{path}: not a summary CSV")
    out = []
    for p, n, t, reps, mean, std, se, T, rel, capped in rows[1:]:
        out.append(ExperimentSummary(Problem.parse(p), int(n), float(t), int(reps), float(mean),
                                     float(std), float(se), float(T),
                                     float(rel) if rel else None, int(capped)))
    return out


def emit_plot_data(records: Iterable[RunRecord], summaries: Iterable[ExperimentSummary],
                   path) -> None:
    """Two-section CSV: raw ``n,iterations`` scatter, then the ``n,analytic_T`` curve."""
    lines = [["# scatter"], ["n", "iterations"]]
    lines += [[str(r.n), str(r.iterations)] for r in sorted(records, key=lambda r: r.n)]
    lines += [["# curve"], ["n", "analytic_T"]]
    lines += [[str(s.n), _fmt(float(s.analytic_T))] for s in sorted(summaries, key=lambda s: s.n)]
    _write_rows(path, lines)


def read_plot_data(path) -> dict[str, list[tuple[int, float]]]:
    sections: dict[str, list[tuple[int, float]]] = {}
    current = None
    with _open(path, "r") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                current = line[1:].strip()
                sections[current] = []
            elif line and not line[0].isalpha():
                n, value = line.split(",")
                sections[current].append((int(n), float(value)))
    return sections
