import subprocess
import sys

import pytest

from baco import cli
from baco.experiment import read_plot_data, read_records_csv, read_summary_csv


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("argv, value", [
    (["--problem", "leadingones", "--n", "2", "--t", "1", "--method", "closed"], "3"),
    (["--problem", "sorting", "--n", "3", "--t", "1", "--method", "matrix"], "5"),
    (["--problem", "onemax", "--n", "1", "--t", "1", "--method", "bound"], "2"),
    (["--problem", "leadingones", "--n", "3", "--t", "1", "--method", "explicit"], "7"),
    (["--problem", "sorting", "--n", "2", "--t", "1", "--method", "truncated", "--horizon", "200"], "1"),
])
def test_analytic_values(capsys, argv, value):
    code, out, _ = run(capsys, "analytic", *argv)
    assert code == 0
    assert out.split()[0] == value


def test_analytic_prints_twelve_digits(capsys):
    _, out, _ = run(capsys, "analytic", "--problem", "leadingones", "--n", "50", "--t", "1/n")
    assert out.split() == ["2156.77473707", "closed_form"]


def test_analytic_truncated_default_horizon(capsys):
    code, out, _ = run(capsys, "analytic", "--problem", "leadingones", "--n", "6", "--t", "1/n",
                       "--method", "truncated")
    assert code == 0
    _, closed, _ = run(capsys, "analytic", "--problem", "leadingones", "--n", "6", "--t", "1/n")
    assert float(out.split()[0]) == pytest.approx(float(closed.split()[0]), rel=1e-9)


@pytest.mark.parametrize("argv", [
    ["analytic", "--problem", "onemax", "--n", "4", "--t", "1/n", "--method", "matrix"],
    ["analytic", "--problem", "leadingones", "--n", "4", "--t", "2"],
    ["analytic", "--problem", "leadingones", "--n", "4", "--t", "x/n"],
    ["analytic", "--problem", "sorting", "--n", "1", "--t", "1"],
    ["analytic", "--problem", "knapsack", "--n", "4", "--t", "1"],
    ["analytic", "--problem", "leadingones", "--n", "4"],
    ["simulate", "--problem", "leadingones", "--n-list", "a,b"],
    ["compare", "--problem", "leadingones", "--n-list", "5", "--reps", "1"],
])
def test_usage_errors_exit_2(capsys, argv):
    try:
        code = cli.main(argv)
    except SystemExit as exc:  # argparse
        code = exc.code
    capsys.readouterr()
    assert code == 2


def test_explicit_violation_exits_3(capsys, monkeypatch):
    import numpy as np
    from baco import markov

    def onemax_like(problem, n, t, exact=False):
        M = np.array([[0.5, 0.25, 0.2, 0.05],
                      [0.0, 0.5, 0.25, 0.25],
                      [0.0, 0.0, 0.5, 0.5],
                      [0.0, 0.0, 0.0, 0.0]])
        return markov.MarkovModel(np.array([1.0, 0, 0, 0]), markov.TransitionMatrix.from_dense(M))

    monkeypatch.setattr(markov, "model", onemax_like)
    code, _, err = run(capsys, "analytic", "--problem", "leadingones", "--n", "3", "--t", "1",
                       "--method", "explicit")
    assert code == 3 and "row-ratio" in err


def test_parse_n_list():
    assert cli.parse_n_list("5:20:5") == [5, 10, 15, 20]
    assert cli.parse_n_list("3,7, 9") == [3, 7, 9]
    assert cli.parse_n_list("5:200:5")[-1] == 200 and len(cli.parse_n_list("5:200:5")) == 40
    with pytest.raises(cli.UsageError):
        cli.parse_n_list("0,3")


def test_simulate_defaults():
    assert cli.SIMULATE_DEFAULTS[cli.Problem.LEADING_ONES] == ("5:200:5", 20, "1/n")
    assert cli.SIMULATE_DEFAULTS[cli.Problem.SORTING] == ("5:100:5", 40, "1/n^2")


def test_simulate_single_row(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code, _, _ = run(capsys, "simulate", "--problem", "leadingones", "--n-list", "1", "--reps", "1",
                     "--out", str(out))
    assert code == 0
    assert len(out.read_text().splitlines()) == 2
    (r,) = read_records_csv(out)
    assert r.n == 1 and r.t == 1.0


def test_simulate_is_deterministic(capsys):
    argv = ["simulate", "--problem", "sorting", "--n-list", "4,5", "--reps", "3", "--seed", "9"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b and len(a.splitlines()) == 7


def test_simulate_reports_capped_runs(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code, _, err = run(capsys, "simulate", "--problem", "sorting", "--n-list", "9", "--t", "1",
                       "--reps", "2", "--max-iters", "3", "--out", str(out))
    assert code == 0 and "hit --max-iters" in err
    assert all(r.hit_max_iters and r.iterations == 3 for r in read_records_csv(out))


@pytest.mark.slow
def test_compare_passes_band(capsys, tmp_path):
    out = tmp_path / "cmp.csv"
    code, _, err = run(capsys, "compare", "--problem", "leadingones", "--n-list", "10,20", "--t", "1/n",
                       "--reps", "500", "--seed", "3", "--out", str(out))
    assert code == 0, err
    summaries = read_summary_csv(out)
    assert [s.n for s in summaries] == [10, 20]
    plot = read_plot_data(tmp_path / "cmp.plot.csv")
    assert [n for n, _ in plot["curve"]] == [10, 20]
    assert len(plot["scatter"]) == 1000


def test_compare_negative_control(capsys, monkeypatch):
    from baco import experiment

    monkeypatch.setattr(experiment, "analytic_reference", lambda problem, n, t: 10 * n * n)
    code, _, err = run(capsys, "compare", "--problem", "leadingones", "--n-list", "8", "--reps", "50")
    assert code == 1 and "FAIL n=8" in err


def test_compare_onemax_uses_bound(capsys):
    code, out, _ = run(capsys, "compare", "--problem", "onemax", "--n-list", "10,20", "--reps", "30")
    assert code == 0
    assert out.splitlines()[0].startswith("problem,n,t,reps")


def test_sweep_sorting_minimum_near_inverse_square(capsys):
    code, out, _ = run(capsys, "sweep", "--problem", "sorting", "--n", "10", "--t-list", "1,1/10,1/100,1/1000")
    assert code == 0
    rows = [line.split(",") for line in out.splitlines()[1:]]
    values = {float(t): float(T) for t, T in rows}
    assert min(values, key=values.get) == pytest.approx(0.01)


def test_sweep_leading_ones(capsys):
    _, out, _ = run(capsys, "sweep", "--problem", "leadingones", "--n", "10", "--t-list", "1,1/10")
    rows = [line.split(",") for line in out.splitlines()[1:]]
    assert float(rows[1][1]) < float(rows[0][1])
    _, out, _ = run(capsys, "sweep", "--problem", "leadingones", "--n", "10", "--t-list", "1/n")
    assert len(out.splitlines()) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "baco", "analytic", "--problem", "sorting",
                           "--n", "3", "--t", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.split()[0] == "5"
