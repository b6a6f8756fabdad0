import json
import math

import pytest

from ehpc.cli import main


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_threshold_json(capsys):
    code, out, _ = run_cli(
        capsys,
        ["threshold", "--dist", "bernoulli:xlo=0,xhi=5,p=0.5", "--reward", "awgn"],
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["c_star"] == pytest.approx(1.0, abs=1e-8)
    assert payload["c_upper"] == pytest.approx(11.0 / 3.0, abs=1e-6)
    assert payload["method"] == "discrete-exact"
    assert payload["c_upper_unbounded"] is False


def test_threshold_infinite_support_serialization(capsys):
    code, out, _ = run_cli(capsys, ["threshold", "--dist", "exponential:eta=1"])
    assert code == 0
    payload = json.loads(out)
    assert payload["x_hi"] == "inf"
    assert payload["c_star"] == pytest.approx(1.0888622086436395, abs=1e-6)


def test_threshold_flat_reward_signals(capsys):
    code, out, _ = run_cli(
        capsys,
        ["threshold", "--dist", "bernoulli:xlo=0,xhi=5,p=0.5", "--reward", "linear:slope=0.4"],
    )
    assert code == 0
    assert json.loads(out)["greedy_optimal_for_all_c"] is True


def test_bounds_json(capsys):
    code, out, _ = run_cli(capsys, ["bounds", "--dist", "bernoulli:xlo=0,xhi=5,p=0.5"])
    assert code == 0
    payload = json.loads(out)
    assert "c_star" not in payload
    assert payload["c_lower"] == pytest.approx(1.0, abs=1e-6)


def test_sweep_csv(capsys):
    code, out, _ = run_cli(
        capsys,
        ["sweep", "--family", "geometric", "--regime", "small", "--mu", "0.01,0.1,1"],
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "mu,c_star,psi,ratio"
    assert len(lines) == 4
    for line in lines[1:]:
        assert float(line.split(",")[3]) == pytest.approx(1.0, abs=1e-9)


def test_simulate_deterministic(capsys):
    argv = [
        "simulate",
        "--dist", "bernoulli:xlo=0,xhi=5,p=0.5",
        "--capacity", "2",
        "--policy", "modified:eps=0.25",
        "--steps", "100000",
        "--seed", "7",
    ]
    code1, out1, _ = run_cli(capsys, argv)
    code2, out2, _ = run_cli(capsys, argv)
    assert code1 == code2 == 0
    assert out1 == out2
    payload = json.loads(out1)
    assert payload["seed"] == 7
    assert payload["steps"] == 100000
    assert payload["avg_reward"] > 0.0


def test_simulate_default_seed(capsys):
    argv = [
        "simulate", "--dist", "uniform:omega=2", "--capacity", "1",
        "--policy", "greedy", "--steps", "1000",
    ]
    code, out, _ = run_cli(capsys, argv)
    assert code == 0
    assert json.loads(out)["seed"] == 42


def test_simulate_optimal_policy(capsys):
    argv = [
        "simulate", "--dist", "bernoulli:xlo=0,xhi=5,p=0.5", "--capacity", "0.5",
        "--policy", "optimal:grid_n=128", "--steps", "20000",
    ]
    code, out, _ = run_cli(capsys, argv)
    assert code == 0
    target = 0.25 * math.log1p(0.5)
    assert json.loads(out)["avg_reward"] == pytest.approx(target, rel=0.05)


def test_solve_csv_and_json(capsys):
    argv = [
        "solve", "--dist", "bernoulli:xlo=0,xhi=5,p=0.5", "--capacity", "1",
        "--grid-n", "64",
    ]
    code, out, _ = run_cli(capsys, argv)
    assert code == 0
    assert out.splitlines()[0] == "b,h,g_opt"
    assert len(out.splitlines()) == 65
    code, out, _ = run_cli(capsys, argv + ["--json"])
    assert code == 0
    payload = json.loads(out)
    assert set(payload) == {"gamma", "residual", "iterations", "grid_n"}


def test_curves_csv(capsys):
    argv = [
        "curves", "--dist", "bernoulli:xlo=0,xhi=5,p=0.5",
        "--c-min", "0.5", "--c-max", "1.5", "--points", "3", "--grid-n", "64",
    ]
    code, out, _ = run_cli(capsys, argv)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "c,gamma_star,gamma_greedy,gamma_upper"
    assert len(lines) == 4


def test_phicheck(capsys):
    argv = [
        "phicheck", "--dist", "bernoulli:xlo=0,xhi=5,p=0.5", "--capacity", "0.9",
        "--b-points", "10", "--g-points", "40",
    ]
    code, out, _ = run_cli(capsys, argv)
    assert code == 0
    payload = json.loads(out)
    assert payload["monotone"] is True
    argv[4] = "1.5"
    code, out, _ = run_cli(capsys, argv)
    assert code == 0
    assert json.loads(out)["min_left_derivative"] < -1e-9


def test_out_file(tmp_path, capsys):
    target = tmp_path / "rows.csv"
    argv = [
        "sweep", "--family", "geometric", "--regime", "small",
        "--mu", "0.01,0.1", "--out", str(target),
    ]
    assert run_cli(capsys, argv)[0] == 0
    text = target.read_text()
    assert text.splitlines()[0] == "mu,c_star,psi,ratio"
    assert "\r" not in text


def test_usage_exit_codes(capsys):
    assert run_cli(capsys, [])[0] == 64
    assert run_cli(capsys, ["frobnicate"])[0] == 64
    assert run_cli(capsys, ["threshold"])[0] == 64  # missing --dist


def test_domain_error_exit_code(capsys):
    code, _, err = run_cli(capsys, ["threshold", "--dist", "gaussian:sigma=1"])
    assert code == 2
    assert "domain error" in err


def test_nonconvergence_exit_code(capsys):
    argv = [
        "solve", "--dist", "bernoulli:xlo=0,xhi=5,p=0.5", "--capacity", "2",
        "--grid-n", "64", "--max-sweeps", "1",
    ]
    code, _, err = run_cli(capsys, argv)
    assert code == 3
    assert "numerical error" in err


def test_curves_and_sweep_json(capsys):
    argv = [
        "curves", "--dist", "bernoulli:xlo=0,xhi=5,p=0.5",
        "--c-min", "0.5", "--c-max", "1.0", "--points", "2",
        "--grid-n", "64", "--json",
    ]
    code, out, _ = run_cli(capsys, argv)
    assert code == 0
    rows = json.loads(out)
    assert len(rows) == 2 and rows[0]["c"] == 0.5
    argv = ["sweep", "--family", "poisson", "--regime", "small", "--mu", "0.5", "--json"]
    code, out, _ = run_cli(capsys, argv)
    assert code == 0
    assert json.loads(out)[0]["c_star"] == pytest.approx(math.exp(0.5) - 1.0, abs=1e-8)


def test_verify_subcommand(capsys):
    code, out, _ = run_cli(capsys, ["verify", "--criteria", "3,10"])
    assert code == 0
    lines = [l for l in out.splitlines() if l.startswith("PASS")]
    assert len(lines) == 2
    assert "criterion 3" in lines[0] and "criterion 10" in lines[1]


def test_verify_unknown_criterion(capsys):
    assert run_cli(capsys, ["verify", "--criteria", "11"])[0] == 2


def test_bad_policy_grid_n_is_domain_error(capsys):
    argv = [
        "simulate", "--dist", "uniform:omega=2", "--capacity", "1",
        "--policy", "optimal:grid_n=abc", "--steps", "10",
    ]
    assert run_cli(capsys, argv)[0] == 2
