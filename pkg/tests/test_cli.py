import io
import json
import subprocess
import sys

import numpy as np
import pytest

from preqrisk import cli
from preqrisk.simlab import SVSpec, sample_sv


def run(argv, capsys, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def prices(tmp_path):
    rng = np.random.default_rng(3)
    p = 1000 * np.exp(np.cumsum(rng.standard_t(4, 1600) * 0.02))
    dates = np.datetime64("1984-01-06") + 7 * np.arange(p.size)
    path = tmp_path / "prices.csv"
    path.write_text("date,price\n" + "".join(f"{d},{float(v)!r}\n" for d, v in zip(dates, p)))
    return path


def test_ci_table_matches_reference(capsys):
    code, out, _ = run(
        ["ci-table", "--beta", "0.9", "--lengths", "250,500,1000", "--gammas", "0.01,0.05,0.10,0.50",
         "--reps", "100000", "--seed", "7"], capsys)
    assert code == 0
    rows = [r.split(",") for r in out.strip().splitlines()]
    assert rows[0] == ["gamma", "t1_250", "t2_250", "t1_500", "t2_500", "t1_1000", "t2_1000"]
    t = {float(r[0]): [float(v) for v in r[1:]] for r in rows[1:]}
    assert t[0.05][2:4] == pytest.approx([0.8103, 0.9758], abs=0.01)
    assert t[0.5][4:6] == pytest.approx([0.8823, 0.9200], abs=0.01)


def test_backtest_writes_artifacts(prices, tmp_path, capsys):
    out_dir = tmp_path / "bt"
    code, out, _ = run(
        ["backtest", "--predictor", "adaptive:window=20,rank=2,varphi=1.2", "--beta", "0.9",
         "--input", str(prices), "--output-dir", str(out_dir)], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["schema_version"] == 1 and summary["steps"] == 1579
    for name in ("trace.csv", "frequency.csv", "lil.csv", "windowed_frequency.csv"):
        assert (out_dir / name).exists()
    assert (out_dir / "trace.csv").read_text().startswith("k,prediction,realized,exceeded\n")


def test_returns_json_fields(prices, capsys):
    code, out, _ = run(["returns", "--input", str(prices), "--format", "json"], capsys)
    assert code == 0
    obs = json.loads(out)["observations"]
    assert set(obs[0]) == {"date", "return"} and len(obs) == 1599


def test_byte_identical_outputs(prices, tmp_path, capsys):
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        code, out, _ = run(["report", "--predictor", "adaptive", "--beta", "0.9", "--seed", "5",
                            "--reps", "10000", "--stride", "500", "--input", str(prices),
                            "--output-dir", str(d)], capsys)
        assert code == 0
        outs.append((out, (d / "trace.csv").read_bytes(), (d / "report.json").read_bytes()))
    assert outs[0] == outs[1]
    rep = json.loads(outs[0][0])
    assert {"calibration", "independence", "windowed_independence", "compare"} <= set(rep)


def test_simulate_pipes_into_independence(capsys, monkeypatch):
    code, sim, _ = run(["simulate", "markov", "--beta", "0.9", "--theta", "0.9", "--length", "1500",
                        "--seed", "1"], capsys)
    assert code == 0
    code, out, _ = run(["independence", "--beta", "0.9", "--gamma", "0.05", "--seed", "7"], capsys,
                       stdin=sim, monkeypatch=monkeypatch)
    assert code == 0
    res = json.loads(out)
    assert res["counts"]["n"] == 1499
    t1, t2 = res["interval"]
    assert res["reject"] == (not t1 <= res["theta_hat"] <= t2)


def test_independence_reads_table(tmp_path, capsys, monkeypatch):
    table = tmp_path / "t.csv"
    run(["ci-table", "--beta", "0.9", "--lengths", "500", "--gammas", "0.05", "--reps", "10000",
         "--seed", "7", "--output", str(table)], capsys)
    _, sim, _ = run(["simulate", "markov", "--beta", "0.9", "--theta", "0.3", "--length", "500",
                     "--seed", "2"], capsys)
    code, out, _ = run(["independence", "--beta", "0.9", "--table", str(table)], capsys,
                       stdin=sim, monkeypatch=monkeypatch)
    assert code == 0 and json.loads(out)["reject"]


def test_sv_simulation_to_backtest_and_calibrate(tmp_path, capsys, monkeypatch):
    oracle = tmp_path / "oracle.json"
    _, sim, _ = run(["simulate", "sv", "--length", "2000", "--seed", "3", "--oracle", str(oracle)], capsys)
    assert sim == sample_sv(SVSpec(2000, 3)).returns.to_csv()
    assert len(json.loads(oracle.read_text())["quantiles"]["0.9"]) == 2000
    code, _, _ = run(["backtest", "--predictor", "rolling", "--beta", "0.9", "--output-dir", str(tmp_path)],
                     capsys, stdin=sim, monkeypatch=monkeypatch)
    assert code == 0
    trace = (tmp_path / "trace.csv").read_text()
    code, out, _ = run(["calibrate", "--kind", "lil", "--beta", "0.9"], capsys, stdin=trace,
                       monkeypatch=monkeypatch)
    assert code == 0 and json.loads(out)["kind"] == "lil"


def test_compare_csv(tmp_path, capsys):
    y = sample_sv(SVSpec(1500, 1)).returns
    (tmp_path / "y.csv").write_text(y.to_csv())
    for name, spec in (("a", "adaptive"), ("b", "nonsense:low=-0.06,high=0.06")):
        run(["backtest", "--predictor", spec, "--beta", "0.9", "--seed", "1", "--input",
             str(tmp_path / "y.csv"), "--output-dir", str(tmp_path / name)], capsys)
    code, out, _ = run(["compare", "--a", str(tmp_path / "a" / "trace.csv"), "--b",
                        str(tmp_path / "b" / "trace.csv"), "--beta", "0.9"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "j,xA,xB,preferred"
    assert sum(l.endswith(",A") for l in lines[1:]) / (len(lines) - 1) >= 0.95


def test_tail_fit_and_cvar(tmp_path, capsys):
    _, sim, _ = run(["simulate", "pareto", "--kappa", "2.5", "--length", "5000", "--seed", "10"], capsys)
    path = tmp_path / "p.csv"
    path.write_text(sim)
    code, out, _ = run(["tail-fit", "--input", str(path), "--side", "right"], capsys)
    assert code == 0 and abs(json.loads(out)["kappa"] - 2.5) <= 0.3
    for method in ("empirical", "cmvar", "truncated", "power-tail"):
        code, out, _ = run(["cvar", "--input", str(path), "--beta", "0.9", "--eta", "0.99",
                            "--method", method], capsys)
        assert code == 0
        assert json.loads(out)["method"] == method
    code, _, err = run(["cvar", "--input", str(path), "--beta", "0.9", "--eta", "0.99", "--method",
                        "power-tail", "--kappa", "1.0"], capsys)
    assert code == 1 and "mean" in err


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for a small table\nbeta = 0.95\nlengths = 250\ngammas = 0.5\nreps = 10000\nseed = 7\n")
    _, from_cfg, _ = run(["--config", str(cfg), "ci-table"], capsys)
    _, flagged, _ = run(["--config", str(cfg), "ci-table", "--beta", "0.9"], capsys)
    _, plain, _ = run(["ci-table", "--beta", "0.9", "--lengths", "250", "--gammas", "0.5",
                       "--reps", "10000", "--seed", "7"], capsys)
    assert flagged == plain
    assert from_cfg != plain


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    code, _, _ = run(["--config", str(cfg), "ci-table"], capsys)
    assert code == 1


@pytest.mark.parametrize(
    "argv",
    [["frobnicate"], ["ci-table", "--beta", "0.9", "--no-such-flag"], ["ci-table", "--beta", "0.9"],
     ["simulate", "markov", "--beta", "0.9", "--theta", "0.5"], ["independence", "--beta", "0.9"]],
)
def test_usage_errors_exit_one(argv, capsys, monkeypatch):
    monkeypatch.setattr(sys, "stdin", io.StringIO("k,a\n1,0\n2,1\n"))
    assert cli.main(argv) == 1


def test_invalid_price_exits_one(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("date,price\n2000-01-07,6000\n2000-01-14,-5\n")
    code, _, err = run(["returns", "--input", str(p)], capsys)
    assert code == 1 and "line 3" in err


def test_missing_file_exits_two(capsys):
    assert run(["returns", "--input", "/nonexistent/prices.csv"], capsys)[0] == 2


def test_console_script_pipe(tmp_path):
    sim = subprocess.run(
        [sys.executable, "-m", "preqrisk", "simulate", "markov", "--beta", "0.9", "--theta", "0.9",
         "--length", "1000", "--seed", "4"], capture_output=True, text=True, check=True)
    res = subprocess.run(
        [sys.executable, "-m", "preqrisk", "independence", "--beta", "0.9", "--seed", "7", "--reps", "10000"],
        input=sim.stdout, capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["schema_version"] == 1
