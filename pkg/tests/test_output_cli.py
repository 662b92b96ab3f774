import csv
import json

import numpy as np
import pytest
import yaml

from marketeco import cli
from marketeco.config import default_roster
from marketeco.output import OutputSchemaError, read_series, write_series


def small_yaml(tmp_path, t_max=40, **extra):
    raw = {
        "t_max": t_max,
        "data": {"n_stocks": 5, "n_quarters": 8},
        "participants": [
            {"id": p.id, "style": p.style, "wealth_share": p.wealth_share, "beta": p.beta}
            for p in default_roster()
        ],
    }
    raw.update(extra)
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_series_roundtrip(tmp_path):
    vals = np.array([[1.5, 2.0], [0.1, 1e-17]])
    write_series(tmp_path / "s.csv", [1, 2], ["A", "B"], vals, "stock_id")
    days, ids, mat = read_series(tmp_path / "s.csv", "stock_id")
    assert list(days) == [1, 2] and ids == ["A", "B"]
    assert np.array_equal(mat, vals)


def test_read_series_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("day,stock_id,price\n1,A,1.0\n")
    with pytest.raises(OutputSchemaError):
        read_series(bad)
    bad.write_text("day,stock_id,value\n1,A,1.0\n1,B,2.0\n2,A,1.0\n")
    with pytest.raises(OutputSchemaError, match="missing"):
        read_series(bad)
    with pytest.raises(OutputSchemaError):
        read_series(bad, "participant_id")


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["run", "--config", str(small_yaml(tmp_path)), "--out", str(out),
                     "--emit-diagnostics"])
    assert code == 0
    for name in ("prices.csv", "volumes.csv", "wealth.csv", "nav.csv", "events.csv",
                 "diagnostics.csv", "config.yaml", "manifest.json", "prices.svg"):
        assert (out / name).exists(), name
    assert rows(out / "prices.csv")[0] == ["day", "stock_id", "value"]
    assert rows(out / "nav.csv")[0] == ["day", "participant_id", "value"]
    assert rows(out / "events.csv")[0] == ["day", "participant_id", "event_type", "amount"]
    days, ids, prices = read_series(out / "prices.csv")
    assert list(days) == list(range(1, 41)) and len(ids) == 5
    assert np.all(prices > 0)
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 0 and man["days_completed"] == 40 and not man["terminated_early"]
    assert len(man["config_sha256"]) == 64
    # the written config reproduces the run
    again = tmp_path / "again"
    assert cli.main(["run", "--config", str(out / "config.yaml"), "--out", str(again),
                     "--no-plots"]) == 0
    assert (again / "prices.csv").read_bytes() == (out / "prices.csv").read_bytes()


def test_runs_are_byte_identical(tmp_path):
    cfg = str(small_yaml(tmp_path))
    for name in ("a", "b"):
        assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / name), "--seed", "5"]) == 0
    for name in ("prices.csv", "volumes.csv", "wealth.csv", "nav.csv", "events.csv",
                 "prices.svg", "nav.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env_out"))
    assert cli.main(["run", "--config", str(small_yaml(tmp_path, t_max=5)), "--no-plots"]) == 0
    assert (tmp_path / "env_out" / "prices.csv").exists()


@pytest.mark.parametrize("text", ["t_max: [oops", "t_max: 0", "bogus_key: 1",
                                  "participants:\n  - {id: x, style: wizard, wealth_share: 1.0}"])
def test_bad_config_exits_2(tmp_path, text, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_seed_sweep(tmp_path):
    out = tmp_path / "sweep"
    assert cli.main(["run", "--config", str(small_yaml(tmp_path, t_max=5)), "--seeds", "2..4",
                     "--out", str(out), "--no-plots"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["seed_2", "seed_3", "seed_4"]
    a = (out / "seed_2" / "prices.csv").read_bytes()
    assert a != (out / "seed_3" / "prices.csv").read_bytes()


@pytest.mark.parametrize("text", ["x", "5..2", "1..b"])
def test_bad_seed_range(text):
    with pytest.raises(cli.UsageError):
        cli.parse_seeds(text)
    assert cli.parse_seeds("0..2") == [0, 1, 2]


def test_runtime_error_exits_3_with_state_dump(tmp_path):
    path = small_yaml(tmp_path, t_max=5, strategy=None, participants=[
        {"id": "idx", "style": "index", "wealth_share": 1.0, "beta": 1.0, "cash_fraction": 0.5}])
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(path), "--out", str(out)]) == 3
    dump = json.loads((out / "state_dump.json").read_text())
    assert dump["participants"][0]["id"] == "idx"


def test_strategy_summary_values():
    s = cli.strategy_summary([1.0, 1.1, 0.99, 1.21])
    assert s["total_return"] == pytest.approx(0.21)
    assert s["max_drawdown"] == pytest.approx(0.1)
    r = np.array([0.1, -0.1, 1.21 / 0.99 - 1])
    assert s["annualized_volatility"] == pytest.approx(r.std(ddof=1) * np.sqrt(252))


def test_test_strategy_buy_and_hold(tmp_path):
    out = tmp_path / "strat"
    code = cli.main(["test-strategy", "--config", str(small_yaml(tmp_path)),
                     "--strategy", "buy_and_hold:AAPL", "--out", str(out), "--no-plots"])
    assert code == 0
    table = rows(out / "strategy_summary.csv")
    assert table[0] == ["strategy", "metric", "value"]
    assert {r[1] for r in table[1:]} == {"total_return", "annualized_volatility", "max_drawdown"}
    _, ids, nav = read_series(out / "nav.csv")
    total = float(next(r[2] for r in table[1:] if r[1] == "total_return"))
    assert total == pytest.approx(nav[-1, ids.index("strategy")] - 1.0)


def test_test_strategy_unknown_rule(tmp_path, capsys):
    code = cli.main(["test-strategy", "--config", str(small_yaml(tmp_path)),
                     "--strategy", "nosuch", "--out", str(tmp_path / "o")])
    assert code == 2
    assert "buy_and_hold" in capsys.readouterr().err


def test_validate_gbm_fails_and_writes_report(tmp_path):
    rng = np.random.default_rng(0)
    n = 3000
    prices = 100 * np.exp(np.cumsum(rng.normal(0, 0.01, n)))
    volumes = rng.uniform(1, 2, n)
    write_series(tmp_path / "p.csv", range(1, n + 1), ["X"], prices[:, None], "stock_id")
    write_series(tmp_path / "v.csv", range(1, n + 1), ["X"], volumes[:, None], "stock_id")
    out = tmp_path / "rep"
    code = cli.main(["validate", "--prices", str(tmp_path / "p.csv"),
                     "--volumes", str(tmp_path / "v.csv"), "--out", str(out)])
    # Gaussian returns have no heavy tails and no volatility clustering
    assert code == 1
    table = {r[0]: r for r in rows(out / "stylized_facts.csv")[1:]}
    assert table["abs_return_acf_share"][2] == "fail"
    assert (out / "acf_returns.svg").exists() and (out / "return_distribution.svg").exists()


def test_validate_short_series_is_insufficient(tmp_path):
    write_series(tmp_path / "p.csv", range(1, 11), ["X"], np.linspace(1, 2, 10)[:, None], "stock_id")
    write_series(tmp_path / "v.csv", range(1, 11), ["X"], np.ones((10, 1)), "stock_id")
    out = tmp_path / "rep"
    code = cli.main(["validate", "--prices", str(tmp_path / "p.csv"),
                     "--volumes", str(tmp_path / "v.csv"), "--out", str(out), "--no-plots"])
    assert code == 1
    verdicts = {r[2] for r in rows(out / "stylized_facts.csv")[1:] if r[2]}
    assert verdicts == {"insufficient data"}


def test_validate_unknown_stock(tmp_path):
    write_series(tmp_path / "p.csv", [1, 2], ["X"], np.ones((2, 1)), "stock_id")
    code = cli.main(["validate", "--prices", str(tmp_path / "p.csv"),
                     "--volumes", str(tmp_path / "p.csv"), "--stock", "Y",
                     "--out", str(tmp_path / "o")])
    assert code == 2


def test_synth_data(tmp_path):
    out = tmp_path / "d" / "fund.csv"
    assert cli.main(["synth-data", "--stocks", "4", "--quarters", "6", "--out", str(out)]) == 0
    body = rows(out)
    assert len(body) == 1 + 4 * 6
    cfg = small_yaml(tmp_path, t_max=5, data={"csv": str(out)})
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--no-plots"]) == 0
