import pytest
import yaml

from marketeco.agents import ConfigError
from marketeco.config import (
    ParticipantSpec, SimConfig, config_from_dict, default_config, dump_config, load_config,
)


def test_default_shares_sum_to_one():
    cfg = default_config()
    total = sum(p.wealth_share for p in cfg.participants) + cfg.strategy.wealth_share
    assert total == pytest.approx(1.0, abs=1e-12)
    assert cfg.strategy.wealth_share == 0.001


def test_round_trip(tmp_path):
    cfg = default_config(t_max=77, seed=5)
    path = tmp_path / "c.yaml"
    dump_config(cfg, path)
    back = load_config(path)
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_digest_changes_with_seed():
    assert default_config(seed=1).digest() != default_config(seed=2).digest()


@pytest.mark.parametrize("raw,msg", [
    ({"participants": [{"id": "a", "style": "index", "wealth_share": 0.5}], "strategy": None}, "sum"),
    ({"bogus": 1}, "unknown top-level"),
    ({"schema_version": 9}, "schema_version"),
    ({"retail": {"theta": 0}}, "theta"),
    ({"flows": {"windw": 3}}, "unknown keys"),
    ({"participants": [{"id": "a", "style": "quant", "wealth_share": 0.999}]}, "style"),
    ({"t_max": 0}, "t_max"),
])
def test_config_errors(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        config_from_dict(raw)


def test_duplicate_ids():
    with pytest.raises(ConfigError, match="unique"):
        SimConfig(participants=(ParticipantSpec("a", "index", 0.5), ParticipantSpec("a", "value", 0.5)))


def test_relative_csv_path(tmp_path):
    (tmp_path / "sub").mkdir()
    path = tmp_path / "sub" / "c.yaml"
    path.write_text(yaml.safe_dump({"data": {"csv": "f.csv"}}))
    assert load_config(path).data.csv == str(tmp_path / "sub" / "f.csv")


def test_unreadable(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("t_max: [1,\n")
    with pytest.raises(ConfigError):
        load_config(bad)
