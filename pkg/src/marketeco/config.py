"""Simulation configuration and its YAML file format (schema version 1)."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .agents import ConfigError, RetailConfig
from .flows import CashFlowConfig, FlowConfig

SCHEMA_VERSION = 1
ROSTER_STYLES = ("value", "blend", "growth", "index", "etf", "international", "retail")


@dataclass(frozen=True)
class ParticipantSpec:
    id: str
    style: str
    wealth_share: float
    lam: float = 1.0
    beta: float = 1.0
    k: int | None = None
    # cash held at day 0 as a multiple of the initial equity; None picks the
    # level at which the participant already holds its target equity share
    cash_fraction: float | None = None


@dataclass(frozen=True)
class StrategySpec:
    rule: str = "equal_weight"
    wealth_share: float = 0.001
    lam: float = 1.0
    beta: float = 1.0
    cash_fraction: float | None = None


@dataclass(frozen=True)
class DataSpec:
    csv: str | None = None
    n_stocks: int = 21
    n_quarters: int = 84
    seed: int = 7
    dynamics: dict | None = None


@dataclass(frozen=True)
class SimConfig:
    t_max: int = 2520
    seed: int = 0
    data: DataSpec = field(default_factory=DataSpec)
    participants: tuple = ()
    retail: RetailConfig = field(default_factory=RetailConfig)
    flows: FlowConfig = field(default_factory=FlowConfig)
    cash_flows: CashFlowConfig = field(default_factory=CashFlowConfig)
    strategy: StrategySpec | None = None
    burn_in: int = 250
    emit_scores: bool = False
    emit_diagnostics: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        shares = [p.wealth_share for p in self.participants]
        if self.strategy is not None:
            shares.append(self.strategy.wealth_share)
        if any(s < 0 for s in shares):
            raise ConfigError("wealth shares must be >= 0")
        if abs(sum(shares) - 1.0) > 1e-9:
            raise ConfigError(f"initial wealth shares sum to {sum(shares):.12g}, not 1")
        ids = [p.id for p in self.participants] + (["strategy"] if self.strategy else [])
        if len(set(ids)) != len(ids):
            raise ConfigError("participant ids must be unique")
        for p in self.participants:
            if p.style not in ROSTER_STYLES:
                raise ConfigError(f"{p.id}: unknown style {p.style!r}")
        if sum(p.style == "retail" for p in self.participants) > 1:
            raise ConfigError("at most one retail participant")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def default_roster() -> tuple:
    """Tuned aggregate participants (see the README for how they were chosen)."""
    return (
        ParticipantSpec("index", "index", 0.22, beta=0.8),
        ParticipantSpec("value", "value", 0.006, beta=0.8, k=7),
        ParticipantSpec("blend", "blend", 0.006, beta=0.8, k=8),
        ParticipantSpec("growth", "growth", 0.02, beta=0.8, k=3),
        ParticipantSpec("retail", "retail", 0.747, beta=0.8),
    )


def default_config(**overrides) -> SimConfig:
    kw = dict(participants=default_roster(), strategy=StrategySpec())
    kw.update(overrides)
    return SimConfig(**kw)


def _build(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(raw: dict) -> SimConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = dict(raw)
    version = raw.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    kw = {}
    for key in ("t_max", "seed", "burn_in", "emit_scores", "emit_diagnostics", "workers"):
        if key in raw:
            kw[key] = raw.pop(key)
    kw["data"] = _build(DataSpec, raw.pop("data", None), "data")
    roster = raw.pop("participants", None)
    if roster is None:
        kw["participants"] = default_roster()
    else:
        if not isinstance(roster, list):
            raise ConfigError("participants: expected a list")
        kw["participants"] = tuple(
            _build(ParticipantSpec, p, f"participants[{i}]") for i, p in enumerate(roster)
        )
    retail = raw.pop("retail", None)
    if retail and isinstance(retail.get("mu"), list):
        retail = dict(retail, mu=tuple(retail["mu"]))
    kw["retail"] = _build(RetailConfig, retail, "retail")
    kw["flows"] = _build(FlowConfig, raw.pop("flows", None), "flows")
    kw["cash_flows"] = _build(CashFlowConfig, raw.pop("cash_flows", None), "cash_flows")
    if "strategy" in raw:
        s = raw.pop("strategy")
        kw["strategy"] = None if s is None else _build(StrategySpec, s, "strategy")
    else:
        kw["strategy"] = StrategySpec()
    if raw:
        raise ConfigError(f"unknown top-level keys {sorted(raw)}")
    try:
        return SimConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = config_from_dict(raw if raw is not None else {})
    if cfg.data.csv is not None and not Path(cfg.data.csv).is_absolute():
        cfg = cfg.replace(data=dataclasses.replace(cfg.data, csv=str(path.parent / cfg.data.csv)))
    return cfg


def dump_config(cfg: SimConfig, path) -> None:
    d = cfg.to_dict()
    Path(path).write_text(yaml.safe_dump(_plain(d), sort_keys=False), encoding="utf-8")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj
