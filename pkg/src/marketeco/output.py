"""CSV writers and readers for simulation output.

Series files are long-format: one row per ``(day, entity)`` pair with the
columns ``day,<entity column>,value``. Floats are written with ``repr`` so
that equal runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION, SimConfig, dump_config

SERIES_FILES = {
    "prices": ("prices.csv", "stock_id"),
    "volumes": ("volumes.csv", "stock_id"),
    "wealth": ("wealth.csv", "participant_id"),
    "nav": ("nav.csv", "participant_id"),
}
EVENT_COLUMNS = ("day", "participant_id", "event_type", "amount")


class OutputSchemaError(ValueError):
    pass


def _fmt(x) -> str:
    return repr(float(x))


def write_series(path, days, ids, values, entity_col: str) -> None:
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("day", entity_col, "value"))
        for d, row in zip(days, values):
            for eid, v in zip(ids, row):
                w.writerow((int(d), eid, _fmt(v)))


def read_series(path, entity_col: str | None = None):
    """Read a long-format series file into ``(days, ids, matrix)``.

    Rows must form a complete day x entity grid.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise OutputSchemaError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 3 or header[0] != "day" or header[2] != "value":
            raise OutputSchemaError(f"{path}: expected header day,<entity>,value, got {header}")
        if entity_col is not None and header[1] != entity_col:
            raise OutputSchemaError(f"{path}: expected entity column {entity_col!r}, got {header[1]!r}")
        days, ids, cells = [], [], {}
        for n, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise OutputSchemaError(f"{path}:{n}: expected 3 fields, got {len(row)}")
            try:
                d, v = int(row[0]), float(row[2])
            except ValueError:
                raise OutputSchemaError(f"{path}:{n}: bad day or value {row}") from None
            if not days or days[-1] != d:
                days.append(d)
            if row[1] not in cells:
                ids.append(row[1])
                cells[row[1]] = {}
            cells[row[1]][d] = v
    if not days:
        raise OutputSchemaError(f"{path}: no data rows")
    try:
        mat = np.array([[cells[i][d] for i in ids] for d in days])
    except KeyError as exc:
        raise OutputSchemaError(f"{path}: missing value for {exc}") from None
    return np.array(days), ids, mat


def write_events(path, events) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for ev in events:
            w.writerow((ev.day, ev.participant_id, ev.event_type, _fmt(ev.amount)))


def versions() -> dict:
    import matplotlib
    import scipy
    import yaml

    from . import __version__

    return {
        "marketeco": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyyaml": yaml.__version__,
        "matplotlib": matplotlib.__version__,
    }


def write_output(out, cfg: SimConfig, out_dir) -> list:
    """Write the CSV set, the resolved config and a manifest.

    Returns the paths written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    series = {"prices": out.prices, "volumes": out.volumes, "wealth": out.wealth, "nav": out.nav}
    for key, (name, col) in SERIES_FILES.items():
        ids = out.stock_ids if col == "stock_id" else out.participant_ids
        write_series(out_dir / name, out.days, ids, series[key], col)
        written.append(out_dir / name)
    write_events(out_dir / "events.csv", out.events)
    written.append(out_dir / "events.csv")
    if cfg.emit_scores:
        path = out_dir / "scores.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("day", "stock_id", "value_score", "growth_score"))
            for day, sc in out.scores:
                for sid, v, g in zip(out.stock_ids, sc.value_score, sc.growth_score):
                    w.writerow((day, sid, _fmt(v), _fmt(g)))
        written.append(path)
    if cfg.emit_diagnostics:
        path = out_dir / "diagnostics.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("day", "stock_id", "iterations", "residual", "no_trade"))
            for day, sid, it, res, nt in out.diagnostics:
                w.writerow((day, sid, it, _fmt(res), int(nt)))
        written.append(path)
    dump_config(cfg, out_dir / "config.yaml")
    written.append(out_dir / "config.yaml")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "t_max": cfg.t_max,
        "days_completed": int(len(out.days)),
        "terminated_early": bool(out.terminated_early),
        "burn_in": cfg.burn_in,
        "stock_ids": list(out.stock_ids),
        "participant_ids": list(out.participant_ids),
        "files": [p.name for p in written],
        "versions": versions(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    written.append(out_dir / "manifest.json")
    return written


def dump_state(state, path) -> Path:
    """Write a JSON snapshot of a market state for post-mortem inspection."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    snap = {
        "day": int(state.day),
        "prices": [float(x) for x in state.prices],
        "supply": [float(x) for x in state.supply],
        "ou_levels": [float(x) for x in state.ou_levels],
        "participants": [
            {
                "id": p.id,
                "style": p.style,
                "active": bool(p.active),
                "cash": float(p.cash),
                "positions": [float(x) for x in p.positions],
            }
            for p in state.participants
        ],
    }
    path.write_text(json.dumps(snap, indent=2) + "\n", encoding="utf-8")
    return path
