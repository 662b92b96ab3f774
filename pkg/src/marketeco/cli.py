"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 usage or config error,
3 runtime simulation error (a state dump is written next to the output).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .agents import BUILTIN_STRATEGIES, ConfigError, StrategyError, resolve_strategy
from .config import StrategySpec, default_config, load_config
from .data import SchemaError, ValidationError, synthesize_fundamentals, write_fundamentals
from .engine import SimulationError, load_table, run
from .output import OutputSchemaError, dump_state, read_series, write_output
from .validation import INFO, PASS, Thresholds, stylized_report

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
OUT_ENV = "MARKETECO_OUT"
DEFAULT_OUT = "marketeco_out"

log = logging.getLogger("marketeco")


class UsageError(Exception):
    pass


def _default_out() -> str:
    return os.environ.get(OUT_ENV, DEFAULT_OUT)


def parse_seeds(text: str) -> list:
    """``"3"`` -> [3]; ``"0..9"`` -> [0, ..., 9] (inclusive)."""
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            return [int(text)]
        a, b = int(lo), int(hi)
    except ValueError:
        raise UsageError(f"bad seed range {text!r}; use N or A..B") from None
    if b < a:
        raise UsageError(f"empty seed range {text!r}")
    return list(range(a, b + 1))


def _load_cfg(args):
    cfg = load_config(args.config) if args.config else default_config()
    changes = {}
    if getattr(args, "t_max", None) is not None:
        changes["t_max"] = args.t_max
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    if getattr(args, "emit_scores", False):
        changes["emit_scores"] = True
    if getattr(args, "emit_diagnostics", False):
        changes["emit_diagnostics"] = True
    return cfg.replace(**changes) if changes else cfg


def _simulate(cfg, out_dir, plots: bool) -> int:
    out_dir = Path(out_dir)
    try:
        out = run(cfg)
    except SimulationError as exc:
        path = dump_state(exc.state, out_dir / "state_dump.json") if exc.state is not None else None
        print(f"error: {exc}", file=sys.stderr)
        if path:
            print(f"state dump: {path}", file=sys.stderr)
        return EXIT_RUNTIME
    write_output(out, cfg, out_dir)
    if plots:
        from .plotting import plot_run

        plot_run(out, out_dir)
    print(f"seed {cfg.seed}: {len(out.days)} days written to {out_dir}")
    return EXIT_OK


def _sweep(cfg, seeds, out_root, plots, jobs) -> int:
    out_root = Path(out_root)
    if len(seeds) == 1:
        return _simulate(cfg.replace(seed=seeds[0]), out_root, plots)
    tasks = [(cfg.replace(seed=s), out_root / f"seed_{s}", plots) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            codes = list(pool.map(_simulate, *zip(*tasks)))
    else:
        codes = [_simulate(*t) for t in tasks]
    return max(codes)


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    seeds = parse_seeds(args.seeds) if args.seeds else [args.seed if args.seed is not None else cfg.seed]
    return _sweep(cfg, seeds, args.out or _default_out(), not args.no_plots, args.jobs)


def strategy_summary(nav) -> dict:
    """Total return, annualised volatility of daily returns and maximum
    drawdown of a per-unit NAV series that starts at its initial value."""
    nav = np.asarray(nav, dtype=float)
    total = nav[-1] / nav[0] - 1.0
    rets = nav[1:] / nav[:-1] - 1.0 if nav.size > 1 else np.array([])
    vol = float(rets.std(ddof=1) * math.sqrt(252)) if rets.size > 1 else math.nan
    peak = np.maximum.accumulate(nav)
    mdd = float(np.max(1.0 - nav / peak))
    return {"total_return": float(total), "annualized_volatility": vol, "max_drawdown": mdd}


def cmd_test_strategy(args) -> int:
    cfg = _load_cfg(args)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    table = load_table(cfg)
    # fail early with the list of names
    resolve_strategy(args.strategy, table.stock_ids)
    base = cfg.strategy or StrategySpec()
    spec = dataclasses.replace(base, rule=args.strategy)
    if args.wealth_share is not None:
        spec = dataclasses.replace(spec, wealth_share=args.wealth_share)
    if cfg.strategy is None or spec.wealth_share != base.wealth_share:
        parts = _rescale_roster(cfg.participants, 1.0 - spec.wealth_share)
        cfg = cfg.replace(participants=parts, strategy=spec)
    else:
        cfg = cfg.replace(strategy=spec)
    if args.no_flows:
        cfg = cfg.replace(flows=dataclasses.replace(cfg.flows, enabled=False))
    out_dir = Path(args.out or _default_out())
    code = _simulate(cfg, out_dir, not args.no_plots)
    if code != EXIT_OK:
        return code
    _, ids, nav = read_series(out_dir / "nav.csv", "participant_id")
    series = np.concatenate([[1.0], nav[:, ids.index("strategy")]])
    summary = strategy_summary(series)
    with open(out_dir / "strategy_summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("strategy", "metric", "value"))
        for k, v in summary.items():
            w.writerow((args.strategy, k, repr(v)))
    for k, v in summary.items():
        print(f"{k}: {v:.6g}")
    return EXIT_OK


def _rescale_roster(participants, total):
    s = sum(p.wealth_share for p in participants)
    return tuple(dataclasses.replace(p, wealth_share=p.wealth_share * total / s) for p in participants)


def cmd_validate(args) -> int:
    _, ids, prices = read_series(args.prices, "stock_id")
    _, vids, volumes = read_series(args.volumes, "stock_id")
    if vids != ids or volumes.shape != prices.shape:
        raise OutputSchemaError("prices and volumes files cover different stocks or days")
    stock = args.stock or ids[0]
    if stock not in ids:
        raise UsageError(f"stock {stock!r} not in {args.prices}; have {', '.join(ids)}")
    j = ids.index(stock)
    p, v = prices[args.burn_in:, j], volumes[args.burn_in:, j]
    if np.any(~(p > 0)):
        raise OutputSchemaError("prices must be strictly positive")
    rep = stylized_report(p, v, Thresholds())
    out_dir = Path(args.out or _default_out())
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "stylized_facts.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("statistic", "value", "verdict"))
        for name, value, verdict in rep.rows():
            val = "" if value is None or (isinstance(value, float) and math.isnan(value)) else repr(value)
            w.writerow((name, val, verdict or ""))
    if not args.no_plots:
        from .plotting import plot_stylized_facts

        plot_stylized_facts(p, v, rep, out_dir, stock)
    for fact, verdict in rep.verdicts.items():
        if verdict != INFO:
            print(f"{fact}: {verdict}")
    judged = [x for x in rep.verdicts.values() if x != INFO]
    return EXIT_OK if judged and all(x == PASS for x in judged) else EXIT_FAIL


def cmd_synth_data(args) -> int:
    table = synthesize_fundamentals(args.stocks, args.quarters, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_fundamentals(table, out)
    print(f"wrote {len(table.stock_ids)} stocks x {args.quarters} quarters to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="marketeco", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def sim_flags(p):
        p.add_argument("--config", help="YAML config (default: built-in default config)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--t-max", type=int, dest="t_max")
        p.add_argument("--workers", type=int, help="threads for per-stock clearing")
        p.add_argument("--emit-scores", action="store_true")
        p.add_argument("--emit-diagnostics", action="store_true")
        p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("run", help="run a simulation and write its CSV output")
    sim_flags(p)
    p.add_argument("--seeds", help="seed range A..B, one subdirectory per seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel processes for seed sweeps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("test-strategy", help="run with a strategy fund and summarise its NAV")
    sim_flags(p)
    p.add_argument("--strategy", required=True,
                   help=f"built-in rule: {', '.join(BUILTIN_STRATEGIES)}")
    p.add_argument("--wealth-share", type=float)
    p.add_argument("--no-flows", action="store_true", help="disable investment flows")
    p.set_defaults(func=cmd_test_strategy)

    p = sub.add_parser("validate", help="stylized-facts report for one stock")
    p.add_argument("--prices", required=True)
    p.add_argument("--volumes", required=True)
    p.add_argument("--stock", help="stock id (default: first column)")
    p.add_argument("--burn-in", type=int, default=0, help="leading days to drop")
    p.add_argument("--out")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth-data", help="write a synthetic fundamentals CSV")
    p.add_argument("--stocks", type=int, default=21)
    p.add_argument("--quarters", type=int, default=84)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True, help="CSV file to write")
    p.set_defaults(func=cmd_synth_data)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, SchemaError, ValidationError, OutputSchemaError,
            StrategyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
