"""Daily simulation loop.

Each day runs, in order: fundamentals announcement, scores, trading
signals, demand, market clearing, order execution, investment flows,
interest and dividends, solvency.

Random numbers come from one root ``numpy.random.SeedSequence(seed)``
spawned into one child stream per participant, in roster order; a
participant's stream is never shared, so results do not depend on the
order or thread in which participants are evaluated.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import agents
from .agents import ConfigError, ParticipantState
from .clearing import ClearingError, DemandFunction, clear_stock, coupled_prices, execute_orders
from .config import SimConfig
from .data import AnnouncementSchedule, load_fundamentals, public_view, synthesize_fundamentals
from .flows import AllInsolvent, Event, cash_flows, check_solvency, investment_flows
from .scoring import composite_scores

log = logging.getLogger(__name__)

ACCOUNTING_RTOL = 1e-9
PRICE_AGREEMENT_RTOL = 1e-10


class SimulationError(RuntimeError):
    """Internal invariant broken; ``state`` holds the offending market state."""

    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


@dataclass
class MarketState:
    day: int
    prices: np.ndarray
    supply: np.ndarray
    participants: list
    ou_levels: np.ndarray
    ou_mu: np.ndarray
    units: np.ndarray
    nav_history: dict
    index_history: list
    rngs: dict
    events: list = field(default_factory=list)

    def total_cash(self) -> float:
        return float(sum(p.cash for p in self.participants))

    def wealth(self) -> np.ndarray:
        return np.array([p.wealth(self.prices) for p in self.participants])


@dataclass
class SimulationOutput:
    stock_ids: list
    participant_ids: list
    days: np.ndarray
    prices: np.ndarray
    volumes: np.ndarray
    wealth: np.ndarray
    nav: np.ndarray
    events: list
    diagnostics: list
    scores: list
    burn_in: int = 0
    terminated_early: bool = False


def load_table(cfg: SimConfig):
    if cfg.data.csv:
        return load_fundamentals(cfg.data.csv)
    return synthesize_fundamentals(
        cfg.data.n_stocks, cfg.data.n_quarters, cfg.data.seed, cfg.data.dynamics
    )


def _merge_roster(cfg: SimConfig):
    """Fold ETFs into the index fund and international funds equally into
    the three active styles. Returns a list of dicts."""
    roster = [dict(vars(p)) for p in cfg.participants if p.style not in ("etf", "international")]
    by_style = {}
    for r in roster:
        by_style.setdefault(r["style"], r)
    for p in cfg.participants:
        if p.style == "etf":
            if "index" not in by_style:
                raise ConfigError("etf participants need an index participant to merge into")
            by_style["index"]["wealth_share"] += p.wealth_share
        elif p.style == "international":
            missing = [s for s in agents.ACTIVE_STYLES if s not in by_style]
            if missing:
                raise ConfigError(f"international funds need participants of styles {missing}")
            for s in agents.ACTIVE_STYLES:
                by_style[s]["wealth_share"] += p.wealth_share / 3.0
    if cfg.strategy is not None:
        s = cfg.strategy
        roster.append(dict(id="strategy", style="strategy", wealth_share=s.wealth_share,
                           lam=s.lam, beta=s.beta, k=None, cash_fraction=s.cash_fraction))
    return roster


def _target_equity_fraction(spec, retail_cfg):
    base = retail_cfg.equity_share if spec["style"] == "retail" else 1.0
    return spec["beta"] * spec["lam"] * base


class Simulation:
    """Owns the market state and advances it one day at a time."""

    def __init__(self, cfg: SimConfig, table=None, rule=None):
        """``rule`` overrides the configured strategy name with a callable
        ``rule(day, view, scores, prices, state) -> weights``."""
        self.cfg = cfg
        self.table = load_table(cfg) if table is None else table
        self.stock_ids = list(self.table.stock_ids)
        self.schedule = AnnouncementSchedule.uniform(self.stock_ids)
        self.n = len(self.stock_ids)
        if rule is not None and cfg.strategy is None:
            raise ConfigError("a strategy rule needs a strategy entry in the config")
        self.rule = rule
        if cfg.strategy is not None and rule is None:
            self.rule = agents.resolve_strategy(cfg.strategy.rule, self.stock_ids)
        self._pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
        self.state = self.initialize()

    # -- initialisation ----------------------------------------------------
    def initialize(self) -> MarketState:
        cfg = self.cfg
        prices = self.table.initial_prices()
        supply = self.table.initial_shares()
        market_value = float(prices @ supply)
        roster = _merge_roster(cfg)
        seeds = np.random.SeedSequence(cfg.seed).spawn(len(roster))
        participants, rngs = [], {}
        for spec, ss in zip(roster, seeds):
            equity = spec["wealth_share"] * market_value
            frac = spec["cash_fraction"]
            if frac is None:
                a = _target_equity_fraction(spec, cfg.retail)
                frac = (1.0 - a) / a
            style = spec["style"]
            k = spec.get("k")
            if style in agents.ACTIVE_STYLES and k is None:
                k = max(2, round(self.n / 3)) if style == "blend" else max(1, round(self.n / 3))
                if style == "blend" and k % 2:
                    k += 1
            if style in agents.ACTIVE_STYLES:
                if not 1 <= k <= self.n or (style == "blend" and k % 2):
                    raise ConfigError(f"{spec['id']}: k={k} invalid for {self.n} stocks")
            p = ParticipantState(
                id=spec["id"], style=style, cash=equity * frac,
                positions=spec["wealth_share"] * supply,
                lam=spec["lam"], beta=spec["beta"], k=k,
            )
            participants.append(p)
            rngs[p.id] = np.random.default_rng(ss)

        mu = cfg.retail.mu
        if mu is None:
            mu = 1.0 / self.n
        elif isinstance(mu, str):
            mu = prices * supply / market_value
        mu = np.asarray(mu, dtype=float)
        if mu.ndim and mu.size != self.n:
            raise ConfigError(f"retail mu has {mu.size} entries for {self.n} stocks")
        mu = np.broadcast_to(mu, (self.n,)).copy()
        wealth = np.array([p.wealth(prices) for p in participants])
        units = wealth.copy()
        units[units <= 0] = 1.0
        return MarketState(
            day=0, prices=prices, supply=supply, participants=participants,
            ou_levels=mu.copy(), ou_mu=mu, units=units,
            nav_history={p.id: [w / u] for p, w, u in zip(participants, wealth, units)},
            index_history=[market_value], rngs=rngs,
        )

    # -- one day -----------------------------------------------------------
    def _signal(self, p, day, view, scores, prices):
        st = self.state
        if not p.active:
            return np.zeros(self.n)
        if p.style == "value":
            return agents.signal_value(scores, p.k)
        if p.style == "growth":
            return agents.signal_growth(scores, p.k)
        if p.style == "blend":
            return agents.signal_blend(scores, p.k)
        if p.style == "index":
            return agents.signal_index(prices, st.supply)
        if p.style == "retail":
            st.ou_levels, w = agents.signal_retail(
                st.ou_levels, self.cfg.retail, st.ou_mu, st.rngs[p.id]
            )
            return w
        if p.style == "strategy":
            return agents.signal_strategy(self.rule, day, view, scores, prices, p, self.n)
        raise ConfigError(f"no signal rule for style {p.style!r}")

    def _clear_one(self, s, beta, phi, lam, cash, positions, lin_prices):
        # wealth marked at the joint solution for every other stock
        pos_s = positions[:, s]
        fixed = cash + positions @ lin_prices - pos_s * lin_prices[s]
        demand = DemandFunction(
            beta=beta, phi=phi[:, s], lam=lam,
            wealth_fixed=fixed, position=pos_s, wealth_slope=pos_s,
        )
        return clear_stock(demand, float(self.state.supply[s]), float(self.state.prices[s]))

    def step(self):
        st = self.state
        cfg = self.cfg
        day = st.day + 1
        prev = st.prices
        cash_before = st.total_cash()
        events = []

        view = public_view(self.table, self.schedule, day)
        scores = composite_scores(view, prev, self.table)
        parts = st.participants
        phi = np.vstack([self._signal(p, day, view, scores, prev) for p in parts])
        beta = np.array([p.beta for p in parts])
        lam = np.array([p.lam for p in parts])
        coef = (beta * lam)[:, None] * phi
        cash = np.array([p.cash for p in parts])
        positions = np.vstack([p.positions for p in parts])
        traded = coef.any(axis=0)

        try:
            lin = coupled_prices(coef, cash, positions, st.supply, prev, traded)
            idx = np.flatnonzero(traded)
            job = lambda s: self._clear_one(s, beta, phi, lam, cash, positions, lin)  # noqa: E731
            results = list(self._pool.map(job, idx)) if self._pool else [job(s) for s in idx]
        except ClearingError as exc:
            raise SimulationError(f"day {day}: {exc}", st) from exc
        prices = prev.copy()
        diags = []
        for s, res in zip(idx, results):
            if abs(res.price - lin[s]) > PRICE_AGREEMENT_RTOL * lin[s]:
                raise SimulationError(
                    f"day {day}: {self.stock_ids[s]} per-stock price {res.price!r} "
                    f"disagrees with joint solution {lin[s]!r}", st)
            prices[s] = res.price
            diags.append((day, self.stock_ids[s], res.iterations, res.residual, False))
        for s in np.flatnonzero(~traded):
            diags.append((day, self.stock_ids[s], 0, 0.0, True))

        free = st.supply - positions.sum(axis=0)
        absorbed = float(np.where(traded & (free > 0), free, 0.0) @ prices)
        if absorbed:
            events.append(Event(day, "market", "absorption", -absorbed))
        try:
            new_pos, new_cash, volume = execute_orders(coef, cash, positions, prices, st.supply)
        except ClearingError as exc:
            raise SimulationError(f"day {day}: {exc}", st) from exc
        for p, pos, c in zip(parts, new_pos, new_cash):
            p.positions = pos
            p.cash = float(c)
        st.prices = prices
        st.day = day

        # unit NAV before external flows
        w_pre = st.wealth()
        nav_pre = w_pre / st.units
        for p, v in zip(parts, nav_pre):
            st.nav_history[p.id].append(float(v))
        st.index_history.append(float(prices @ st.supply))
        flow_events = investment_flows(parts, st.nav_history, st.index_history, cfg.flows, day, prices)
        for ev in flow_events:
            i = next(j for j, p in enumerate(parts) if p.id == ev.participant_id)
            st.units[i] += ev.amount / nav_pre[i]
        events += flow_events
        events += cash_flows(parts, view, cfg.cash_flows, day, self.schedule, self.stock_ids)
        try:
            events += check_solvency(parts, prices, day)
        except AllInsolvent:
            st.events += events
            raise

        wealth = st.wealth()
        nav = np.where(st.units > 0, wealth / st.units, 0.0)
        for p, v in zip(parts, nav):
            st.nav_history[p.id][-1] = float(v)

        expected = sum(ev.amount for ev in events)
        delta = st.total_cash() - cash_before
        scale = max(abs(cash_before), float(np.abs(wealth).sum()), 1.0)
        if abs(delta - expected) > ACCOUNTING_RTOL * scale:
            raise SimulationError(
                f"day {day}: cash change {delta!r} != event total {expected!r}", st)
        st.events += events
        return scores, volume, wealth, nav, diags

    # -- whole run ---------------------------------------------------------
    def run(self) -> SimulationOutput:
        cfg = self.cfg
        T = cfg.t_max
        n_p = len(self.state.participants)
        prices = np.empty((T, self.n))
        volumes = np.empty((T, self.n))
        wealth = np.empty((T, n_p))
        nav = np.empty((T, n_p))
        diagnostics, score_rows = [], []
        done = T
        terminated = False
        try:
            for t in range(T):
                try:
                    scores, vol, w, v, diags = self.step()
                except AllInsolvent as exc:
                    log.error("%s; stopping", exc)
                    done, terminated = t, True
                    break
                prices[t] = self.state.prices
                volumes[t] = vol
                wealth[t] = w
                nav[t] = v
                if cfg.emit_diagnostics:
                    diagnostics += diags
                if cfg.emit_scores:
                    score_rows.append((self.state.day, scores))
        finally:
            if self._pool:
                self._pool.shutdown()
        return SimulationOutput(
            stock_ids=self.stock_ids,
            participant_ids=[p.id for p in self.state.participants],
            days=np.arange(1, done + 1),
            prices=prices[:done], volumes=volumes[:done],
            wealth=wealth[:done], nav=nav[:done],
            events=list(self.state.events), diagnostics=diagnostics,
            scores=score_rows, burn_in=cfg.burn_in, terminated_early=terminated,
        )


def initialize(cfg: SimConfig, table=None) -> MarketState:
    return Simulation(cfg, table).state


def run(cfg: SimConfig, table=None, rule=None) -> SimulationOutput:
    return Simulation(cfg, table, rule).run()
