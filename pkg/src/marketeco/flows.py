"""Investment flows, interest and dividends, and solvency checks.

All functions mutate the participants they are given and return the
resulting events, so that the change in total system cash can be
reconciled exactly against the event log.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

FLOW_STYLES = ("strategy", "value", "blend", "growth", "index")

TRADING_DAYS = 252


@dataclass(frozen=True)
class FlowConfig:
    """Linear flow-performance relation: flow = (intercept + slope * x) * W,
    where x is the trailing-window return in excess of the market index,
    annualised linearly (scaled by 252 / window)."""

    slope_b: float = 0.125
    intercept_a: float = 0.0
    window: int = 63
    frequency: int = 21
    enabled: bool = True

    def __post_init__(self):
        if self.window < 1 or self.frequency < 1:
            raise ValueError("flow window and frequency must be >= 1")


@dataclass(frozen=True)
class CashFlowConfig:
    interest_rate: float = 0.0001  # per day
    pay_dividends: bool = True

    def __post_init__(self):
        if self.interest_rate < 0:
            raise ValueError("interest_rate must be >= 0")


@dataclass(frozen=True)
class Event:
    day: int
    participant_id: str
    event_type: str
    amount: float


def trailing_return(series, window: int) -> float | None:
    if len(series) <= window:
        return None
    return series[-1] / series[-1 - window] - 1.0


def flow_amount(excess_return: float, wealth: float, cfg: FlowConfig) -> float:
    return (cfg.intercept_a + cfg.slope_b * excess_return) * wealth


def investment_flows(participants, nav_history, index_history, cfg: FlowConfig, day, prices):
    """Performance-chasing external flows for funds (not retail).

    ``nav_history`` maps participant id to its per-unit NAV series and
    ``index_history`` is the market-cap series; both end at ``day``.
    """
    events = []
    if not cfg.enabled or day % cfg.frequency:
        return events
    market = trailing_return(index_history, cfg.window)
    if market is None:
        log.info("day %d: not enough history for investment flows", day)
        return events
    for p in participants:
        if p.style not in FLOW_STYLES or not p.active:
            continue
        own = trailing_return(nav_history[p.id], cfg.window)
        if own is None:
            log.info("day %d: %s lacks NAV history, no flow", day, p.id)
            continue
        excess = (own - market) * TRADING_DAYS / cfg.window
        amount = flow_amount(excess, p.wealth(prices), cfg)
        p.cash += amount
        events.append(Event(day, p.id, "flow", amount))
    return events


def cash_flows(participants, view, cfg: CashFlowConfig, day, schedule, stock_ids):
    """Interest on cash (charged on negative balances too) and quarterly
    dividends paid on each stock's announcement day."""
    events = []
    paying = []
    if cfg.pay_dividends:
        for s, sid in enumerate(stock_ids):
            q = schedule.announces_on(sid, day)
            if q is not None and view.latest_announced[sid].fiscal_quarter == q:
                dps = view.latest_announced[sid].dividend_per_share
                if dps > 0:
                    paying.append((s, dps))
    for p in participants:
        if not p.active:
            continue
        interest = p.cash * cfg.interest_rate
        if interest:
            p.cash += interest
            events.append(Event(day, p.id, "interest", interest))
        if paying:
            div = sum(p.positions[s] * dps for s, dps in paying)
            if div:
                p.cash += div
                events.append(Event(day, p.id, "dividend", div))
    return events


class AllInsolvent(RuntimeError):
    pass


def _buy_in(participants, victim, shares, prices, day) -> Event:
    """Cover a short position by taking ``shares`` pro rata from the other
    long holders at ``prices``; they are paid in cash, so no wealth moves."""
    paid = 0.0
    others = [q for q in participants if q is not victim]
    longs = np.sum([np.maximum(q.positions, 0.0) for q in others], axis=0)
    frac = np.divide(shares, longs, out=np.zeros_like(shares), where=longs > 0)
    for q in others:
        take = np.maximum(q.positions, 0.0) * frac
        q.positions = q.positions - take
        q.cash += float(take @ prices)
        paid += float(take @ prices)
    victim.positions = victim.positions + shares * (longs > 0)
    victim.cash -= paid
    return Event(day, "market", "buy_in", 0.0)


def check_solvency(participants, prices, day):
    """Deactivate participants with non-positive wealth.

    Positions are sold at ``prices`` into cash, so wealth is unchanged at
    the moment of liquidation; the freed shares are picked up by the
    remaining participants at the next clearing.
    """
    events = []
    prices = np.asarray(prices, dtype=float)
    for p in participants:
        if not p.active:
            continue
        w = p.wealth(prices)
        if w <= 0:
            short = np.minimum(p.positions, 0.0)
            if short.any():
                events.append(_buy_in(participants, p, -short, prices, day))
            proceeds = float(p.positions @ prices)
            p.cash += proceeds
            p.positions = np.zeros_like(p.positions)
            p.active = False
            events.append(Event(day, p.id, "insolvency", proceeds))
            log.warning("day %d: %s insolvent (W=%.6g)", day, p.id, w)
    if participants and not any(p.active for p in participants):
        raise AllInsolvent(f"day {day}: every participant is insolvent")
    return events
