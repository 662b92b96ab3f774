"""Market participants and their daily trading signals.

A signal is a vector of non-negative portfolio weights over stocks whose
sum is at most one; the remainder is held as cash.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

STYLES = ("value", "blend", "growth", "index", "retail", "strategy")
ACTIVE_STYLES = ("value", "blend", "growth")


class ConfigError(ValueError):
    pass


class StrategyError(RuntimeError):
    pass


@dataclass
class ParticipantState:
    id: str
    style: str
    cash: float
    positions: np.ndarray
    lam: float = 1.0
    beta: float = 1.0
    k: int | None = None
    active: bool = True

    def __post_init__(self):
        if self.style not in STYLES:
            raise ConfigError(f"{self.id}: unknown style {self.style!r}")
        if self.lam < 1:
            raise ConfigError(f"{self.id}: leverage must be >= 1")
        if not 0 < self.beta <= 1:
            raise ConfigError(f"{self.id}: aggression must lie in (0, 1]")
        self.positions = np.asarray(self.positions, dtype=float)

    def wealth(self, prices) -> float:
        return float(self.cash + self.positions @ np.asarray(prices, dtype=float))


@dataclass(frozen=True)
class RetailConfig:
    """Ornstein-Uhlenbeck parameters for retail latent weights.

    ``mu`` may be a scalar or one level per stock; ``None`` means the
    uniform level 1/n and ``"cap"`` the initial market-cap weights.
    ``equity_share`` caps the summed weights.
    """

    theta: float = 0.004
    sigma: float = 0.0013
    mu: float | tuple | str | None = None
    equity_share: float = 0.9

    def __post_init__(self):
        if not (self.theta > 0 and self.sigma > 0):
            raise ConfigError("retail theta and sigma must be > 0")
        if isinstance(self.mu, str) and self.mu != "cap":
            raise ConfigError(f"retail mu must be a number, a list or 'cap', got {self.mu!r}")
        if not 0 < self.equity_share <= 1:
            raise ConfigError("retail equity_share must lie in (0, 1]")


def _top_k(scores, k):
    scores = np.asarray(scores, dtype=float)
    n = scores.size
    if not 1 <= k <= n:
        raise ConfigError(f"k={k} must lie in [1, {n}]")
    # stable sort keeps lower index first among equal scores
    return np.argsort(-scores, kind="stable")[:k]


def signal_value(scores, k: int) -> np.ndarray:
    """Equal weight on the k stocks with the highest Value score."""
    w = np.zeros(len(scores.value_score))
    w[_top_k(scores.value_score, k)] = 1.0 / k
    return w


def signal_growth(scores, k: int) -> np.ndarray:
    w = np.zeros(len(scores.growth_score))
    w[_top_k(scores.growth_score, k)] = 1.0 / k
    return w


def signal_blend(scores, k: int) -> np.ndarray:
    """1/k on the top k/2 by Value and 1/k on the top k/2 by Growth; a stock
    in both sets carries 2/k."""
    if k < 2 or k % 2:
        raise ConfigError(f"blend k must be even and >= 2, got {k}")
    w = np.zeros(len(scores.value_score))
    w[_top_k(scores.value_score, k // 2)] += 1.0 / k
    w[_top_k(scores.growth_score, k // 2)] += 1.0 / k
    return w


def signal_index(prices, shares_outstanding) -> np.ndarray:
    caps = np.asarray(prices, dtype=float) * np.asarray(shares_outstanding, dtype=float)
    return caps / caps.sum()


def ou_step(x, mu, theta, sigma, eps, dt=1.0):
    """Exact one-step transition of dX = theta (mu - X) dt + sigma dW."""
    decay = math.exp(-theta * dt)
    scale = sigma * math.sqrt(-math.expm1(-2.0 * theta * dt) / (2.0 * theta))
    return mu + (np.asarray(x) - mu) * decay + scale * np.asarray(eps)


def retail_weights(levels, equity_share: float) -> np.ndarray:
    clamped = np.clip(levels, 0.0, None)
    total = clamped.sum()
    if total <= 0:
        return np.full(len(clamped), equity_share / len(clamped))
    return equity_share * clamped / total


def signal_retail(levels, cfg: RetailConfig, mu, rng, dt: float = 1.0):
    """Advance the latent OU levels one day and map them to weights.

    Returns ``(new_levels, weights)``.
    """
    eps = rng.standard_normal(len(levels))
    new = ou_step(levels, mu, cfg.theta, cfg.sigma, eps, dt)
    return new, retail_weights(new, cfg.equity_share)


# --- strategy fund -------------------------------------------------------

SUM_TOL = 1e-12  # rounding slack, e.g. 21 * (1/21) > 1

StrategyRule = Callable[..., "np.ndarray"]
"""Signature: ``rule(day, view, scores, prices, state) -> weights``."""


def validate_signal(raw, n: int, who: str = "strategy") -> np.ndarray:
    """Clamp negative weights to zero and rescale when the sum exceeds one.

    Raises StrategyError on non-finite or wrongly shaped output.
    """
    w = np.asarray(raw, dtype=float).reshape(-1)
    if w.size != n:
        raise StrategyError(f"{who}: expected {n} weights, got {w.size}")
    if not np.all(np.isfinite(w)):
        raise StrategyError(f"{who}: non-finite weights")
    if np.any(w < 0):
        log.warning("%s: negative weights clamped to 0", who)
        w = np.clip(w, 0.0, None)
    total = w.sum()
    if total > 1.0 + SUM_TOL:
        log.warning("%s: weights sum to %.6g > 1, rescaled", who, total)
        w = w / total
    return w


def signal_strategy(rule: StrategyRule, day, view, scores, prices, state, n: int) -> np.ndarray:
    """Run a user rule; on failure the fund holds only cash for the day."""
    try:
        return validate_signal(rule(day, view, scores, prices, state), n, state.id)
    except StrategyError as exc:
        log.error("day %s: %s; holding cash", day, exc)
        return np.zeros(n)


@dataclass(frozen=True)
class BuyAndHold:
    index: int

    def __call__(self, day, view, scores, prices, state):
        w = np.zeros(len(prices))
        w[self.index] = 1.0
        return w


@dataclass(frozen=True)
class TopValue:
    k: int

    def __call__(self, day, view, scores, prices, state):
        return signal_value(scores, self.k)


def equal_weight(day, view, scores, prices, state):
    return np.full(len(prices), 1.0 / len(prices))


BUILTIN_STRATEGIES = ("buy_and_hold:<stock_id>", "top_value:<k>", "equal_weight")


def resolve_strategy(name: str, stock_ids) -> StrategyRule:
    """Look up a built-in rule by its config name."""
    kind, _, arg = name.partition(":")
    if kind == "buy_and_hold" and arg in stock_ids:
        return BuyAndHold(list(stock_ids).index(arg))
    if kind == "top_value" and arg.isdigit() and 1 <= int(arg) <= len(stock_ids):
        return TopValue(int(arg))
    if kind == "equal_weight" and not arg:
        return equal_weight
    raise ConfigError(
        f"unknown strategy {name!r}; available: {', '.join(BUILTIN_STRATEGIES)}"
    )
