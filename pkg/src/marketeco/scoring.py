"""Morningstar-style Value and Growth scores.

Each criterion is rank-normalised across stocks to [0, 1] and the
composite is the weighted sum of the normalised criteria.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

# (criterion, weight, higher_is_better)
VALUE_CRITERIA = (
    ("price_to_projected_earnings", 0.5, False),
    ("price_to_book", 0.125, False),
    ("price_to_sales", 0.125, False),
    ("price_to_cash_flow", 0.125, False),
    ("dividend_yield", 0.125, True),
)
GROWTH_CRITERIA = (
    ("projected_earnings_growth", 0.5, True),
    ("earnings_growth", 0.125, True),
    ("sales_growth", 0.125, True),
    ("cash_flow_growth", 0.125, True),
    ("book_value_growth", 0.125, True),
)
VALUE_WEIGHTS = np.array([w for _, w, _ in VALUE_CRITERIA])
GROWTH_WEIGHTS = np.array([w for _, w, _ in GROWTH_CRITERIA])


@dataclass(frozen=True)
class ScoreVector:
    value_score: np.ndarray
    growth_score: np.ndarray


def _ratio(price, per_share):
    """price / per_share, NaN (undefined) where the denominator is <= 0."""
    per_share = np.asarray(per_share, dtype=float)
    out = np.full(per_share.shape, np.nan)
    ok = per_share > 0
    out[ok] = np.asarray(price, dtype=float)[ok] / per_share[ok]
    return out


def value_criteria(view, prices, stock_ids) -> dict[str, np.ndarray]:
    """Raw Value criteria per stock. Flow figures are annualised as four
    times the quarterly value; NaN marks an undefined ratio."""
    recs = view.records(stock_ids)
    prices = np.asarray(prices, dtype=float)
    shares = np.array([r.shares_outstanding for r in recs])

    def per_share(attr, annualise=True):
        x = np.array([getattr(r, attr) for r in recs], dtype=float)
        return (4.0 * x if annualise else x) / shares

    dps = np.array([r.dividend_per_share for r in recs], dtype=float)
    return {
        "price_to_projected_earnings": _ratio(prices, per_share("projected_earnings")),
        "price_to_book": _ratio(prices, per_share("book_value", annualise=False)),
        "price_to_sales": _ratio(prices, per_share("sales")),
        "price_to_cash_flow": _ratio(prices, per_share("cash_flow")),
        "dividend_yield": 4.0 * dps / prices,
    }


def _growth(new, old):
    new = np.asarray(new, dtype=float)
    old = np.asarray(old, dtype=float)
    out = np.full(new.shape, np.nan)
    ok = np.isfinite(old) & (old != 0)
    out[ok] = (new[ok] - old[ok]) / np.abs(old[ok])
    return out


def growth_criteria(table, view, stock_ids) -> dict[str, np.ndarray]:
    """Raw Growth criteria per stock. Year-over-year figures compare the
    visible quarter with the one four quarters earlier; NaN where that
    record does not exist or the base is zero."""
    recs = view.records(stock_ids)
    prior = [table.get(r.stock_id, r.fiscal_quarter - 4) for r in recs]

    def pair(attr):
        new = [getattr(r, attr) for r in recs]
        old = [np.nan if p is None else getattr(p, attr) for p in prior]
        return new, old

    return {
        "projected_earnings_growth": _growth(
            [r.projected_earnings for r in recs], [r.earnings for r in recs]
        ),
        "earnings_growth": _growth(*pair("earnings")),
        "sales_growth": _growth(*pair("sales")),
        "cash_flow_growth": _growth(*pair("cash_flow")),
        "book_value_growth": _growth(*pair("book_value")),
    }


def rank_normalize(criterion, higher_is_better: bool = True) -> np.ndarray:
    """Map a criterion to [0, 1] by average rank among defined entries.

    Undefined (NaN) entries get 0.5, as does a lone defined entry.
    """
    x = np.asarray(criterion, dtype=float)
    out = np.full(x.shape, 0.5)
    ok = np.isfinite(x)
    n = int(ok.sum())
    if n <= 1:
        return out
    ranks = rankdata(x[ok] if higher_is_better else -x[ok], method="average")
    out[ok] = (ranks - 1.0) / (n - 1.0)
    return out


def _composite(criteria, spec):
    total = np.zeros(len(next(iter(criteria.values()))))
    for name, weight, higher in spec:
        total += weight * rank_normalize(criteria[name], higher)
    return total


def composite_scores(view, prices, table, stock_ids=None) -> ScoreVector:
    stock_ids = table.stock_ids if stock_ids is None else stock_ids
    return ScoreVector(
        value_score=_composite(value_criteria(view, prices, stock_ids), VALUE_CRITERIA),
        growth_score=_composite(growth_criteria(table, view, stock_ids), GROWTH_CRITERIA),
    )
