"""Excess demand and market clearing.

A participant with aggression ``beta``, signal ``phi``, leverage ``lam``,
wealth ``W`` and position ``S`` demands

    D(p) = beta * phi * lam * W / p - S

extra shares at price ``p``. Wealth is split as ``W = F + s * p``: ``F`` is
the part that does not depend on this stock's price and ``s`` the number
of shares marked at the clearing price (``s = 0`` freezes wealth at the
previous close). A stock clears where aggregate excess demand equals the
shares not held by anyone who is trading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BRACKET_FACTOR = 1e3
BRACKET_EXPANSIONS = 10
XTOL = 1e-13  # in log-price
RESIDUAL_TOL = 1e-9  # relative to Q
CLOSED_FORM_RTOL = 1e-10
CONSERVATION_TOL = 1e-9


class ClearingError(RuntimeError):
    pass


def excess_demand(beta, phi, budget, position, price):
    """Shares demanded on top of ``position`` at ``price``."""
    if not price > 0:
        raise ValueError(f"price must be > 0, got {price}")
    return beta * phi * budget / price - position


@dataclass(frozen=True)
class DemandFunction:
    """Demands of every participant for one stock (arrays over participants)."""

    beta: np.ndarray
    phi: np.ndarray
    lam: np.ndarray
    wealth_fixed: np.ndarray
    position: np.ndarray
    wealth_slope: np.ndarray | None = None

    @classmethod
    def frozen(cls, beta, phi, lam, wealth, position):
        """Wealth valued at the previous close and held fixed while clearing."""
        arr = lambda v: np.atleast_1d(np.asarray(v, dtype=float))  # noqa: E731
        return cls(arr(beta), arr(phi), arr(lam), arr(wealth), arr(position))

    def coefficients(self):
        """(A, B) such that total desired holdings are A / p + B."""
        a = self.beta * self.phi * self.lam
        A = float(np.dot(a, self.wealth_fixed))
        B = 0.0 if self.wealth_slope is None else float(np.dot(a, self.wealth_slope))
        return A, B

    def __call__(self, price):
        slope = 0.0 if self.wealth_slope is None else self.wealth_slope
        budget = self.lam * (self.wealth_fixed + slope * price)
        return excess_demand(self.beta, self.phi, budget, self.position, price)


@dataclass(frozen=True)
class ClearingResult:
    price: float
    residual: float
    iterations: int
    no_trade: bool = False
    closed_form: float | None = None


def brent(f, a, b, fa, fb, xtol=XTOL, maxiter=200):
    """Brent-Dekker root finder on a sign-changing bracket [a, b].

    Bisection guarded inverse quadratic / secant interpolation. Returns
    ``(root, iterations)``.
    """
    if fa * fb > 0:
        raise ClearingError("root not bracketed")
    if fa == 0:
        return a, 0
    if fb == 0:
        return b, 0
    c, fc = a, fa
    d = e = b - a
    for it in range(1, maxiter + 1):
        if fb * fc > 0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol = 2.0 * 2.2e-16 * abs(b) + 0.5 * xtol
        m = 0.5 * (c - b)
        if abs(m) <= tol or fb == 0:
            return b, it
        if abs(e) >= tol and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * q - abs(tol * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = m
        else:
            d = e = m
        a, fa = b, fb
        b += d if abs(d) > tol else math.copysign(tol, m)
        fb = f(b)
    raise ClearingError(f"no convergence after {maxiter} iterations")


def clear_stock(demand: DemandFunction, supply: float, prev_price: float) -> ClearingResult:
    """Find the price at which the participants hold exactly ``supply`` shares.

    Root-finds g(p) = sum_i D_i(p) - (supply - sum_i S_i) in log-price on a
    bracket around ``prev_price`` and cross-checks the closed form.
    """
    if not supply > 0:
        raise ValueError("supply must be > 0")
    A, B = demand.coefficients()
    if A == 0.0 and B == 0.0:
        return ClearingResult(prev_price, 0.0, 0, no_trade=True)

    # g(p) = A/p + B - supply, written out for speed; equals sum D_i + sum S_i - supply
    def g_log(x):
        try:
            return A * math.exp(-x) + B - supply
        except OverflowError:
            return math.inf

    x0 = math.log(prev_price)
    step = math.log(BRACKET_FACTOR)
    lo, hi = x0 - step, x0 + step
    glo, ghi = g_log(lo), g_log(hi)
    for _ in range(BRACKET_EXPANSIONS):
        if glo * ghi <= 0:
            break
        lo -= step
        hi += step
        glo, ghi = g_log(lo), g_log(hi)
    if glo * ghi > 0:
        raise ClearingError(
            f"cannot bracket clearing price: g({math.exp(lo):.6g})={glo:.6g}, "
            f"g({math.exp(hi):.6g})={ghi:.6g}"
        )
    x, iters = brent(g_log, lo, hi, glo, ghi)
    price = math.exp(x)
    residual = abs(float(np.sum(demand(price))) + float(np.sum(demand.position)) - supply)
    closed = A / (supply - B) if supply > B else None
    if residual > RESIDUAL_TOL * supply:
        raise ClearingError(f"residual {residual:.3g} exceeds tolerance at p={price:.12g}")
    if closed is not None and abs(price - closed) > CLOSED_FORM_RTOL * closed:
        raise ClearingError(f"solver price {price!r} disagrees with closed form {closed!r}")
    return ClearingResult(price, residual, iters, closed_form=closed)


def coupled_prices(coef, cash, positions, supply, prev_prices, traded):
    """Prices at which every stock clears with wealth marked at those prices.

    ``coef[i, s] = beta_i * lam_i * phi_is``. The clearing conditions
    ``p_s Q_s = sum_i coef[i, s] (cash_i + positions_i . p)`` form a linear
    system; stocks with no demand (``traded`` False) keep ``prev_prices``.
    """
    prices = np.array(prev_prices, dtype=float)
    idx = np.flatnonzero(traded)
    if idx.size == 0:
        return prices
    fixed = np.flatnonzero(~np.asarray(traded))
    ct = coef[:, idx].T  # (m, n_p)
    rhs = ct @ (cash + positions[:, fixed] @ prices[fixed])
    mat = np.diag(supply[idx]) - ct @ positions[:, idx]
    try:
        sol = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError:
        raise ClearingError("clearing system is singular") from None
    resid = np.abs(mat @ sol - rhs).max()
    if not (np.all(np.isfinite(sol)) and resid <= RESIDUAL_TOL * max(np.abs(rhs).max(), 1e-300)):
        raise ClearingError(f"clearing system is singular or ill-conditioned (residual {resid:.3g})")
    prices[idx] = sol
    if not np.all(prices[idx] > 0):
        raise ClearingError("no positive market-clearing price vector exists")
    return prices


def execute_orders(coef, cash, positions, prices, supply):
    """Fill every demand at the cleared prices.

    Returns ``(new_positions, new_cash, volume)`` where volume per stock is
    half the sum of absolute position changes.
    """
    wealth = cash + positions @ prices
    new_positions = coef * wealth[:, None] / prices[None, :]
    traded = coef.any(axis=0)
    # untraded stocks: nobody wants them, holders keep their shares
    new_positions[:, ~traded] = positions[:, ~traded]
    delta = new_positions - positions
    new_cash = cash - delta @ prices
    held = new_positions.sum(axis=0)
    err = np.abs(held - supply)
    bad = traded & (err > CONSERVATION_TOL * supply)
    if np.any(bad):
        raise ClearingError(
            f"share conservation violated for stocks {np.flatnonzero(bad).tolist()}: "
            f"max error {err[bad].max():.3g}"
        )
    volume = 0.5 * np.abs(delta).sum(axis=0)
    return new_positions, new_cash, volume
