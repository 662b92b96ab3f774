"""Stylized facts of asset returns.

Statistics are plain sample estimators (biased moments, sample ACF with
the overall mean) so that they can be checked against direct formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DAILY, MONTHLY, YEARLY = 1, 21, 252
MIN_DAYS = 64

PASS, FAIL, INSUFFICIENT, UNDEFINED, INFO = "pass", "fail", "insufficient data", "undefined", "info"


def log_returns(prices, horizon: int = DAILY) -> np.ndarray:
    """Non-overlapping log returns over ``horizon`` days.

    The series is sampled every ``horizon`` observations starting from the
    first one, so ``n`` prices give ``(n - 1) // horizon`` returns.
    """
    p = np.asarray(prices, dtype=float)
    if np.any(~(p > 0)):
        raise ValueError("prices must be strictly positive")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return np.diff(np.log(p[::horizon]))


@dataclass(frozen=True)
class AcfResult:
    values: np.ndarray  # lags 1..max_lag; NaN when undefined
    band: float
    defined: bool


def acf(series, max_lag: int) -> AcfResult:
    x = np.asarray(series, dtype=float)
    n = x.size
    if n <= max_lag + 1:
        raise ValueError(f"need more than {max_lag + 1} observations, got {n}")
    band = 1.96 / math.sqrt(n)
    d = x - x.mean()
    denom = d @ d
    if not denom > 0:
        return AcfResult(np.full(max_lag, np.nan), band, False)
    vals = np.array([d[:-k] @ d[k:] for k in range(1, max_lag + 1)]) / denom
    return AcfResult(vals, band, True)


def excess_kurtosis(series) -> float:
    """Fourth standardised moment minus 3; NaN for zero variance."""
    x = np.asarray(series, dtype=float)
    if x.size < 4:
        raise ValueError("need at least 4 observations")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if not m2 > 0:
        return math.nan
    return float(np.mean(d**4) / m2**2 - 3.0)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("series must have equal length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    den = math.sqrt((dx @ dx) * (dy @ dy))
    if not den > 0:
        return math.nan
    return float((dx @ dy) / den)


def rolling_volatility(returns, window: int) -> np.ndarray:
    """Sample standard deviation over each trailing window; element ``j``
    covers ``returns[j : j + window]``."""
    r = np.asarray(returns, dtype=float)
    if window < 2 or r.size < window:
        raise ValueError("window must be >= 2 and <= len(returns)")
    view = np.lib.stride_tricks.sliding_window_view(r, window)
    return view.std(axis=1, ddof=1)


def leverage_effect(returns, window: int = 21) -> float:
    """Correlation between r(t) and the subsequent volatility, i.e. the
    sample std of ``r(t+1) .. r(t+window)``."""
    r = np.asarray(returns, dtype=float)
    if r.size <= window:
        raise ValueError("series shorter than the volatility window")
    return pearson(r[:-window], rolling_volatility(r, window)[1:])


def volume_volatility(volumes, returns, window: int = 21):
    """``(corr(volume, volatility), corr(volume, return))`` with volume and
    returns aligned day by day."""
    v = np.asarray(volumes, dtype=float)
    r = np.asarray(returns, dtype=float)
    if v.size != r.size:
        raise ValueError("volumes and returns must be aligned")
    if r.size <= window:
        raise ValueError("series shorter than the volatility window")
    vol = rolling_volatility(r, window)
    return pearson(v[window - 1:], vol), pearson(v, r)


def volatility_bursts(returns, window: int = 21, k: float = 2.0) -> int:
    """Number of separate episodes where rolling volatility exceeds its
    mean by more than ``k`` standard deviations."""
    vol = rolling_volatility(returns, window)
    hot = vol > vol.mean() + k * vol.std()
    return int(np.count_nonzero(hot[1:] & ~hot[:-1]) + bool(hot[0]))


def drawdown_recovery_ratio(prices, min_depth: float = 0.1) -> float:
    """Mean recovery time over mean drawdown time for completed drawdowns
    deeper than ``min_depth`` (fraction); NaN when none completed."""
    p = np.asarray(prices, dtype=float)
    down, up = [], []
    peak_i = 0
    trough_i = 0
    for i in range(1, p.size):
        if p[i] >= p[peak_i]:
            if trough_i > peak_i and 1 - p[trough_i] / p[peak_i] >= min_depth:
                down.append(trough_i - peak_i)
                up.append(i - trough_i)
            peak_i = trough_i = i
        elif p[i] < p[trough_i]:
            trough_i = i
    if not down:
        return math.nan
    return float(np.mean(up) / np.mean(down))


@dataclass(frozen=True)
class Thresholds:
    acf_lags: tuple = (6, 21)
    acf_share: float = 0.8
    abs_acf_lags: tuple = (1, 63)
    abs_acf_share: float = 0.5
    vol_window: int = 21
    intermittency_window: int = 1260


@dataclass
class StylizedFactsReport:
    acf_returns: AcfResult | None = None
    acf_abs_returns: AcfResult | None = None
    kurtosis: dict = field(default_factory=dict)
    leverage_corr: float = math.nan
    volume_volatility_corr: float = math.nan
    volume_return_corr: float = math.nan
    volatility_bursts: int | None = None
    drawdown_recovery_ratio: float = math.nan
    verdicts: dict = field(default_factory=dict)
    thresholds: Thresholds = field(default_factory=Thresholds)

    @property
    def passed(self) -> bool:
        judged = [v for v in self.verdicts.values() if v != INFO]
        return bool(judged) and all(v == PASS for v in judged)

    def rows(self):
        """(statistic, value, verdict) rows for the report CSV."""
        def share_in(res, lo, hi, above):
            if res is None or not res.defined:
                return math.nan
            seg = res.values[lo - 1:hi]
            ok = seg > res.band if above else np.abs(seg) <= res.band
            return float(np.mean(ok))

        t = self.thresholds
        v = self.verdicts
        return [
            ("no_autocorrelation_share", share_in(self.acf_returns, *t.acf_lags, False),
             v.get("no_autocorrelation")),
            ("kurtosis_daily", self.kurtosis.get("daily", math.nan), v.get("heavy_tails")),
            ("kurtosis_monthly", self.kurtosis.get("monthly", math.nan),
             v.get("aggregational_gaussianity")),
            ("kurtosis_yearly", self.kurtosis.get("yearly", math.nan),
             v.get("aggregational_gaussianity")),
            ("abs_return_acf_share", share_in(self.acf_abs_returns, *t.abs_acf_lags, True),
             v.get("volatility_clustering")),
            ("leverage_corr", self.leverage_corr, v.get("leverage_effect")),
            ("volume_volatility_corr", self.volume_volatility_corr, v.get("volume_volatility")),
            ("volume_return_corr", self.volume_return_corr,
             INFO if v.get("volume_volatility") in (PASS, FAIL) else v.get("volume_volatility")),
            ("volatility_bursts", self.volatility_bursts, v.get("intermittency")),
            ("drawdown_recovery_ratio", self.drawdown_recovery_ratio, v.get("gain_loss_asymmetry")),
        ]


def _verdict(ok) -> str:
    return PASS if ok else FAIL


def stylized_report(prices, volumes=None, thresholds: Thresholds | None = None) -> StylizedFactsReport:
    t = thresholds or Thresholds()
    prices = np.asarray(prices, dtype=float)
    rep = StylizedFactsReport(thresholds=t)
    facts = ("no_autocorrelation", "heavy_tails", "aggregational_gaussianity",
             "volatility_clustering", "leverage_effect", "volume_volatility")
    if prices.size < MIN_DAYS:
        rep.verdicts = {f: INSUFFICIENT for f in facts}
        rep.verdicts.update(intermittency=INSUFFICIENT, gain_loss_asymmetry=INSUFFICIENT)
        return rep

    r = log_returns(prices)
    v = rep.verdicts
    if np.ptp(r) == 0:
        rep.verdicts = {f: UNDEFINED for f in facts}
        rep.verdicts.update(intermittency=UNDEFINED, gain_loss_asymmetry=UNDEFINED)
        return rep

    lo, hi = t.acf_lags
    if r.size > hi + 1:
        rep.acf_returns = acf(r, hi)
        seg = rep.acf_returns.values[lo - 1:hi]
        v["no_autocorrelation"] = _verdict(np.mean(np.abs(seg) <= rep.acf_returns.band) >= t.acf_share)
    else:
        v["no_autocorrelation"] = INSUFFICIENT

    kd = excess_kurtosis(r)
    rep.kurtosis["daily"] = kd
    v["heavy_tails"] = _verdict(kd > 0)
    rm, ry = log_returns(prices, MONTHLY), log_returns(prices, YEARLY)
    if ry.size >= 4:
        km, ky = excess_kurtosis(rm), excess_kurtosis(ry)
        rep.kurtosis.update(monthly=km, yearly=ky)
        if math.isnan(km) or math.isnan(ky):
            v["aggregational_gaussianity"] = UNDEFINED
        else:
            v["aggregational_gaussianity"] = _verdict(kd > km > ky)
    else:
        if rm.size >= 4:
            rep.kurtosis["monthly"] = excess_kurtosis(rm)
        v["aggregational_gaussianity"] = INSUFFICIENT

    lo, hi = t.abs_acf_lags
    if r.size > hi + 1:
        rep.acf_abs_returns = acf(np.abs(r), hi)
        if rep.acf_abs_returns.defined:
            seg = rep.acf_abs_returns.values[lo - 1:hi]
            v["volatility_clustering"] = _verdict(np.mean(seg > rep.acf_abs_returns.band) >= t.abs_acf_share)
        else:
            v["volatility_clustering"] = UNDEFINED
    else:
        v["volatility_clustering"] = INSUFFICIENT

    w = t.vol_window
    rep.leverage_corr = leverage_effect(r, w)
    v["leverage_effect"] = UNDEFINED if math.isnan(rep.leverage_corr) else _verdict(rep.leverage_corr < 0)
    if volumes is None:
        v["volume_volatility"] = INSUFFICIENT
    else:
        vols = np.asarray(volumes, dtype=float)[1:]
        rep.volume_volatility_corr, rep.volume_return_corr = volume_volatility(vols, r, w)
        c = rep.volume_volatility_corr
        v["volume_volatility"] = UNDEFINED if math.isnan(c) else _verdict(c > 0)

    rep.volatility_bursts = volatility_bursts(r, w)
    rep.drawdown_recovery_ratio = drawdown_recovery_ratio(prices)
    v["intermittency"] = INFO
    v["gain_loss_asymmetry"] = INFO
    return rep
