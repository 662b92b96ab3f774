"""Static SVG charts for simulation output and stylized-fact reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import validation as V  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.0),
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.frameon": False,
    "svg.hashsalt": "marketeco",  # stable ids in the SVG output
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_lines(days, series: dict, path, title="", ylabel="", logy=False) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, y in series.items():
            ax.plot(days, y, lw=0.8, label=label)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("day")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if 1 < len(series) <= 12:
            ax.legend(fontsize=7, ncol=2)
        return _save(fig, path)


def plot_acf(res: V.AcfResult, path, title="") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        lags = np.arange(1, res.values.size + 1)
        ax.vlines(lags, 0, res.values, lw=1.2)
        ax.axhspan(-res.band, res.band, color="tab:blue", alpha=0.15, lw=0)
        ax.axhline(0, color="k", lw=0.6)
        ax.set_xlabel("lag (days)")
        ax.set_ylabel("autocorrelation")
        ax.set_title(title)
        return _save(fig, path)


def plot_return_histogram(returns, path, title="") -> Path:
    r = np.asarray(returns, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist(r, bins=100, density=True, alpha=0.7, label="returns")
        sd = r.std()
        if sd > 0:
            x = np.linspace(r.min(), r.max(), 400)
            ax.plot(x, np.exp(-0.5 * ((x - r.mean()) / sd) ** 2) / (sd * np.sqrt(2 * np.pi)),
                    color="k", lw=0.8, label="normal fit")
        ax.set_yscale("log")
        ax.set_xlabel("log return")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_kurtosis(report: V.StylizedFactsReport, path) -> Path:
    labels = [k for k in ("daily", "monthly", "yearly") if k in report.kurtosis]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ax.bar(labels, [report.kurtosis[k] for k in labels])
        ax.axhline(0, color="k", lw=0.6)
        ax.set_ylabel("excess kurtosis")
        ax.set_title("Aggregational Gaussianity")
        return _save(fig, path)


def plot_stylized_facts(prices, volumes, report: V.StylizedFactsReport, out_dir, name="") -> list:
    """One chart per fact; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prices = np.asarray(prices, dtype=float)
    paths = []
    tag = f" ({name})" if name else ""
    days = np.arange(prices.size)
    paths.append(plot_lines(days, {"price": prices}, out_dir / "price.svg", f"Price{tag}", logy=True))
    if report.acf_returns is None:
        return paths
    r = V.log_returns(prices)
    paths.append(plot_acf(report.acf_returns, out_dir / "acf_returns.svg",
                          f"Autocorrelation of returns{tag}"))
    if report.acf_abs_returns is not None and report.acf_abs_returns.defined:
        paths.append(plot_acf(report.acf_abs_returns, out_dir / "acf_abs_returns.svg",
                              f"Autocorrelation of absolute returns{tag}"))
    paths.append(plot_return_histogram(r, out_dir / "return_distribution.svg",
                                       f"Daily log returns{tag}"))
    if report.kurtosis:
        paths.append(plot_kurtosis(report, out_dir / "kurtosis.svg"))
    w = report.thresholds.intermittency_window
    if r.size >= w:
        vol = V.rolling_volatility(r, w)
        paths.append(plot_lines(np.arange(w, r.size + 1), {"rolling std": vol},
                                out_dir / "intermittency.svg",
                                f"{w}-day rolling volatility{tag}"))
    w = report.thresholds.vol_window
    if volumes is not None and r.size > w:
        vol = V.rolling_volatility(r, w)
        v = np.asarray(volumes, dtype=float)[1:][w - 1:]
        with plt.rc_context(STYLE):
            fig, ax = plt.subplots()
            ax.scatter(vol, v, s=2, alpha=0.3)
            ax.set_xlabel(f"{w}-day volatility")
            ax.set_ylabel("volume")
            ax.set_title(f"Volume vs volatility{tag}")
            paths.append(_save(fig, out_dir / "volume_volatility.svg"))
    return paths


def plot_run(out, out_dir) -> list:
    """Price and NAV charts for a finished simulation."""
    out_dir = Path(out_dir)
    paths = [
        plot_lines(out.days, dict(zip(out.stock_ids, out.prices.T)), out_dir / "prices.svg",
                   "Prices", logy=True),
        plot_lines(out.days, dict(zip(out.participant_ids, out.wealth.T)), out_dir / "wealth.svg",
                   "Participant wealth", logy=True),
        plot_lines(out.days, dict(zip(out.participant_ids, out.nav.T)), out_dir / "nav.svg",
                   "NAV per unit", logy=True),
    ]
    return paths
