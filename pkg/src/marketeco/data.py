"""Company fundamentals: CSV ingestion, synthetic generation and the
staggered public announcement calendar."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

QUARTER_DAYS = 63

CSV_COLUMNS = (
    "stock_id",
    "fiscal_quarter",
    "earnings",
    "projected_earnings",
    "sales",
    "cash_flow",
    "book_value",
    "dividend_per_share",
    "shares_outstanding",
    "initial_price",
)

# Used to label synthetic stocks; beyond this list ids fall back to S###.
DEFAULT_TICKERS = (
    "AAPL", "MSFT", "AMZN", "GOOG", "JNJ", "JPM", "XOM", "PG", "KO", "PFE",
    "WMT", "INTC", "CSCO", "ORCL", "IBM", "MRK", "CVX", "HD", "DIS", "MCD",
    "BA",
)


class SchemaError(ValueError):
    """Fundamentals file does not follow the expected layout."""


class ValidationError(ValueError):
    """A fundamentals record breaks a value invariant."""


@dataclass(frozen=True)
class FundamentalsRecord:
    stock_id: str
    fiscal_quarter: int
    earnings: float
    projected_earnings: float
    sales: float
    cash_flow: float
    book_value: float
    dividend_per_share: float
    shares_outstanding: float
    initial_price: float | None = None

    def __post_init__(self):
        if not self.shares_outstanding > 0:
            raise ValidationError(
                f"{self.stock_id} q{self.fiscal_quarter}: shares_outstanding must be > 0"
            )
        if not self.dividend_per_share >= 0:
            raise ValidationError(
                f"{self.stock_id} q{self.fiscal_quarter}: dividend_per_share must be >= 0"
            )
        if self.fiscal_quarter < 0:
            raise ValidationError(f"{self.stock_id}: negative fiscal_quarter")


@dataclass
class FundamentalsTable:
    """All records, indexed by ``(stock_id, fiscal_quarter)``.

    ``stock_ids`` is sorted; every per-stock array in the package uses
    that order.
    """

    records: list[FundamentalsRecord]
    stock_ids: list[str] = field(init=False)
    _index: dict = field(init=False, repr=False)
    _max_q: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: (r.stock_id, r.fiscal_quarter))
        self._index = {}
        self._max_q = {}
        for rec in self.records:
            key = (rec.stock_id, rec.fiscal_quarter)
            if key in self._index:
                raise SchemaError(f"duplicate record for {key}")
            self._index[key] = rec
            self._max_q[rec.stock_id] = max(self._max_q.get(rec.stock_id, 0), rec.fiscal_quarter)
        seen = dict.fromkeys(r.stock_id for r in self.records)
        self.stock_ids = list(seen)
        for sid in self.stock_ids:
            if (sid, 0) not in self._index:
                raise SchemaError(f"{sid}: missing quarter-0 record")

    def __len__(self):
        return len(self.records)

    def get(self, stock_id: str, quarter: int) -> FundamentalsRecord | None:
        return self._index.get((stock_id, quarter))

    def max_quarter(self, stock_id: str) -> int:
        return self._max_q[stock_id]

    def initial_prices(self) -> np.ndarray:
        out = []
        for sid in self.stock_ids:
            p = self._index[(sid, 0)].initial_price
            if p is None or not p > 0:
                raise ValidationError(f"{sid}: quarter-0 initial_price must be > 0")
            out.append(p)
        return np.array(out, dtype=float)

    def initial_shares(self) -> np.ndarray:
        return np.array(
            [self._index[(sid, 0)].shares_outstanding for sid in self.stock_ids], dtype=float
        )


def load_fundamentals(path) -> FundamentalsTable:
    """Read a fundamentals CSV (see ``CSV_COLUMNS``) into a table."""
    path = Path(path)
    records = []
    seen = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file")
        missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                quarter = int(row["fiscal_quarter"])
                vals = {c: float(row[c]) for c in CSV_COLUMNS[2:9]}
                init = row.get("initial_price", "").strip()
                initial_price = float(init) if (quarter == 0 and init) else None
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: unparseable row ({exc})") from None
            key = (row["stock_id"], quarter)
            if key in seen:
                raise SchemaError(
                    f"{path}:{lineno}: duplicate (stock_id, fiscal_quarter) {key}, "
                    f"first seen on line {seen[key]}"
                )
            seen[key] = lineno
            try:
                records.append(
                    FundamentalsRecord(row["stock_id"], quarter, initial_price=initial_price, **vals)
                )
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    if not records:
        raise SchemaError(f"{path}: no records")
    table = FundamentalsTable(records)
    for sid in table.stock_ids:
        n = table.max_quarter(sid)
        for q in range(n + 1):
            if table.get(sid, q) is None:
                raise SchemaError(f"{path}: {sid} is missing quarter {q}")
    table.initial_prices()
    return table


def write_fundamentals(table: FundamentalsTable, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in table.records:
            writer.writerow([
                r.stock_id, r.fiscal_quarter,
                repr(r.earnings), repr(r.projected_earnings), repr(r.sales),
                repr(r.cash_flow), repr(r.book_value), repr(r.dividend_per_share),
                repr(r.shares_outstanding),
                "" if r.initial_price is None else repr(r.initial_price),
            ])


# Per-quarter (drift, volatility) of the log of each synthetic field.
SYNTH_FIELD_DYNAMICS = {
    "earnings": (0.015, 0.08),
    "projected_earnings": (0.015, 0.06),
    "sales": (0.012, 0.04),
    "cash_flow": (0.012, 0.09),
    "book_value": (0.010, 0.03),
    "dividend_per_share": (0.008, 0.03),
}


def synthesize_fundamentals(
    n_stocks: int,
    n_quarters: int,
    seed: int,
    dynamics: dict | None = None,
    dividend_payer_fraction: float = 0.8,
) -> FundamentalsTable:
    """Generate a fundamentals table where every field of every company is
    an independent seeded geometric random walk.

    ``dynamics`` overrides entries of :data:`SYNTH_FIELD_DYNAMICS`. Passing
    zero drift and volatility for every field gives frozen fundamentals.
    """
    if n_stocks < 1 or n_quarters < 1:
        raise ValueError("n_stocks and n_quarters must be >= 1")
    dyn = dict(SYNTH_FIELD_DYNAMICS)
    if dynamics:
        dyn.update(dynamics)
    rng = np.random.default_rng(seed)

    ids = [
        DEFAULT_TICKERS[i] if i < len(DEFAULT_TICKERS) else f"S{i:03d}"
        for i in range(n_stocks)
    ]
    shares = np.exp(rng.uniform(np.log(5e8), np.log(1e10), n_stocks)).round()
    eps0 = rng.uniform(1.0, 8.0, n_stocks)  # annual EPS
    pe0 = rng.uniform(12.0, 30.0, n_stocks)
    price0 = np.round(eps0 * pe0, 2)
    base = {
        "earnings": eps0 * shares / 4,
        "projected_earnings": eps0 * shares / 4 * rng.uniform(0.95, 1.3, n_stocks),
        "sales": eps0 * shares / 4 * rng.uniform(5.0, 15.0, n_stocks),
        "cash_flow": eps0 * shares / 4 * rng.uniform(1.0, 1.8, n_stocks),
        "book_value": eps0 * shares * rng.uniform(2.0, 8.0, n_stocks),
        "dividend_per_share": eps0 / 4 * rng.uniform(0.2, 0.5, n_stocks)
        * (rng.random(n_stocks) < dividend_payer_fraction),
    }
    paths = {}
    for name, (mu, sigma) in dyn.items():
        steps = rng.standard_normal((n_stocks, n_quarters - 1))
        logs = np.cumsum((mu - 0.5 * sigma**2) + sigma * steps, axis=1)
        logs = np.concatenate([np.zeros((n_stocks, 1)), logs], axis=1)
        paths[name] = base[name][:, None] * np.exp(logs)

    records = []
    for i, sid in enumerate(ids):
        for q in range(n_quarters):
            records.append(FundamentalsRecord(
                stock_id=sid,
                fiscal_quarter=q,
                earnings=float(paths["earnings"][i, q]),
                projected_earnings=float(paths["projected_earnings"][i, q]),
                sales=float(paths["sales"][i, q]),
                cash_flow=float(paths["cash_flow"][i, q]),
                book_value=float(paths["book_value"][i, q]),
                dividend_per_share=float(paths["dividend_per_share"][i, q]),
                shares_outstanding=float(shares[i]),
                initial_price=float(price0[i]) if q == 0 else None,
            ))
    return FundamentalsTable(records)


def announcement_offset(stock_index: int, n_stocks: int) -> int:
    """Day offset within a quarter at which a stock announces."""
    if not 0 <= stock_index < n_stocks:
        raise ValueError("stock_index out of range")
    return (stock_index * QUARTER_DAYS) // n_stocks


@dataclass(frozen=True)
class AnnouncementSchedule:
    offsets: dict

    @classmethod
    def uniform(cls, stock_ids):
        n = len(stock_ids)
        return cls({sid: announcement_offset(i, n) for i, sid in enumerate(stock_ids)})

    def announcement_day(self, stock_id: str, quarter: int) -> int:
        if quarter == 0:
            return 0
        return QUARTER_DAYS * quarter + self.offsets[stock_id]

    def announces_on(self, stock_id: str, day: int) -> int | None:
        """Quarter announced by ``stock_id`` on ``day``, if any (never 0)."""
        q, r = divmod(day - self.offsets[stock_id], QUARTER_DAYS)
        if r == 0 and q >= 1:
            return q
        return None


@dataclass(frozen=True)
class FundamentalsView:
    latest_announced: dict
    as_of_day: int

    def records(self, stock_ids):
        return [self.latest_announced[s] for s in stock_ids]


def visible_quarter(schedule: AnnouncementSchedule, stock_id: str, day: int, max_quarter: int) -> int:
    if day < 0:
        raise ValueError("day must be >= 0")
    q = (day - schedule.offsets[stock_id]) // QUARTER_DAYS
    return int(min(max(q, 0), max_quarter))


def public_view(table: FundamentalsTable, schedule: AnnouncementSchedule, day: int) -> FundamentalsView:
    """Latest announced record per stock as of ``day``.

    Once a stock's data runs out, its last quarter stays visible.
    """
    latest = {}
    for sid in table.stock_ids:
        q = visible_quarter(schedule, sid, day, table.max_quarter(sid))
        latest[sid] = table.get(sid, q)
    return FundamentalsView(latest, day)
