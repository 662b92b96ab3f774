import logging

import numpy as np
import pytest

from marketeco.data import FundamentalsRecord, FundamentalsTable


def make_record(sid, q, **kw):
    base = dict(earnings=10.0, projected_earnings=11.0, sales=100.0, cash_flow=12.0,
                book_value=50.0, dividend_per_share=0.25, shares_outstanding=10.0,
                initial_price=20.0 if q == 0 else None)
    base.update(kw)
    return FundamentalsRecord(stock_id=sid, fiscal_quarter=q, **base)


def make_table(n_stocks=3, n_quarters=2, **kw):
    recs = [make_record(f"S{i}", q, **kw) for i in range(n_stocks) for q in range(n_quarters)]
    return FundamentalsTable(recs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_logs():
    logging.getLogger("marketeco").setLevel(logging.ERROR)
    yield


ACCEPTANCE_LINES = []


def record_acceptance(name, ok, detail):
    """Print and keep one PASS/FAIL line for an acceptance criterion."""
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
