"""Dollar-neutral trading strategies, the daily rebalancing simulation with
turnover costs, and the annualized performance metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import TradingCalendar
from .errors import ConfigError, DegenerateSharpe, EmptyDataset, NoPriceCoverage

# Both strategies target a 20T gross per leg: S1 trades 20 names at T each,
# S2 spreads the same 20T across every scored name on the side.
LEG_MULTIPLIER = 20.0


@dataclass(frozen=True)
class StrategyConfig:
    lookback_days: int = 5  # max news age feeding a day's score, in trading days
    unit_notional: float = 1.0
    top_k: int = 20
    cost_rate: float = 4e-4  # per unit of turnover (4 bps)
    trading_days_per_year: int = 250

    def __post_init__(self):
        for name in ("lookback_days", "unit_notional", "top_k", "cost_rate", "trading_days_per_year"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass(frozen=True)
class LedgerRow:
    day: date
    gross: float  # sum of |position| carried into the day
    pnl: float  # pre-cost profit on the carried positions
    turnover: float  # sum of |position change| at the day's rebalance
    cost: float
    net_return: float  # (pnl - cost) / gross, 0 on zero-gross days


@dataclass
class PortfolioLedger:
    rows: list

    def net_returns(self) -> np.ndarray:
        return np.array([row.net_return for row in self.rows])

    def cumulative_net_pnl(self) -> np.ndarray:
        return np.cumsum([row.pnl - row.cost for row in self.rows])

    def cumulative_gross_pnl(self) -> np.ndarray:
        return np.cumsum([row.pnl for row in self.rows])

    def total_cost(self) -> float:
        return float(sum(row.cost for row in self.rows))


def make_ledger(
    days: Sequence[date],
    gross: Sequence[float],
    pnl: Sequence[float],
    turnover: Sequence[float],
    cost_rate: float = 0.0,
) -> PortfolioLedger:
    """Assemble a ledger directly from per-day aggregates (costs recomputed)."""
    rows = []
    for day, g, p, to in zip(days, gross, pnl, turnover):
        cost = cost_rate * to
        rows.append(LedgerRow(day, g, p, to, cost, (p - cost) / g if g > 0 else 0.0))
    return PortfolioLedger(rows)


def aggregate_scores(
    scored: Iterable[tuple[str, datetime, float]],
    as_of_close: datetime,
    cal: TradingCalendar,
    lookback_days: int = 5,
) -> dict:
    """Mean score per ticker over news at most `lookback_days` trading days old.

    A news item belongs to the trading day of the first close at or after its
    timestamp; age is the trading-day distance to `as_of_close`'s day. Items
    stamped after `as_of_close` never contribute (no look-ahead).
    """
    asof_day, asof_close = cal.first_close_at_or_after(as_of_close)
    if asof_close != as_of_close:
        raise ConfigError(f"as_of_close {as_of_close} is not a session close")
    window = {asof_day}
    day = asof_day
    for _ in range(lookback_days):
        day = cal.add_trading_days(day, -1)
        window.add(day)
    sums: dict = {}
    counts: dict = {}
    for ticker, stamp, score in scored:
        if stamp > as_of_close:
            continue
        news_day, _ = cal.first_close_at_or_after(stamp)
        if news_day not in window:
            continue
        sums[ticker] = sums.get(ticker, 0.0) + score
        counts[ticker] = counts.get(ticker, 0) + 1
    return {ticker: sums[ticker] / counts[ticker] for ticker in sums}


def strategy_s1(mean_scores: Mapping[str, float], cfg: StrategyConfig) -> dict:
    """Equal notional on the k best and k worst scores, k = min(top_k, n//2)."""
    book = {ticker: 0.0 for ticker in mean_scores}
    k = min(cfg.top_k, len(mean_scores) // 2)
    if k == 0:
        return book
    order = sorted(mean_scores, key=lambda t: (-mean_scores[t], t))
    for ticker in order[:k]:
        book[ticker] = cfg.unit_notional
    for ticker in order[-k:]:
        book[ticker] = -cfg.unit_notional
    return book


def strategy_s2(mean_scores: Mapping[str, float], cfg: StrategyConfig) -> dict:
    """Score-proportional books, each leg scaled to 20T gross.

    A side with no candidates stays empty while the other side still carries
    its full 20T.
    """
    book = {ticker: 0.0 for ticker in mean_scores}
    leg = LEG_MULTIPLIER * cfg.unit_notional
    long_sum = sum(s for s in mean_scores.values() if s > 0)
    short_sum = sum(-s for s in mean_scores.values() if s < 0)
    for ticker, score in mean_scores.items():
        if score > 0:
            book[ticker] = leg * score / long_sum
        elif score < 0:
            book[ticker] = -leg * (-score) / short_sum
    return book


def simulate(
    books: Sequence[tuple[date, Mapping[str, float]]],
    closes: Mapping[str, Mapping[date, float]],
    cfg: StrategyConfig,
    with_costs: bool = True,
) -> PortfolioLedger:
    """Fold the daily books into a ledger.

    Books are formed at each day's close; day d earns close-to-close P&L on
    the book set at day d-1's close, pays `cost_rate` on day d's turnover
    when costs are on, and reports the return on the carried gross (zero
    gross reports zero).
    """
    rows = []
    prev_positions: dict = {}
    prev_day: Optional[date] = None
    for day, book in books:
        if prev_day is not None and day <= prev_day:
            raise ConfigError(f"books must be strictly chronological, got {day} after {prev_day}")
        pnl = 0.0
        for ticker in sorted(prev_positions):
            position = prev_positions[ticker]
            series = closes.get(ticker, {})
            p0 = series.get(prev_day)
            p1 = series.get(day)
            if p0 is None or p1 is None:
                raise NoPriceCoverage(ticker, day, "close missing for a held name")
            pnl += position * (p1 / p0 - 1.0)
        gross = sum(abs(v) for v in prev_positions.values())
        turnover = 0.0
        for ticker in sorted(set(prev_positions) | set(book)):
            turnover += abs(book.get(ticker, 0.0) - prev_positions.get(ticker, 0.0))
        cost = cfg.cost_rate * turnover if with_costs else 0.0
        net = (pnl - cost) / gross if gross > 0 else 0.0
        rows.append(LedgerRow(day, gross, pnl, turnover, cost, net))
        prev_positions = {t: v for t, v in book.items() if v != 0.0}
        prev_day = day
    return PortfolioLedger(rows)


def annualized_return(ledger: PortfolioLedger, trading_days: int = 250) -> float:
    """Mean daily net return scaled by the trading-day count."""
    if not ledger.rows:
        raise EmptyDataset("annualized_return needs at least one ledger day")
    return float(np.mean(ledger.net_returns())) * trading_days


def sharpe(ledger: PortfolioLedger, trading_days: int = 250) -> float:
    """mean(r) / stdev(r) * sqrt(D) with the sample (n-1) standard deviation."""
    active = sum(1 for row in ledger.rows if row.gross > 0)
    if active < 2:
        raise DegenerateSharpe(f"need >= 2 days with nonzero gross, got {active}")
    returns = ledger.net_returns()
    sigma = float(np.std(returns, ddof=1))
    if sigma == 0.0:
        raise DegenerateSharpe("returns have zero variance")
    return float(np.mean(returns)) / sigma * math.sqrt(trading_days)


LEDGER_FIELDS = ("date", "gross", "pnl", "turnover", "cost", "net_return")


def write_ledger(ledger: PortfolioLedger, path) -> None:
    lines = [",".join(LEDGER_FIELDS)]
    for row in ledger.rows:
        lines.append(
            f"{row.day.isoformat()},{row.gross!r},{row.pnl!r},{row.turnover!r},"
            f"{row.cost!r},{row.net_return!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_cumulative_pnl(ledger: PortfolioLedger, path) -> None:
    """Cumulative gross/net P&L series for plotting."""
    gross = ledger.cumulative_gross_pnl()
    net = ledger.cumulative_net_pnl()
    lines = ["date,cum_gross_pnl,cum_net_pnl"]
    for row, g, n in zip(ledger.rows, gross, net):
        lines.append(f"{row.day.isoformat()},{float(g)!r},{float(n)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_ledger(path) -> PortfolioLedger:
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != LEDGER_FIELDS:
        raise ConfigError(f"bad ledger header {header!r}")
    rows = []
    for row in reader:
        if not row:
            continue
        day, gross, pnl, turnover, cost, net = row
        rows.append(
            LedgerRow(date.fromisoformat(day), float(gross), float(pnl), float(turnover), float(cost), float(net))
        )
    return PortfolioLedger(rows)
