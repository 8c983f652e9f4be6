"""Market-adjusted forward returns per headline and train/eval label rules.

In-hours news measure a short intraday horizon; out-of-hours news measure a
horizon anchored at the next market open. Training labels keep only the most
positive and most negative return quantiles; dev/test labels are the plain
sign of the return.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence, Union

from .corpus import NewsItem, PriceSeries, TradingCalendar, is_trading_hours
from .errors import (
    ConfigError,
    EmptyDataset,
    IncompatibleArtifacts,
    IngestError,
    NoPriceCoverage,
)

EXCLUDED = "excluded"
SPLITS = ("train", "dev", "test")

# Staleness bounds for price lookups: the observation backing an intraday
# lookup must be at most 30 minutes old; one backing a multi-day lookup at
# most 2 trading days old. Beyond that the news is skipped as uncovered.
INTRADAY_GRACE = timedelta(minutes=30)
DAILY_GRACE_TRADING_DAYS = 2

_ONE_DAY = timedelta(days=1)


@dataclass(frozen=True)
class HorizonConfig:
    """Forward-return horizons: intraday for in-hours news, trading days otherwise."""

    delta_in: timedelta = timedelta(minutes=30)
    delta_out_days: int = 1

    def __post_init__(self):
        if self.delta_in <= timedelta(0):
            raise ConfigError("delta_in must be positive")
        if self.delta_out_days <= 0:
            raise ConfigError("delta_out_days must be positive")


@dataclass(frozen=True)
class LabelQuantile:
    """Fraction of the training set labeled on each side (default 15%)."""

    q: float = 0.15

    def __post_init__(self):
        if not 0 < self.q <= 0.5:
            raise ConfigError(f"label quantile must be in (0, 0.5], got {self.q}")


@dataclass(frozen=True)
class LabeledExample:
    news_id: int
    adjusted_return: float
    label: Union[int, str]  # 0, 1, or "excluded" (train only)
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"bad split {self.split!r}")
        if self.split == "train":
            if self.label not in (0, 1, EXCLUDED):
                raise ValueError(f"train label must be 0/1/{EXCLUDED}, got {self.label!r}")
        elif self.label not in (0, 1):
            raise ValueError(f"{self.split} label must be 0/1, got {self.label!r}")


def resolve_horizon(item: NewsItem, cal: TradingCalendar, cfg: HorizonConfig) -> timedelta:
    """Horizon for one news item, measured from its timestamp.

    Out-of-hours news are effectively anchored at the next market open: the
    returned duration ends ``delta_out_days`` trading days after that open.
    No price is observed between the timestamp and the open, so looking up
    the start price at the timestamp itself is equivalent.
    """
    if is_trading_hours(item.timestamp, cal):
        return cfg.delta_in
    start = cal.next_open(item.timestamp)
    start_day = cal.local(start).date()
    end = cal.open_instant(cal.add_trading_days(start_day, cfg.delta_out_days))
    return end - item.timestamp


def _covered_price(series: PriceSeries, instant: datetime, intraday: bool) -> float:
    hit = series.price_at(instant)
    if hit is None:
        raise NoPriceCoverage(series.instrument, instant, "no observation at or before")
    seen, price = hit
    if intraday:
        if instant - seen > INTRADAY_GRACE:
            raise NoPriceCoverage(series.instrument, instant, f"last observation {seen} too stale")
    else:
        cal = series.calendar
        if cal is None:
            raise ConfigError(f"{series.instrument}: calendar required for daily-horizon lookups")
        anchor = cal.trading_day_at_or_before(instant)
        limit = cal.open_instant(cal.add_trading_days(anchor, -DAILY_GRACE_TRADING_DAYS))
        if seen < limit:
            raise NoPriceCoverage(series.instrument, instant, f"last observation {seen} too stale")
    return price


def adjusted_return(
    stock: PriceSeries, market: PriceSeries, t: datetime, dt: timedelta
) -> float:
    """P_s(t+dt)/P_s(t) - P_m(t+dt)/P_m(t) with staleness-guarded lookups.

    Lookups shorter than one day are treated as intraday (30-minute grace);
    anything longer uses the 2-trading-day grace.
    """
    intraday = dt < _ONE_DAY
    s0 = _covered_price(stock, t, intraday)
    s1 = _covered_price(stock, t + dt, intraday)
    m0 = _covered_price(market, t, intraday)
    m1 = _covered_price(market, t + dt, intraday)
    return s1 / s0 - m1 / m0


def label_training(
    pairs: Sequence[tuple[int, float]],
    q: Union[LabelQuantile, float] = LabelQuantile(),
) -> list[LabeledExample]:
    """Label the top ceil(q*n) returns 1 and the bottom ceil(q*n) returns 0.

    Ties break by ascending news id. When 2*ceil(q*n) would exceed n (only
    possible for odd n at q near 0.5, or n == 1) each side is capped at
    n // 2 so the slices cannot overlap.
    """
    if not pairs:
        raise EmptyDataset("label_training needs at least one example")
    frac = q.q if isinstance(q, LabelQuantile) else LabelQuantile(q).q
    n = len(pairs)
    k = math.ceil(frac * n)
    if 2 * k > n:
        k = n // 2
    order = sorted(pairs, key=lambda p: (p[1], p[0]))
    bottom = {news_id for news_id, _ in order[:k]}
    top = {news_id for news_id, _ in order[n - k :]} if k else set()
    out = []
    for news_id, ret in pairs:
        if news_id in top:
            label: Union[int, str] = 1
        elif news_id in bottom:
            label = 0
        else:
            label = EXCLUDED
        out.append(LabeledExample(news_id, ret, label, "train"))
    return out


def label_eval(pairs: Sequence[tuple[int, float]], split: str) -> list[LabeledExample]:
    """Sign labels for dev/test: 1 iff the return is strictly positive."""
    if split not in ("dev", "test"):
        raise ValueError(f"label_eval split must be dev or test, got {split!r}")
    return [
        LabeledExample(news_id, ret, 1 if ret > 0 else 0, split) for news_id, ret in pairs
    ]


# ---------------------------------------------------------------------------
# labeled dataset CSV

LABELED_FIELDS = ("news_id", "adjusted_return", "label", "split")


def write_labeled(rows: Sequence[LabeledExample], path) -> None:
    lines = [",".join(LABELED_FIELDS)]
    for row in rows:
        lines.append(f"{row.news_id},{row.adjusted_return!r},{row.label},{row.split}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_labeled(path) -> list[LabeledExample]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read labeled dataset {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise IncompatibleArtifacts(f"{path}: empty labeled dataset") from None
    if tuple(h.strip() for h in header) != LABELED_FIELDS:
        raise IncompatibleArtifacts(
            f"{path}: labeled schema {header!r}, expected {','.join(LABELED_FIELDS)}"
        )
    rows = []
    for row_no, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != 4:
            raise IngestError(f"{path} row {row_no}: expected 4 columns")
        news_id, ret, label, split = row
        try:
            rows.append(
                LabeledExample(
                    int(news_id),
                    float(ret),
                    EXCLUDED if label == EXCLUDED else int(label),
                    split,
                )
            )
        except ValueError as exc:
            raise IngestError(f"{path} row {row_no}: {exc}") from exc
    return rows
