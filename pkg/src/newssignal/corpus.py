"""Ingestion and validation of news and price data, tokenization, and the
trading calendar used to classify news timestamps."""

from __future__ import annotations

import csv
import io
import json
import unicodedata
from bisect import bisect_right
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence
from zoneinfo import ZoneInfo

from .errors import ConfigError, IngestError

UTC = timezone.utc

NEWS_FIELDS = ("id", "timestamp", "ticker", "headline", "vendor_score", "vendor_confidence")


# ---------------------------------------------------------------------------
# news records


@dataclass(frozen=True)
class NewsItem:
    """One timestamped headline bound to one ticker.

    ``vendor_score``/``vendor_confidence`` are the optional third-party
    sentiment columns; they are carried through verbatim and never recomputed.
    """

    id: int
    timestamp: datetime  # UTC, millisecond precision
    ticker: str
    headline: str
    vendor_score: Optional[int] = None
    vendor_confidence: Optional[int] = None

    def problem(self) -> Optional[tuple[str, str]]:
        """First violated invariant as (field, message), or None if valid."""
        if not 0 <= self.id < 2**64:
            return "id", f"id {self.id} outside unsigned 64-bit range"
        if not self.headline.strip():
            return "headline", "headline empty after trimming"
        if not self.ticker:
            return "ticker", "ticker empty"
        if (self.vendor_score is None) != (self.vendor_confidence is None):
            return "vendor_confidence", "vendor_confidence present iff vendor_score present"
        if self.vendor_score is not None and self.vendor_score not in (-1, 0, 1):
            return "vendor_score", f"vendor_score {self.vendor_score} not in {{-1,0,+1}}"
        if self.vendor_confidence is not None and not 0 <= self.vendor_confidence <= 100:
            return "vendor_confidence", f"vendor_confidence {self.vendor_confidence} outside [0,100]"
        return None


@dataclass(frozen=True)
class RowError:
    """Diagnostic for one rejected input row."""

    row: int
    field: str
    message: str

    def __str__(self) -> str:
        return f"row {self.row}: {self.field}: {self.message}"


def parse_instant(text: str) -> datetime:
    """Parse an RFC-3339 instant into a UTC datetime at millisecond precision.

    Naive timestamps are taken as UTC (the feed does not state a zone).
    """
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValueError(f"bad timestamp {text!r}") from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=UTC)
    stamp = stamp.astimezone(UTC)
    return stamp.replace(microsecond=stamp.microsecond // 1000 * 1000)


def format_instant(stamp: datetime) -> str:
    stamp = stamp.astimezone(UTC)
    return stamp.strftime("%Y-%m-%dT%H:%M:%S.") + f"{stamp.microsecond // 1000:03d}Z"


def _as_text(source) -> str:
    if isinstance(source, Path):
        try:
            return source.read_text(encoding="utf-8")
        except OSError as exc:
            raise IngestError(f"cannot read {source}: {exc}") from exc
        except UnicodeDecodeError as exc:
            raise IngestError(f"{source} is not valid UTF-8: {exc}") from exc
    if isinstance(source, bytes):
        try:
            return source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IngestError(f"stream is not valid UTF-8: {exc}") from exc
    if isinstance(source, str):
        return source
    if hasattr(source, "read"):
        data = source.read()
        return _as_text(data)
    raise IngestError(f"unsupported news source type {type(source).__name__}")


def _build_item(fields: dict, row: int, errors: list[RowError], seen: set[int]) -> Optional[NewsItem]:
    try:
        news_id = int(fields["id"])
    except (ValueError, TypeError):
        errors.append(RowError(row, "id", f"not an integer: {fields.get('id')!r}"))
        return None
    try:
        stamp = parse_instant(str(fields["timestamp"]))
    except ValueError as exc:
        errors.append(RowError(row, "timestamp", str(exc)))
        return None

    def opt_int(name: str) -> Optional[int]:
        value = fields.get(name)
        if value is None or value == "":
            return None
        return int(value)

    try:
        score = opt_int("vendor_score")
        confidence = opt_int("vendor_confidence")
    except (ValueError, TypeError):
        errors.append(RowError(row, "vendor_score", "vendor columns must be integers"))
        return None

    item = NewsItem(
        id=news_id,
        timestamp=stamp,
        ticker=str(fields["ticker"]).strip(),
        headline=str(fields["headline"]),
        vendor_score=score,
        vendor_confidence=confidence,
    )
    bad = item.problem()
    if bad is not None:
        errors.append(RowError(row, bad[0], bad[1]))
        return None
    if news_id in seen:
        errors.append(RowError(row, "id", f"duplicate id {news_id}"))
        return None
    seen.add(news_id)
    return item


def parse_news(source, format_tag: str = "csv") -> tuple[list[NewsItem], list[RowError]]:
    """Parse a CSV or JSON-lines news stream.

    Valid records come back in input order; rows violating the ``NewsItem``
    invariants are rejected individually with row-indexed diagnostics.
    An unreadable stream raises :class:`IngestError`.
    """
    text = _as_text(source)
    if format_tag == "csv":
        return _parse_news_csv(text)
    if format_tag in ("jsonl", "json-lines"):
        return _parse_news_jsonl(text)
    raise ConfigError(f"unknown news format {format_tag!r} (expected csv or jsonl)")


def _parse_news_csv(text: str) -> tuple[list[NewsItem], list[RowError]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return [], []
    except csv.Error as exc:
        raise IngestError(f"unreadable CSV: {exc}") from exc
    if tuple(h.strip() for h in header) != NEWS_FIELDS:
        raise IngestError(f"bad news header {header!r}, expected {','.join(NEWS_FIELDS)}")
    items: list[NewsItem] = []
    errors: list[RowError] = []
    seen: set[int] = set()
    for row_no, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(NEWS_FIELDS):
            errors.append(RowError(row_no, "row", f"expected {len(NEWS_FIELDS)} columns, got {len(row)}"))
            continue
        fields = dict(zip(NEWS_FIELDS, row))
        item = _build_item(fields, row_no, errors, seen)
        if item is not None:
            items.append(item)
    return items, errors


def _parse_news_jsonl(text: str) -> tuple[list[NewsItem], list[RowError]]:
    items: list[NewsItem] = []
    errors: list[RowError] = []
    seen: set[int] = set()
    # split on "\n" only: JSON strings may contain other Unicode line separators
    for row_no, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(RowError(row_no, "row", f"invalid JSON: {exc}"))
            continue
        if not isinstance(obj, dict):
            errors.append(RowError(row_no, "row", "expected a JSON object"))
            continue
        missing = [k for k in ("id", "timestamp", "ticker", "headline") if k not in obj]
        if missing:
            errors.append(RowError(row_no, missing[0], "missing field"))
            continue
        fields = {k: obj.get(k) for k in NEWS_FIELDS}
        item = _build_item(fields, row_no, errors, seen)
        if item is not None:
            items.append(item)
    return items, errors


def serialize_news(items: Iterable[NewsItem], format_tag: str = "csv") -> str:
    """Inverse of :func:`parse_news` on valid items (round-trips exactly)."""
    if format_tag == "csv":
        lines = [",".join(NEWS_FIELDS)]
        for item in items:
            if any(ch in item.ticker for ch in ',"\n'):
                raise ValueError(f"ticker {item.ticker!r} not representable in CSV")
            if "\x00" in item.headline:
                raise ValueError("NUL byte in headline is not representable in CSV")
            headline = '"' + item.headline.replace('"', '""') + '"'
            score = "" if item.vendor_score is None else str(item.vendor_score)
            conf = "" if item.vendor_confidence is None else str(item.vendor_confidence)
            lines.append(
                f"{item.id},{format_instant(item.timestamp)},{item.ticker},{headline},{score},{conf}"
            )
        return "\n".join(lines) + "\n"
    if format_tag in ("jsonl", "json-lines"):
        lines = []
        for item in items:
            lines.append(
                json.dumps(
                    {
                        "id": item.id,
                        "timestamp": format_instant(item.timestamp),
                        "ticker": item.ticker,
                        "headline": item.headline,
                        "vendor_score": item.vendor_score,
                        "vendor_confidence": item.vendor_confidence,
                    },
                    ensure_ascii=False,
                )
            )
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown news format {format_tag!r}")


def load_news(path, format_tag: Optional[str] = None) -> tuple[list[NewsItem], list[RowError]]:
    path = Path(path)
    if format_tag is None:
        format_tag = "jsonl" if path.suffix in (".jsonl", ".ndjson") else "csv"
    return parse_news(path, format_tag)


# ---------------------------------------------------------------------------
# tokenizer

def tokenize(headline: str) -> list[str]:
    """Lowercase, strip Unicode punctuation, split on whitespace runs.

    Deliberately simple: this feeds the frequency classifiers and the static
    embedding lookup only; subword tokenization belongs to the exporter.
    """
    tokens = []
    for raw in headline.split():
        chars = [ch for ch in raw.lower() if not unicodedata.category(ch).startswith("P")]
        token = "".join(chars)
        if token:
            tokens.append(token)
    return tokens


# ---------------------------------------------------------------------------
# trading calendar


@dataclass(frozen=True)
class TradingCalendar:
    """Session times in a named zone, Monday-Friday minus holidays."""

    open_time: time
    close_time: time
    zone: ZoneInfo
    holidays: frozenset = frozenset()

    def __post_init__(self):
        if self.open_time >= self.close_time:
            raise ConfigError("calendar open_time must precede close_time")

    def local(self, instant: datetime) -> datetime:
        return instant.astimezone(self.zone)

    def is_trading_day(self, day: date) -> bool:
        return day.weekday() < 5 and day not in self.holidays

    def open_instant(self, day: date) -> datetime:
        return datetime.combine(day, self.open_time, tzinfo=self.zone).astimezone(UTC)

    def close_instant(self, day: date) -> datetime:
        return datetime.combine(day, self.close_time, tzinfo=self.zone).astimezone(UTC)

    def next_open(self, instant: datetime) -> datetime:
        """First session open strictly after `instant` (or at it, pre-open)."""
        day = self.local(instant).date()
        if self.is_trading_day(day) and instant < self.open_instant(day):
            return self.open_instant(day)
        for _ in range(366):
            day += timedelta(days=1)
            if self.is_trading_day(day):
                return self.open_instant(day)
        raise ConfigError("no trading day within a year; check the holiday list")

    def trading_day_at_or_before(self, instant: datetime) -> date:
        """Latest trading day whose session opens at or before `instant`."""
        day = self.local(instant).date()
        for _ in range(366):
            if self.is_trading_day(day) and self.open_instant(day) <= instant:
                return day
            day -= timedelta(days=1)
        raise ConfigError("no trading day within a year; check the holiday list")

    def add_trading_days(self, day: date, n: int) -> date:
        """Move n trading days from a trading day (n may be negative)."""
        if not self.is_trading_day(day):
            raise ValueError(f"{day} is not a trading day")
        step = timedelta(days=1 if n >= 0 else -1)
        remaining = abs(n)
        while remaining:
            day += step
            if self.is_trading_day(day):
                remaining -= 1
        return day

    def trading_days(self, first: date, last: date) -> list[date]:
        """All trading days in [first, last]."""
        out = []
        day = first
        while day <= last:
            if self.is_trading_day(day):
                out.append(day)
            day += timedelta(days=1)
        return out

    def first_close_at_or_after(self, instant: datetime) -> tuple[date, datetime]:
        day = self.local(instant).date()
        for _ in range(366):
            if self.is_trading_day(day):
                close = self.close_instant(day)
                if close >= instant:
                    return day, close
            day += timedelta(days=1)
        raise ConfigError("no trading day within a year; check the holiday list")


def is_trading_hours(instant: datetime, cal: TradingCalendar) -> bool:
    """True iff `instant` falls in [open, close) on a non-holiday weekday.

    Half-open on purpose: a headline stamped exactly at the close cannot be
    filled intraday anymore.
    """
    local = cal.local(instant)
    day = local.date()
    return cal.is_trading_day(day) and cal.open_time <= local.time() < cal.close_time


def load_calendar(path) -> TradingCalendar:
    """Read the key-value calendar file (open=, close=, zone=, holidays=)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read calendar {path}: {exc}") from exc
    values: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"calendar {path} line {line_no}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    for required in ("open", "close", "zone"):
        if required not in values:
            raise ConfigError(f"calendar {path}: missing {required}=")

    def parse_hhmm(text: str, key: str) -> time:
        try:
            hours, minutes = text.split(":")
            return time(int(hours), int(minutes))
        except ValueError as exc:
            raise ConfigError(f"calendar {path}: bad {key} time {text!r}") from exc

    try:
        zone = ZoneInfo(values["zone"])
    except Exception as exc:
        raise ConfigError(f"calendar {path}: unknown zone {values['zone']!r}") from exc
    holidays = frozenset(
        date.fromisoformat(tok.strip())
        for tok in values.get("holidays", "").split(",")
        if tok.strip()
    )
    return TradingCalendar(
        open_time=parse_hhmm(values["open"], "open"),
        close_time=parse_hhmm(values["close"], "close"),
        zone=zone,
        holidays=holidays,
    )


def save_calendar(cal: TradingCalendar, path) -> None:
    lines = [
        f"open={cal.open_time.strftime('%H:%M')}",
        f"close={cal.close_time.strftime('%H:%M')}",
        f"zone={cal.zone.key}",
    ]
    if cal.holidays:
        lines.append("holidays=" + ",".join(d.isoformat() for d in sorted(cal.holidays)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# price series


class PriceSeries:
    """Corporate-action-adjusted daily closes plus optional minute bars.

    Lookups follow the last-observation-at-or-before rule over the merged
    timeline; daily closes are materialized at the calendar close time, so a
    calendar must be bound before lookups when daily data is present.
    """

    def __init__(
        self,
        instrument: str,
        daily_closes: Sequence[tuple[date, float]] = (),
        minute_bars: Sequence[tuple[datetime, float]] = (),
        calendar: Optional[TradingCalendar] = None,
    ):
        self.instrument = instrument
        self.daily_closes = list(daily_closes)
        self.minute_bars = list(minute_bars)
        self.calendar = calendar
        self._times: Optional[list[datetime]] = None
        self._prices: Optional[list[float]] = None
        self._validate()

    def _validate(self) -> None:
        for seq, kind in ((self.daily_closes, "daily"), (self.minute_bars, "minute")):
            prev = None
            for stamp, price in seq:
                if price <= 0:
                    raise IngestError(f"{self.instrument}: non-positive {kind} price {price} at {stamp}")
                if prev is not None and stamp <= prev:
                    raise IngestError(f"{self.instrument}: {kind} timestamps not strictly increasing at {stamp}")
                prev = stamp

    def bind(self, calendar: TradingCalendar) -> "PriceSeries":
        self.calendar = calendar
        self._times = None
        self._prices = None
        return self

    def _observations(self) -> tuple[list[datetime], list[float]]:
        if self._times is None:
            entries: list[tuple[datetime, int, float]] = [
                (stamp, 0, price) for stamp, price in self.minute_bars
            ]
            if self.daily_closes:
                if self.calendar is None:
                    raise ConfigError(
                        f"{self.instrument}: calendar required to place daily closes in time"
                    )
                entries.extend(
                    (self.calendar.close_instant(day), 1, price) for day, price in self.daily_closes
                )
            entries.sort(key=lambda e: (e[0], e[1]))
            times: list[datetime] = []
            prices: list[float] = []
            for stamp, _, price in entries:
                if times and stamp == times[-1]:
                    continue  # close duplicated as a bar: the bar (sorted first) wins
                times.append(stamp)
                prices.append(price)
            self._times, self._prices = times, prices
        return self._times, self._prices

    def price_at(self, instant: datetime) -> Optional[tuple[datetime, float]]:
        """Last observation at or before `instant`, or None."""
        times, prices = self._observations()
        idx = bisect_right(times, instant) - 1
        if idx < 0:
            return None
        return times[idx], prices[idx]

    def __repr__(self) -> str:
        return (
            f"PriceSeries({self.instrument!r}, {len(self.daily_closes)} daily, "
            f"{len(self.minute_bars)} minute)"
        )


PRICE_HEADER = ("instrument", "timestamp", "price")


def _read_price_rows(path) -> Iterable[tuple[int, list[str]]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read prices {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return
    if tuple(h.strip() for h in header) != PRICE_HEADER:
        raise IngestError(f"bad price header {header!r} in {path}")
    for row_no, row in enumerate(reader, start=1):
        if row:
            yield row_no, row


def load_daily_closes(path) -> dict[str, list[tuple[date, float]]]:
    out: dict[str, list[tuple[date, float]]] = {}
    for row_no, row in _read_price_rows(path):
        if len(row) != 3:
            raise IngestError(f"{path} row {row_no}: expected 3 columns")
        instrument, stamp, price = row
        try:
            out.setdefault(instrument, []).append((date.fromisoformat(stamp), float(price)))
        except ValueError as exc:
            raise IngestError(f"{path} row {row_no}: {exc}") from exc
    return out

def load_minute_bars(path) -> dict[str, list[tuple[datetime, float]]]:
    out: dict[str, list[tuple[datetime, float]]] = {}
    for row_no, row in _read_price_rows(path):
        if len(row) != 3:
            raise IngestError(f"{path} row {row_no}: expected 3 columns")
        instrument, stamp, price = row
        try:
            out.setdefault(instrument, []).append((parse_instant(stamp), float(price)))
        except ValueError as exc:
            raise IngestError(f"{path} row {row_no}: {exc}") from exc
    return out


def load_price_series(
    daily_path,
    minute_path=None,
    calendar: Optional[TradingCalendar] = None,
) -> dict[str, PriceSeries]:
    """Load one PriceSeries per instrument from the daily/minute CSV files."""
    daily = load_daily_closes(daily_path)
    minute = load_minute_bars(minute_path) if minute_path is not None else {}
    out = {}
    for instrument in sorted(set(daily) | set(minute)):
        out[instrument] = PriceSeries(
            instrument,
            daily_closes=daily.get(instrument, ()),
            minute_bars=minute.get(instrument, ()),
            calendar=calendar,
        )
    return out
