"""Deterministic planted-signal corpus generator.

Builds a news file, daily-close and minute-bar price files, a calendar, and
a static embedding table for the generated vocabulary. Headlines sample
background tokens uniformly; with a fixed probability a headline embeds one
to `max_signal_words` words from one sign's signal list, and the matching
stock price jumps by (1 + effect_size)^(+-k) at the first bar after the news
lands (next session open for out-of-hours news). The market index is the
equal-weight average of the constituent prices at every timestamp.

All randomness comes from the splitmix PRNG, so identical specs produce
byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path
from zoneinfo import ZoneInfo

from .corpus import NewsItem, TradingCalendar, format_instant, save_calendar, serialize_news
from .embeddings import StaticTable, save_static_table
from .errors import ConfigError
from .prng import SplitMix64

INDEX_SYMBOL = "INDEX"

DEFAULT_POSITIVE = ("upgraded", "beats", "wins", "raises", "surges", "approval", "record", "buyback")
DEFAULT_NEGATIVE = ("downgraded", "misses", "cuts", "falls", "slumps", "lawsuit", "recall", "warns")

_SESSION_SECONDS = None  # derived from the calendar below


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int = 7
    n_stocks: int = 20
    n_days: int = 60
    headlines_per_day: int = 30
    vocab_size: int = 200
    positive_words: tuple = DEFAULT_POSITIVE
    negative_words: tuple = DEFAULT_NEGATIVE
    effect_size: float = 0.04
    noise_volatility: float = 0.0015  # per-bar return standard deviation
    signal_probability: float = 0.7
    max_signal_words: int = 3  # headline intensity: 1..k words, jump scales with k
    in_hours_fraction: float = 0.6
    tokens_per_headline: int = 8
    bar_minutes: int = 5
    embedding_dim: int = 16
    base_price: float = 100.0
    start: date = date(2021, 1, 4)

    def __post_init__(self):
        if set(self.positive_words) & set(self.negative_words):
            raise ConfigError("signal word lists must be disjoint")
        if self.effect_size < 0:
            raise ConfigError("effect_size must be non-negative")
        if self.noise_volatility < 0:
            raise ConfigError("noise_volatility must be non-negative")
        if not 0 <= self.signal_probability <= 1:
            raise ConfigError("signal_probability must be in [0, 1]")
        if not 0 <= self.in_hours_fraction <= 1:
            raise ConfigError("in_hours_fraction must be in [0, 1]")
        if self.max_signal_words < 1 or self.max_signal_words > self.tokens_per_headline:
            raise ConfigError("max_signal_words must be in [1, tokens_per_headline]")
        for name in ("n_stocks", "n_days", "headlines_per_day", "vocab_size",
                     "tokens_per_headline", "bar_minutes", "embedding_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if (17 * 60 + 30 - 9 * 60) % self.bar_minutes:
            raise ConfigError("bar_minutes must divide the 510-minute session")


def calendar() -> TradingCalendar:
    return TradingCalendar(open_time=time(9, 0), close_time=time(17, 30), zone=ZoneInfo("Europe/Paris"))


def trading_days(spec: SyntheticSpec) -> list:
    cal = calendar()
    days = []
    day = spec.start
    while len(days) < spec.n_days:
        if cal.is_trading_day(day):
            days.append(day)
        day += timedelta(days=1)
    return days


def ticker(i: int) -> str:
    return f"STK{i:03d}"


def vocabulary(spec: SyntheticSpec) -> list:
    background = [f"w{i:03d}" for i in range(spec.vocab_size)]
    return background + list(spec.positive_words) + list(spec.negative_words)


def _local(day: date, seconds: int, zone: ZoneInfo) -> datetime:
    return datetime.combine(day, time(0, 0), tzinfo=zone) + timedelta(seconds=seconds)


def _make_news(spec: SyntheticSpec, days, cal) -> tuple[list, dict]:
    """News items plus per-stock jump events (utc instant, price factor)."""
    rng = SplitMix64(spec.seed).child(1)
    zone = cal.zone
    session_seconds = 510 * 60
    items = []
    events: dict = {i: [] for i in range(spec.n_stocks)}
    news_id = 1
    background = spec.vocab_size
    for day in days:
        for _ in range(spec.headlines_per_day):
            stock = rng.below(spec.n_stocks)
            in_hours = rng.uniform() < spec.in_hours_fraction
            if in_hours:
                stamp = _local(day, 9 * 3600 + int(rng.uniform() * session_seconds), zone)
            elif rng.uniform() < 0.5:
                stamp = _local(day, int(rng.uniform() * 9 * 3600), zone)  # pre-open
            else:
                stamp = _local(day, int(17.5 * 3600) + int(rng.uniform() * 6.5 * 3600), zone)
            stamp_utc = stamp.astimezone(ZoneInfo("UTC"))
            tokens = [f"w{rng.below(background):03d}" for _ in range(spec.tokens_per_headline)]
            if rng.uniform() < spec.signal_probability and spec.effect_size >= 0:
                positive = rng.uniform() < 0.5
                intensity = 1 + rng.below(spec.max_signal_words)
                words = spec.positive_words if positive else spec.negative_words
                used: set = set()
                for _ in range(intensity):
                    position = rng.below(spec.tokens_per_headline)
                    while position in used:
                        position = rng.below(spec.tokens_per_headline)
                    used.add(position)
                    tokens[position] = words[rng.below(len(words))]
                if spec.effect_size > 0:
                    factor = (1.0 + spec.effect_size) ** (intensity if positive else -intensity)
                    if in_hours:
                        event_time = stamp_utc
                    else:
                        event_time = cal.next_open(stamp_utc)
                    events[stock].append((event_time, factor))
            items.append(
                NewsItem(id=news_id, timestamp=stamp_utc, ticker=ticker(stock), headline=" ".join(tokens))
            )
            news_id += 1
    for stock in events:
        events[stock].sort(key=lambda e: e[0])
    return items, events


def _bar_grid(days, cal, bar_minutes: int) -> list:
    grid = []
    for day in days:
        day_bars = []
        base = datetime.combine(day, time(9, 0), tzinfo=cal.zone)
        for i in range(510 // bar_minutes + 1):
            day_bars.append((base + timedelta(minutes=i * bar_minutes)).astimezone(ZoneInfo("UTC")))
        grid.append(day_bars)
    return grid


def _make_prices(spec: SyntheticSpec, days, cal, events) -> tuple[dict, dict]:
    """Per-instrument minute bars and daily closes, index included."""
    grid = _bar_grid(days, cal, spec.bar_minutes)
    flat_grid = [stamp for day_bars in grid for stamp in day_bars]
    root = SplitMix64(spec.seed)
    paths = []
    for stock in range(spec.n_stocks):
        rng = root.child(100 + stock)
        pending = events[stock]
        cursor = 0
        price = spec.base_price
        series = []
        for stamp in flat_grid:
            while cursor < len(pending) and pending[cursor][0] < stamp:
                price *= pending[cursor][1]
                cursor += 1
            step = 1.0 + spec.noise_volatility * rng.normal()
            price *= max(step, 0.01)
            series.append(price)
        paths.append(series)

    minute: dict = {}
    daily: dict = {}
    for stock in range(spec.n_stocks):
        name = ticker(stock)
        minute[name] = list(zip(flat_grid, paths[stock]))
    index_path = [sum(path[i] for path in paths) / spec.n_stocks for i in range(len(flat_grid))]
    minute[INDEX_SYMBOL] = list(zip(flat_grid, index_path))

    bars_per_day = 510 // spec.bar_minutes + 1
    for name, bars in minute.items():
        closes = []
        for day_index, day in enumerate(days):
            closes.append((day, bars[(day_index + 1) * bars_per_day - 1][1]))
        daily[name] = closes
    return minute, daily


def _make_table(spec: SyntheticSpec) -> StaticTable:
    rng = SplitMix64(spec.seed).child(2)
    vectors = {}
    for token in vocabulary(spec):
        vectors[token] = [rng.normal() for _ in range(spec.embedding_dim)]
    return StaticTable(dimension=spec.embedding_dim, vectors=vectors)


def generate(spec: SyntheticSpec, out_dir) -> dict:
    """Write the corpus files into `out_dir` and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cal = calendar()
    days = trading_days(spec)
    items, events = _make_news(spec, days, cal)
    minute, daily = _make_prices(spec, days, cal, events)

    paths = {
        "news": out / "news.csv",
        "prices_daily": out / "prices_daily.csv",
        "prices_minute": out / "prices_minute.csv",
        "calendar": out / "calendar.txt",
        "static_table": out / "static_table.txt",
    }
    paths["news"].write_text(serialize_news(items), encoding="utf-8")

    daily_lines = ["instrument,timestamp,price"]
    for name in sorted(daily):
        for day, price in daily[name]:
            daily_lines.append(f"{name},{day.isoformat()},{price!r}")
    paths["prices_daily"].write_text("\n".join(daily_lines) + "\n", encoding="utf-8")

    minute_lines = ["instrument,timestamp,price"]
    for name in sorted(minute):
        for stamp, price in minute[name]:
            minute_lines.append(f"{name},{format_instant(stamp)},{price!r}")
    paths["prices_minute"].write_text("\n".join(minute_lines) + "\n", encoding="utf-8")

    save_calendar(cal, paths["calendar"])
    save_static_table(_make_table(spec), paths["static_table"])
    return paths
