"""Orchestration shared by the CLI commands: split windows, corpus labeling,
feature assembly, scoring, the evaluation report, and the backtest runner."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .backtest import (
    PortfolioLedger,
    StrategyConfig,
    aggregate_scores,
    annualized_return,
    sharpe,
    simulate,
    strategy_s1,
    strategy_s2,
)
from .corpus import NewsItem, PriceSeries, TradingCalendar, tokenize
from .embeddings import HeadlineEmbedding, StaticTable, embed_static
from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateSharpe,
    EmptyDataset,
    IncompatibleArtifacts,
    IngestError,
    NoPriceCoverage,
)
from .evaluation import (
    ScoredNews,
    accuracy,
    confusion,
    mcc,
    percentile_thresholds,
    select_extreme,
)
from .labeling import (
    EXCLUDED,
    HorizonConfig,
    LabeledExample,
    LabelQuantile,
    adjusted_return,
    label_eval,
    label_training,
    resolve_horizon,
)
from . import baselines, rnn

UTC = timezone.utc


# ---------------------------------------------------------------------------
# split windows


@dataclass(frozen=True)
class SplitWindows:
    """Half-open UTC intervals assigning news timestamps to splits."""

    train_start: datetime
    train_end: datetime
    dev_start: datetime
    dev_end: datetime
    test_start: datetime
    test_end: datetime

    def __post_init__(self):
        for a, b, name in (
            (self.train_start, self.train_end, "train"),
            (self.dev_start, self.dev_end, "dev"),
            (self.test_start, self.test_end, "test"),
        ):
            if a >= b:
                raise ConfigError(f"{name} window is empty ({a} .. {b})")
        if self.train_end > self.test_start and self.test_end > self.train_start:
            raise ConfigError("train and test windows overlap")

    def split_of(self, stamp: datetime) -> Optional[str]:
        # dev is carved out of the training window, so test it first
        if self.dev_start <= stamp < self.dev_end:
            return "dev"
        if self.train_start <= stamp < self.train_end:
            return "train"
        if self.test_start <= stamp < self.test_end:
            return "test"
        return None


def _midnight(day: date) -> datetime:
    return datetime(day.year, day.month, day.day, tzinfo=UTC)


def windows_from_dates(
    train_start: date,
    train_end: date,
    test_start: date,
    test_end: date,
    dev_start: Optional[date] = None,
    dev_end: Optional[date] = None,
) -> SplitWindows:
    """Build windows from whole UTC dates (end dates exclusive).

    Without explicit dev dates, the last 10% of the training span (at least
    one day) becomes the dev window.
    """
    t0, t1 = _midnight(train_start), _midnight(train_end)
    s0, s1 = _midnight(test_start), _midnight(test_end)
    if dev_start is None or dev_end is None:
        span_days = (t1 - t0).days
        dev_days = max(1, round(span_days * 0.1))
        d0, d1 = t1 - timedelta(days=dev_days), t1
        t1 = d0
    else:
        d0, d1 = _midnight(dev_start), _midnight(dev_end)
    return SplitWindows(
        train_start=t0, train_end=t1, dev_start=d0, dev_end=d1, test_start=s0, test_end=s1
    )


def rolling_windows(
    first: date, last: date, train_years: int = 3, test_years: int = 1, step_years: int = 1
):
    """Year-based walk-forward windows over [first, last]."""
    if train_years < 1 or test_years < 1 or step_years < 1:
        raise ConfigError("rolling window spans must be positive")
    windows = []
    year = first.year + train_years
    while year + test_years - 1 <= last.year:
        windows.append(
            windows_from_dates(
                date(year - train_years, 1, 1),
                date(year, 1, 1),
                date(year, 1, 1),
                date(year + test_years, 1, 1),
            )
        )
        year += step_years
    return windows


# ---------------------------------------------------------------------------
# labeling a corpus


def label_corpus(
    news: Sequence[NewsItem],
    series: Mapping[str, PriceSeries],
    market_symbol: str,
    cal: TradingCalendar,
    horizon: HorizonConfig,
    quantile: LabelQuantile,
    windows: SplitWindows,
) -> tuple[list, list]:
    """Labeled examples (sorted by id) plus (news_id, reason) skip diagnostics."""
    market = series.get(market_symbol)
    if market is None:
        raise NoPriceCoverage(market_symbol, detail="market index series missing")
    pairs: dict = {"train": [], "dev": [], "test": []}
    skipped: list = []
    for item in sorted(news, key=lambda n: n.id):
        split = windows.split_of(item.timestamp)
        if split is None:
            continue
        stock = series.get(item.ticker)
        if stock is None:
            skipped.append((item.id, f"no price series for {item.ticker}"))
            continue
        dt = resolve_horizon(item, cal, horizon)
        try:
            ret = adjusted_return(stock, market, item.timestamp, dt)
        except NoPriceCoverage as exc:
            skipped.append((item.id, str(exc)))
            continue
        pairs[split].append((item.id, ret))
    if not pairs["train"]:
        raise EmptyDataset("no train-split news survived labeling")
    rows = label_training(pairs["train"], quantile)
    rows += label_eval(pairs["dev"], "dev")
    rows += label_eval(pairs["test"], "test")
    rows.sort(key=lambda r: r.news_id)
    return rows, skipped


# ---------------------------------------------------------------------------
# feature assembly and scoring


def split_rows(labeled: Sequence[LabeledExample]) -> dict:
    out: dict = {"train": [], "dev": [], "test": []}
    for row in labeled:
        out[row.split].append(row)
    return out


def tokens_for(news_by_id: Mapping[int, NewsItem], news_id: int) -> list:
    item = news_by_id.get(news_id)
    if item is None:
        raise AlignmentError(f"labeled news {news_id} missing from the news file")
    return tokenize(item.headline)


def static_matrix(news_by_id, table: StaticTable, news_id: int) -> np.ndarray:
    return embed_static(tokens_for(news_by_id, news_id), table, news_id=news_id).matrix


def embedding_lookup(embeddings: Sequence[HeadlineEmbedding]) -> dict:
    return {emb.news_id: emb for emb in embeddings}


def matrix_for(
    news_id: int,
    news_by_id,
    table: Optional[StaticTable],
    emb_by_id: Optional[Mapping[int, HeadlineEmbedding]],
) -> np.ndarray:
    if emb_by_id is not None:
        emb = emb_by_id.get(news_id)
        if emb is None:
            raise AlignmentError(f"embedding file has no record for news {news_id}")
        return emb.matrix
    if table is None:
        raise ConfigError("a static table or an embedding file is required for RNN features")
    return static_matrix(news_by_id, table, news_id)


def rnn_training_sets(
    labeled: Sequence[LabeledExample],
    news_by_id,
    table: Optional[StaticTable] = None,
    emb_by_id: Optional[Mapping[int, HeadlineEmbedding]] = None,
) -> tuple[list, list]:
    """(train, dev) example lists for rnn.train; excluded rows are dropped."""
    splits = split_rows(labeled)
    train = [
        (matrix_for(r.news_id, news_by_id, table, emb_by_id), r.label)
        for r in splits["train"]
        if r.label != EXCLUDED
    ]
    dev = [(matrix_for(r.news_id, news_by_id, table, emb_by_id), r.label) for r in splits["dev"]]
    return train, dev


def score_dataset(
    model,
    model_kind: str,
    labeled: Sequence[LabeledExample],
    news_by_id,
    table: Optional[StaticTable] = None,
    emb_by_id: Optional[Mapping[int, HeadlineEmbedding]] = None,
) -> list:
    """Score every labeled news id (all splits), sorted by id."""
    ids = sorted({row.news_id for row in labeled})
    scored = []
    if model_kind in ("rnn-static", "rnn-contextual"):
        matrices = [matrix_for(nid, news_by_id, table, emb_by_id) for nid in ids]
        probs = rnn.predict_batch(model, matrices)
        scored = [ScoredNews.from_probability(nid, float(p)) for nid, p in zip(ids, probs)]
    elif model_kind == "nbc":
        for nid in ids:
            scored.append(
                ScoredNews.from_probability(nid, baselines.nbc_score(model, tokens_for(news_by_id, nid)))
            )
    elif model_kind == "ssestm":
        for nid in ids:
            scored.append(
                ScoredNews.from_probability(nid, baselines.ssestm_score(model, tokens_for(news_by_id, nid)))
            )
    else:
        raise ConfigError(f"unknown model kind {model_kind!r}")
    return scored


SCORES_FIELDS = ("news_id", "p_plus", "score")


def write_scores(scored: Sequence[ScoredNews], path) -> None:
    lines = [",".join(SCORES_FIELDS)]
    for s in scored:
        lines.append(f"{s.news_id},{s.p_plus!r},{s.score!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_scores(path) -> list:
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != SCORES_FIELDS:
        raise IncompatibleArtifacts(f"{path}: scores schema {header!r}, expected {','.join(SCORES_FIELDS)}")
    out = []
    for row_no, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != 3:
            raise IngestError(f"{path} row {row_no}: expected 3 columns")
        out.append(ScoredNews(news_id=int(row[0]), p_plus=float(row[1]), score=float(row[2])))
    return out


# ---------------------------------------------------------------------------
# evaluation report


def evaluation_report(
    scored: Sequence[ScoredNews],
    labeled: Sequence[LabeledExample],
    levels: Sequence[float],
    model_name: str,
) -> list:
    """Rows of model,n,set_size,accuracy,mcc over the extreme test sets.

    Thresholds come from this model's own training-split scores; the sets are
    selected and scored on the test split.
    """
    by_id = {s.news_id: s for s in scored}
    splits = split_rows(labeled)
    train_scores = [by_id[r.news_id].score for r in splits["train"] if r.news_id in by_id]
    if not train_scores:
        raise EmptyDataset("no training-split scores to compute percentiles from")
    test_rows = [r for r in splits["test"] if r.news_id in by_id]
    test_scored = [by_id[r.news_id] for r in test_rows]
    test_labels = {r.news_id: r.label for r in test_rows}
    report = []
    for n in levels:
        thresholds = percentile_thresholds(train_scores, n)
        chosen_ids = select_extreme(test_scored, thresholds)
        chosen = [s for s in test_scored if s.news_id in chosen_ids]
        if chosen:
            cm = confusion(chosen, test_labels)
            acc_value, mcc_value = accuracy(cm), mcc(cm)
        else:
            acc_value = mcc_value = float("nan")
        report.append(
            {"model": model_name, "n": n, "set_size": len(chosen), "accuracy": acc_value, "mcc": mcc_value}
        )
    return report


REPORT_FIELDS = ("model", "n", "set_size", "accuracy", "mcc")


def write_report(rows: Sequence[dict], path) -> None:
    lines = [",".join(REPORT_FIELDS)]
    for row in rows:
        lines.append(
            f"{row['model']},{row['n']:g},{row['set_size']},{row['accuracy']!r},{row['mcc']!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# backtest runner


def run_backtest(
    news_by_id: Mapping[int, NewsItem],
    scored: Sequence[ScoredNews],
    labeled: Sequence[LabeledExample],
    daily_closes: Mapping[str, Mapping[date, float]],
    cal: TradingCalendar,
    cfg: StrategyConfig,
    n: float,
    strategy: str = "s2",
    index_symbol: Optional[str] = None,
) -> tuple[PortfolioLedger, PortfolioLedger, dict]:
    """Trade the extreme test news; returns (net ledger, cost-free ledger, summary).

    Books form at each test-period close from extreme-set news no older than
    the lookback; positions earn close-to-close P&L the next day.
    """
    if strategy not in ("s1", "s2"):
        raise ConfigError(f"strategy must be s1 or s2, got {strategy!r}")
    by_id = {s.news_id: s for s in scored}
    splits = split_rows(labeled)
    train_scores = [by_id[r.news_id].score for r in splits["train"] if r.news_id in by_id]
    if not train_scores:
        raise EmptyDataset("no training-split scores to compute percentiles from")
    thresholds = percentile_thresholds(train_scores, n)
    test_rows = [r for r in splits["test"] if r.news_id in by_id]
    extreme_ids = select_extreme([by_id[r.news_id] for r in test_rows], thresholds)
    tradeable = []
    for row in test_rows:
        if row.news_id not in extreme_ids:
            continue
        item = news_by_id.get(row.news_id)
        if item is None:
            raise AlignmentError(f"scored news {row.news_id} missing from the news file")
        tradeable.append((item.ticker, item.timestamp, by_id[row.news_id].score))
    if not tradeable:
        raise EmptyDataset(f"extreme set E_{2 * n:g} is empty; nothing to trade")

    first_day, _ = cal.first_close_at_or_after(min(t for _, t, _ in tradeable))
    last_day, _ = cal.first_close_at_or_after(max(t for _, t, _ in tradeable))
    # news after the final close would push the range past the price data
    last_priced = max((max(series) for series in daily_closes.values() if series), default=None)
    if last_priced is not None and last_day > last_priced:
        last_day = last_priced
    if last_day < first_day:
        raise EmptyDataset("no priced trading day inside the extreme-news range")
    build = strategy_s1 if strategy == "s1" else strategy_s2
    books = []
    for day in cal.trading_days(first_day, last_day):
        means = aggregate_scores(tradeable, cal.close_instant(day), cal, cfg.lookback_days)
        books.append((day, build(means, cfg)))

    net_ledger = simulate(books, daily_closes, cfg, with_costs=True)
    gross_ledger = simulate(books, daily_closes, cfg, with_costs=False)
    summary = {
        "strategy": strategy,
        "n": n,
        "extreme_set_size": len(tradeable),
        "days": len(net_ledger.rows),
        "fill_assumption": "close_of_signal_day",
        "trading_days_per_year": cfg.trading_days_per_year,
        "cost_rate": cfg.cost_rate,
        "gross": _metrics(gross_ledger, cfg.trading_days_per_year),
        "net": _metrics(net_ledger, cfg.trading_days_per_year),
        "total_cost": net_ledger.total_cost(),
    }
    if index_symbol and index_symbol in daily_closes:
        series = daily_closes[index_symbol]
        days = [d for d, _ in books if d in series]
        if len(days) >= 2:
            summary["index_return_over_period"] = series[days[-1]] / series[days[0]] - 1.0
    return net_ledger, gross_ledger, summary


def _metrics(ledger: PortfolioLedger, trading_days: int) -> dict:
    out = {"annualized_return": annualized_return(ledger, trading_days)}
    try:
        out["sharpe"] = sharpe(ledger, trading_days)
    except DegenerateSharpe as exc:
        out["sharpe"] = None
        out["sharpe_note"] = str(exc)
    return out
