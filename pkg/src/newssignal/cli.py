"""Command-line front door: synth -> label -> train -> score -> eval ->
backtest, plus the embedding-layer ablation harness.

Exit codes: 0 ok, 2 config error, 3 data error, 4 incompatible artifacts.
Flags override values from the optional INI config file; defaults follow the
reported experiment choices (q=0.15, 30-minute/1-day horizons, 5-day
lookback, 4 bps cost, 250 trading days).
"""

from __future__ import annotations

import configparser
import functools
import json
import sys
from datetime import date, timedelta
from pathlib import Path

import click

from . import __version__, baselines, pipeline, rnn, synthetic
from .backtest import StrategyConfig, write_cumulative_pnl, write_ledger
from .corpus import load_calendar, load_daily_closes, load_news, load_price_series
from .embeddings import load_static_table, read_embeddings, read_file_header
from .errors import (
    ConfigError,
    DataError,
    IncompatibleArtifacts,
    NewsSignalError,
)
from .evaluation import frequent_words, percentile_thresholds, select_extreme
from .labeling import HorizonConfig, LabelQuantile, read_labeled, write_labeled
from .manifest import manifest_path, write_manifest
from .pipeline import evaluation_report, split_rows, windows_from_dates


def _die(exc: Exception, code: int) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except IncompatibleArtifacts as exc:
            _die(exc, 4)
        except ConfigError as exc:
            _die(exc, 2)
        except DataError as exc:
            _die(exc, 3)
        except NewsSignalError as exc:
            _die(exc, 2)

    return wrapper


class Conf:
    """Flag > config file > default resolution."""

    def __init__(self, path):
        self.parser = configparser.ConfigParser()
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"config file {path} not found")
            try:
                self.parser.read(path, encoding="utf-8")
            except configparser.Error as exc:
                raise ConfigError(f"bad config file {path}: {exc}") from exc

    def get(self, section, key, flag, default=None, cast=str):
        if flag is not None:
            return flag
        if self.parser.has_option(section, key):
            raw = self.parser.get(section, key)
            try:
                return cast(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"config [{section}] {key}={raw!r}: {exc}") from exc
        return default

    def require(self, section, key, flag, cast=str):
        value = self.get(section, key, flag, None, cast)
        if value is None:
            raise ConfigError(f"missing required option --{key.replace('_', '-')} (or [{section}] {key})")
        return value


def _parse_date(text) -> date:
    if isinstance(text, date):
        return text
    try:
        return date.fromisoformat(str(text))
    except ValueError as exc:
        raise ConfigError(f"bad date {text!r}, expected YYYY-MM-DD") from exc


def _parse_widths(text) -> tuple:
    try:
        return tuple(int(tok) for tok in str(text).replace(" ", "").split(",") if tok)
    except ValueError as exc:
        raise ConfigError(f"bad layer widths {text!r}") from exc


def _parse_levels(text) -> tuple:
    try:
        return tuple(float(tok) for tok in str(text).replace(" ", "").split(",") if tok)
    except ValueError as exc:
        raise ConfigError(f"bad percentile levels {text!r}") from exc


@click.group()
@click.version_option(__version__, prog_name="newssignal")
def main():
    """Headline sentiment pipeline: label, train, score, evaluate, backtest."""


config_option = click.option("--config", "config_path", type=click.Path(), default=None,
                             help="INI config file; flags override its values.")


# ---------------------------------------------------------------------------
# synth


@main.command()
@config_option
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--stocks", type=int, default=None)
@click.option("--days", type=int, default=None)
@click.option("--headlines-per-day", type=int, default=None)
@click.option("--vocab-size", type=int, default=None)
@click.option("--effect-size", type=float, default=None)
@click.option("--noise-vol", type=float, default=None)
@click.option("--signal-probability", type=float, default=None)
@click.option("--in-hours-fraction", type=float, default=None)
@click.option("--max-signal-words", type=int, default=None)
@click.option("--tokens-per-headline", type=int, default=None)
@click.option("--bar-minutes", type=int, default=None)
@click.option("--embed-dim", type=int, default=None)
@click.option("--start", default=None, help="First calendar day, YYYY-MM-DD.")
@_guard
def synth(config_path, out_dir, **flags):
    """Generate a deterministic planted-signal corpus."""
    conf = Conf(config_path)
    section = "synthetic"
    spec = synthetic.SyntheticSpec(
        seed=conf.get(section, "seed", flags["seed"], 7, int),
        n_stocks=conf.get(section, "stocks", flags["stocks"], 20, int),
        n_days=conf.get(section, "days", flags["days"], 60, int),
        headlines_per_day=conf.get(section, "headlines_per_day", flags["headlines_per_day"], 30, int),
        vocab_size=conf.get(section, "vocab_size", flags["vocab_size"], 200, int),
        effect_size=conf.get(section, "effect_size", flags["effect_size"], 0.04, float),
        noise_volatility=conf.get(section, "noise_vol", flags["noise_vol"], 0.0015, float),
        signal_probability=conf.get(section, "signal_probability", flags["signal_probability"], 0.7, float),
        in_hours_fraction=conf.get(section, "in_hours_fraction", flags["in_hours_fraction"], 0.6, float),
        max_signal_words=conf.get(section, "max_signal_words", flags["max_signal_words"], 3, int),
        tokens_per_headline=conf.get(section, "tokens_per_headline", flags["tokens_per_headline"], 8, int),
        bar_minutes=conf.get(section, "bar_minutes", flags["bar_minutes"], 5, int),
        embedding_dim=conf.get(section, "embed_dim", flags["embed_dim"], 16, int),
        start=_parse_date(conf.get(section, "start", flags["start"], "2021-01-04")),
    )
    paths = synthetic.generate(spec, out_dir)
    config_doc = {k: (str(v) if isinstance(v, (date, tuple)) else v)
                  for k, v in spec.__dict__.items()}
    write_manifest(manifest_path(paths["news"]), "synth", {}, config_doc, paths)
    click.echo(f"wrote {len(paths)} corpus files to {out_dir}")


# ---------------------------------------------------------------------------
# label


@main.command()
@config_option
@click.option("--news", "news_path", type=click.Path(), default=None)
@click.option("--prices-daily", type=click.Path(), default=None)
@click.option("--prices-minute", type=click.Path(), default=None)
@click.option("--calendar", "calendar_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--q", type=float, default=None, help="Training label quantile (default 0.15).")
@click.option("--delta-in-minutes", type=int, default=None)
@click.option("--delta-out-days", type=int, default=None)
@click.option("--train-start", default=None)
@click.option("--train-end", default=None)
@click.option("--test-start", default=None)
@click.option("--test-end", default=None)
@click.option("--dev-start", default=None)
@click.option("--dev-end", default=None)
@click.option("--index-symbol", default=None)
@_guard
def label(config_path, **flags):
    """Compute market-adjusted forward returns and write the labeled CSV."""
    conf = Conf(config_path)
    news_path = Path(conf.require("data", "news", flags["news_path"]))
    daily_path = Path(conf.require("data", "prices_daily", flags["prices_daily"]))
    minute_path = Path(conf.require("data", "prices_minute", flags["prices_minute"]))
    calendar_path = Path(conf.require("data", "calendar", flags["calendar_path"]))
    out_path = Path(conf.require("labeling", "out", flags["out_path"]))
    index_symbol = conf.get("data", "index_symbol", flags["index_symbol"], synthetic.INDEX_SYMBOL)

    horizon = HorizonConfig(
        delta_in=timedelta(minutes=conf.get("labeling", "delta_in_minutes", flags["delta_in_minutes"], 30, int)),
        delta_out_days=conf.get("labeling", "delta_out_days", flags["delta_out_days"], 1, int),
    )
    quantile = LabelQuantile(conf.get("labeling", "q", flags["q"], 0.15, float))
    window_args = {}
    for key in ("train_start", "train_end", "test_start", "test_end"):
        window_args[key] = _parse_date(conf.require("labeling", key, flags[key]))
    for key in ("dev_start", "dev_end"):
        raw = conf.get("labeling", key, flags[key])
        if raw is not None:
            window_args[key] = _parse_date(raw)
    windows = windows_from_dates(**window_args)

    cal = load_calendar(calendar_path)
    news, bad_rows = load_news(news_path)
    for err in bad_rows:
        click.echo(f"skipping news {err}", err=True)
    series = load_price_series(daily_path, minute_path, calendar=cal)
    rows, skipped = pipeline.label_corpus(
        news, series, index_symbol, cal, horizon, quantile, windows
    )
    write_labeled(rows, out_path)
    config_doc = {
        "q": quantile.q,
        "delta_in_minutes": int(horizon.delta_in.total_seconds() // 60),
        "delta_out_days": horizon.delta_out_days,
        "index_symbol": index_symbol,
        "windows": {k: str(v) for k, v in window_args.items()},
        "skipped": len(skipped),
    }
    write_manifest(
        manifest_path(out_path),
        "label",
        {"news": news_path, "prices_daily": daily_path, "prices_minute": minute_path,
         "calendar": calendar_path},
        config_doc,
        {"labeled": out_path},
    )
    click.echo(f"labeled {len(rows)} news ({len(skipped)} skipped) -> {out_path}")


# ---------------------------------------------------------------------------
# train


def _rnn_config(conf: Conf, flags) -> rnn.RnnConfig:
    return rnn.RnnConfig(
        cell_kind=conf.get("rnn", "cell", flags["cell"], "lstm"),
        layer_widths=_parse_widths(conf.get("rnn", "widths", flags["widths"], "16,8")),
        dropout=conf.get("rnn", "dropout", flags["dropout"], 0.5, float),
        seed=conf.get("rnn", "seed", flags["seed"], 0, int),
        learning_rate=conf.get("rnn", "learning_rate", flags["learning_rate"], 0.1, float),
        batch_size=conf.get("rnn", "batch_size", flags["batch_size"], 32, int),
        max_epochs=conf.get("rnn", "max_epochs", flags["max_epochs"], 50, int),
    )


def _load_features(conf: Conf, flags, *, required: bool):
    table_path = conf.get("data", "static_table", flags["static_table"])
    emb_path = conf.get("data", "embeddings", flags["embeddings_path"])
    table = load_static_table(Path(table_path)) if table_path else None
    emb_by_id = pipeline.embedding_lookup(read_embeddings(Path(emb_path))) if emb_path else None
    if required and table is None and emb_by_id is None:
        raise ConfigError("RNN models need --static-table or --embeddings")
    return table, emb_by_id, table_path, emb_path


@main.command()
@config_option
@click.option("--model", "model_kind", type=click.Choice(["nbc", "ssestm", "rnn-static", "rnn-contextual"]),
              default=None)
@click.option("--labeled", "labeled_path", type=click.Path(), default=None)
@click.option("--news", "news_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--static-table", type=click.Path(), default=None)
@click.option("--embeddings", "embeddings_path", type=click.Path(), default=None)
@click.option("--alpha", type=float, default=None, help="NBC add-alpha smoothing.")
@click.option("--alpha-plus", type=float, default=None)
@click.option("--min-count", type=int, default=None)
@click.option("--penalty", type=float, default=None)
@click.option("--cell", type=click.Choice(list(rnn.CELL_KINDS)), default=None)
@click.option("--widths", default=None)
@click.option("--dropout", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--max-epochs", type=int, default=None)
@_guard
def train(config_path, **flags):
    """Train a model on the train split of a labeled dataset."""
    conf = Conf(config_path)
    model_kind = conf.require("train", "model", flags["model_kind"])
    labeled_path = Path(conf.require("data", "labeled", flags["labeled_path"]))
    news_path = Path(conf.require("data", "news", flags["news_path"]))
    out_path = Path(conf.require("train", "out", flags["out_path"]))

    labeled = read_labeled(labeled_path)
    news, _ = load_news(news_path)
    news_by_id = {item.id: item for item in news}
    splits = split_rows(labeled)
    config_doc: dict = {"model": model_kind}
    inputs = {"labeled": labeled_path, "news": news_path}

    if model_kind == "nbc":
        alpha = conf.get("train", "alpha", flags["alpha"], 1.0, float)
        docs = [
            (pipeline.tokens_for(news_by_id, r.news_id), r.label)
            for r in splits["train"]
            if r.label != "excluded"
        ]
        baselines.save_nbc(baselines.nbc_train(docs, alpha), out_path)
        config_doc["alpha"] = alpha
    elif model_kind == "ssestm":
        alpha_plus = conf.get("train", "alpha_plus", flags["alpha_plus"], 0.6, float)
        min_count = conf.get("train", "min_count", flags["min_count"], 20, int)
        penalty = conf.get("train", "penalty", flags["penalty"], 0.1, float)
        docs = [
            (pipeline.tokens_for(news_by_id, r.news_id), r.label, r.adjusted_return)
            for r in splits["train"]
            if r.label != "excluded"
        ]
        model = baselines.ssestm_train(docs, alpha_plus=alpha_plus, min_count=min_count, penalty=penalty)
        baselines.save_ssestm(model, out_path)
        config_doc.update({"alpha_plus": alpha_plus, "min_count": min_count, "penalty": penalty})
    else:
        table, emb_by_id, table_path, emb_path = _load_features(conf, flags, required=True)
        if model_kind == "rnn-contextual" and emb_by_id is None:
            raise ConfigError("rnn-contextual needs --embeddings")
        if model_kind == "rnn-static" and table is None:
            raise ConfigError("rnn-static needs --static-table")
        use_emb = emb_by_id if model_kind == "rnn-contextual" else None
        use_table = table if model_kind == "rnn-static" else None
        config = _rnn_config(conf, flags)
        train_set, dev_set = pipeline.rnn_training_sets(labeled, news_by_id, use_table, use_emb)
        rnn.save_model(rnn.train(config, train_set, dev_set), out_path)
        config_doc.update({k: (list(v) if isinstance(v, tuple) else v)
                           for k, v in config.__dict__.items()})
        if use_table is not None:
            inputs["static_table"] = Path(table_path)
        if use_emb is not None:
            inputs["embeddings"] = Path(emb_path)

    write_manifest(manifest_path(out_path), "train", inputs, config_doc, {"model": out_path})
    click.echo(f"trained {model_kind} -> {out_path}")


# ---------------------------------------------------------------------------
# score


def _detect_model(path: Path):
    with open(path, "rb") as handle:
        if handle.read(4) == rnn.MAGIC:
            return "rnn", rnn.load_model(path)
    kind = baselines.sniff_bundle_kind(path)
    if kind == "nbc":
        return "nbc", baselines.load_nbc(path)
    if kind == "ssestm":
        return "ssestm", baselines.load_ssestm(path)
    raise IncompatibleArtifacts(f"{path}: not a recognized model artifact")


@main.command()
@config_option
@click.option("--model-file", type=click.Path(), default=None)
@click.option("--labeled", "labeled_path", type=click.Path(), default=None)
@click.option("--news", "news_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--static-table", type=click.Path(), default=None)
@click.option("--embeddings", "embeddings_path", type=click.Path(), default=None)
@_guard
def score(config_path, **flags):
    """Score every labeled news item with a trained model."""
    conf = Conf(config_path)
    model_file = Path(conf.require("score", "model_file", flags["model_file"]))
    labeled_path = Path(conf.require("data", "labeled", flags["labeled_path"]))
    news_path = Path(conf.require("data", "news", flags["news_path"]))
    out_path = Path(conf.require("score", "out", flags["out_path"]))

    kind, model = _detect_model(model_file)
    labeled = read_labeled(labeled_path)
    news, _ = load_news(news_path)
    news_by_id = {item.id: item for item in news}
    inputs = {"model": model_file, "labeled": labeled_path, "news": news_path}
    if kind == "rnn":
        table, emb_by_id, table_path, emb_path = _load_features(conf, flags, required=True)
        kind = "rnn-contextual" if emb_by_id is not None else "rnn-static"
        scored = pipeline.score_dataset(model, kind, labeled, news_by_id, table, emb_by_id)
        if emb_path:
            inputs["embeddings"] = Path(emb_path)
        elif table_path:
            inputs["static_table"] = Path(table_path)
    else:
        scored = pipeline.score_dataset(model, kind, labeled, news_by_id)
    pipeline.write_scores(scored, out_path)
    write_manifest(manifest_path(out_path), "score", inputs, {"model_kind": kind}, {"scores": out_path})
    click.echo(f"scored {len(scored)} news -> {out_path}")


# ---------------------------------------------------------------------------
# eval


@main.command("eval")
@config_option
@click.option("--scores", "scores_path", type=click.Path(), default=None)
@click.option("--labeled", "labeled_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--model-name", default=None)
@click.option("--levels", default=None, help="Comma-separated percentile levels (default 1,2,5,10).")
@click.option("--news", "news_path", type=click.Path(), default=None,
              help="News file, needed for --frequent-words.")
@click.option("--frequent-words", "words_path", type=click.Path(), default=None)
@click.option("--top-words", type=int, default=None)
@_guard
def eval_cmd(config_path, **flags):
    """Accuracy and MCC over the extreme percentile sets of the test split."""
    conf = Conf(config_path)
    scores_path = Path(conf.require("eval", "scores", flags["scores_path"]))
    labeled_path = Path(conf.require("data", "labeled", flags["labeled_path"]))
    out_path = Path(conf.require("eval", "out", flags["out_path"]))
    model_name = conf.get("eval", "model_name", flags["model_name"], "model")
    levels = _parse_levels(conf.get("eval", "levels", flags["levels"], "1,2,5,10"))

    scored = pipeline.read_scores(scores_path)
    labeled = read_labeled(labeled_path)
    rows = evaluation_report(scored, labeled, levels, model_name)
    pipeline.write_report(rows, out_path)
    inputs = {"scores": scores_path, "labeled": labeled_path}
    outputs = {"report": out_path}

    words_path = conf.get("eval", "frequent_words", flags["words_path"])
    if words_path:
        news_path = Path(conf.require("data", "news", flags["news_path"]))
        news, _ = load_news(news_path)
        news_by_id = {item.id: item for item in news}
        top_k = conf.get("eval", "top_words", flags["top_words"], 50, int)
        _write_frequent_words(
            scored, labeled, news_by_id, min(levels), top_k, Path(words_path)
        )
        inputs["news"] = news_path
        outputs["frequent_words"] = Path(words_path)

    write_manifest(manifest_path(out_path), "eval",
                   inputs, {"model_name": model_name, "levels": list(levels)}, outputs)
    for row in rows:
        click.echo(
            f"E_{2 * row['n']:g}: size={row['set_size']} accuracy={row['accuracy']:.4f} mcc={row['mcc']:.4f}"
        )


def _write_frequent_words(scored, labeled, news_by_id, n, top_k, path):
    by_id = {s.news_id: s for s in scored}
    splits = split_rows(labeled)
    train_scores = [by_id[r.news_id].score for r in splits["train"] if r.news_id in by_id]
    thresholds = percentile_thresholds(train_scores, n)
    test_scored = [by_id[r.news_id] for r in splits["test"] if r.news_id in by_id]
    chosen = select_extreme(test_scored, thresholds)
    plus = [news_by_id[s.news_id].headline for s in test_scored
            if s.news_id in chosen and s.score > thresholds.upper and s.news_id in news_by_id]
    minus = [news_by_id[s.news_id].headline for s in test_scored
             if s.news_id in chosen and s.score < thresholds.lower and s.news_id in news_by_id]
    pos_words, neg_words = frequent_words(plus, minus, k=top_k)
    lines = ["side,word,frequency"]
    for word, freq in pos_words:
        lines.append(f"positive,{word},{freq!r}")
    for word, freq in neg_words:
        lines.append(f"negative,{word},{freq!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# backtest


@main.command()
@config_option
@click.option("--scores", "scores_path", type=click.Path(), default=None)
@click.option("--labeled", "labeled_path", type=click.Path(), default=None)
@click.option("--news", "news_path", type=click.Path(), default=None)
@click.option("--prices-daily", type=click.Path(), default=None)
@click.option("--calendar", "calendar_path", type=click.Path(), default=None)
@click.option("--out-dir", type=click.Path(), default=None)
@click.option("--strategy", type=click.Choice(["s1", "s2"]), default=None)
@click.option("--n", "level", type=float, default=None, help="Extreme percentile level (default 1).")
@click.option("--lookback", type=int, default=None)
@click.option("--unit-notional", type=float, default=None)
@click.option("--top-k", type=int, default=None)
@click.option("--cost-rate", type=float, default=None)
@click.option("--trading-days", type=int, default=None)
@click.option("--index-symbol", default=None)
@_guard
def backtest(config_path, **flags):
    """Trade the extreme test news and write ledger + summary."""
    conf = Conf(config_path)
    scores_path = Path(conf.require("backtest", "scores", flags["scores_path"]))
    labeled_path = Path(conf.require("data", "labeled", flags["labeled_path"]))
    news_path = Path(conf.require("data", "news", flags["news_path"]))
    daily_path = Path(conf.require("data", "prices_daily", flags["prices_daily"]))
    calendar_path = Path(conf.require("data", "calendar", flags["calendar_path"]))
    out_dir = Path(conf.require("backtest", "out_dir", flags["out_dir"]))
    strategy = conf.get("backtest", "strategy", flags["strategy"], "s2")
    level = conf.get("backtest", "n", flags["level"], 1.0, float)
    index_symbol = conf.get("data", "index_symbol", flags["index_symbol"], synthetic.INDEX_SYMBOL)
    cfg = StrategyConfig(
        lookback_days=conf.get("backtest", "lookback", flags["lookback"], 5, int),
        unit_notional=conf.get("backtest", "unit_notional", flags["unit_notional"], 1.0, float),
        top_k=conf.get("backtest", "top_k", flags["top_k"], 20, int),
        cost_rate=conf.get("backtest", "cost_rate", flags["cost_rate"], 4e-4, float),
        trading_days_per_year=conf.get("backtest", "trading_days", flags["trading_days"], 250, int),
    )

    cal = load_calendar(calendar_path)
    news, _ = load_news(news_path)
    news_by_id = {item.id: item for item in news}
    scored = pipeline.read_scores(scores_path)
    labeled = read_labeled(labeled_path)
    closes = {
        name: dict(rows) for name, rows in load_daily_closes(daily_path).items()
    }
    net_ledger, gross_ledger, summary = pipeline.run_backtest(
        news_by_id, scored, labeled, closes, cal, cfg, level,
        strategy=strategy, index_symbol=index_symbol,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    ledger_path = out_dir / "ledger.csv"
    pnl_path = out_dir / "cumulative_pnl.csv"
    summary_path = out_dir / "summary.json"
    write_ledger(net_ledger, ledger_path)
    write_cumulative_pnl(net_ledger, pnl_path)
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_manifest(
        manifest_path(ledger_path),
        "backtest",
        {"scores": scores_path, "labeled": labeled_path, "news": news_path,
         "prices_daily": daily_path, "calendar": calendar_path},
        {"strategy": strategy, "n": level, **{k: getattr(cfg, k) for k in
         ("lookback_days", "unit_notional", "top_k", "cost_rate", "trading_days_per_year")}},
        {"ledger": ledger_path, "cumulative_pnl": pnl_path, "summary": summary_path},
    )
    click.echo(
        f"backtest {strategy} on E_{2 * level:g}: net annualized return "
        f"{summary['net']['annualized_return']:.4f}, gross {summary['gross']['annualized_return']:.4f}"
    )


# ---------------------------------------------------------------------------
# ablate-layer


@main.command("ablate-layer")
@config_option
@click.option("--embeddings", "embedding_paths", type=click.Path(), multiple=True)
@click.option("--labeled", "labeled_path", type=click.Path(), default=None)
@click.option("--news", "news_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--cell", type=click.Choice(list(rnn.CELL_KINDS)), default=None)
@click.option("--widths", default=None)
@click.option("--dropout", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--max-epochs", type=int, default=None)
@_guard
def ablate_layer(config_path, **flags):
    """Train one RNN per embedding file and compare E_2 accuracy by layer."""
    conf = Conf(config_path)
    paths = [Path(p) for p in flags["embedding_paths"]]
    if not paths:
        raise ConfigError("pass --embeddings once per layer file")
    labeled_path = Path(conf.require("data", "labeled", flags["labeled_path"]))
    news_path = Path(conf.require("data", "news", flags["news_path"]))
    out_path = Path(conf.require("ablate", "out", flags["out_path"]))
    config = _rnn_config(conf, flags)

    headers = [read_file_header(p) for p in paths]
    layers = [layer for _, layer, _ in headers]
    if len(set(layers)) != len(layers):
        raise IncompatibleArtifacts(f"duplicate layer tags across embedding files: {layers}")

    labeled = read_labeled(labeled_path)
    news, _ = load_news(news_path)
    news_by_id = {item.id: item for item in news}
    lines = ["layer,source,e1_accuracy"]
    for path, (source, layer, _) in zip(paths, headers):
        emb_by_id = pipeline.embedding_lookup(read_embeddings(path))
        train_set, dev_set = pipeline.rnn_training_sets(labeled, news_by_id, None, emb_by_id)
        model = rnn.train(config, train_set, dev_set)
        scored = pipeline.score_dataset(model, "rnn-contextual", labeled, news_by_id, None, emb_by_id)
        report = evaluation_report(scored, labeled, [1.0], f"layer{layer}")
        lines.append(f"{layer},{source},{report[0]['accuracy']!r}")
        click.echo(f"layer {layer} ({source}): E_2 accuracy {report[0]['accuracy']:.4f}")
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(
        manifest_path(out_path),
        "ablate-layer",
        {f"embeddings_{i}": p for i, p in enumerate(paths)}
        | {"labeled": labeled_path, "news": news_path},
        {k: (list(v) if isinstance(v, tuple) else v) for k, v in config.__dict__.items()},
        {"table": out_path},
    )


if __name__ == "__main__":
    main()
