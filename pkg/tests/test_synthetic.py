"""Deterministic PRNG and the planted-signal corpus generator."""

import math
from datetime import date

import numpy as np
import pytest

from newssignal.corpus import load_daily_closes, load_minute_bars, load_news
from newssignal.errors import ConfigError
from newssignal.prng import SplitMix64
from newssignal.synthetic import (
    INDEX_SYMBOL,
    SyntheticSpec,
    generate,
    trading_days,
    vocabulary,
)


# ---------------------------------------------------------------------------
# PRNG


def test_stream_is_reproducible():
    a = SplitMix64(42)
    b = SplitMix64(42)
    assert [a.next_u64() for _ in range(10)] == [b.next_u64() for _ in range(10)]


def test_known_splitmix_values():
    # golden values computed once from the integer recurrence itself
    rng = SplitMix64(0)
    assert rng.next_u64() == 16294208416658607535
    assert rng.next_u64() == 7960286522194355700


def test_uniform_bounds_and_moments():
    rng = SplitMix64(7)
    draws = [rng.uniform() for _ in range(20_000)]
    assert all(0.0 <= u < 1.0 for u in draws)
    assert abs(np.mean(draws) - 0.5) < 0.01


def test_normal_moments():
    rng = SplitMix64(9)
    draws = [rng.normal() for _ in range(20_000)]
    assert abs(np.mean(draws)) < 0.03
    assert abs(np.std(draws) - 1.0) < 0.03


def test_children_are_independent_of_draw_order():
    parent = SplitMix64(5)
    child_before = parent.child(3)
    parent.next_u64()
    child_after = SplitMix64(5).child(3)
    assert [child_before.next_u64() for _ in range(5)] == [
        child_after.next_u64() for _ in range(5)
    ]
    assert parent.child(1).next_u64() != parent.child(2).next_u64()


def test_below_in_range():
    rng = SplitMix64(11)
    assert all(0 <= rng.below(7) < 7 for _ in range(1000))


# ---------------------------------------------------------------------------
# generator


SMALL = SyntheticSpec(seed=13, n_stocks=4, n_days=8, headlines_per_day=6, vocab_size=30)


def test_byte_identical_output(tmp_path):
    first = generate(SMALL, tmp_path / "a")
    second = generate(SMALL, tmp_path / "b")
    for key in first:
        assert first[key].read_bytes() == second[key].read_bytes(), key


def test_different_seed_changes_output(tmp_path):
    first = generate(SMALL, tmp_path / "a")
    other = generate(SyntheticSpec(**{**SMALL.__dict__, "seed": 14}), tmp_path / "b")
    assert first["news"].read_bytes() != other["news"].read_bytes()


def test_prices_positive_and_index_is_equal_weight_average(tmp_path):
    paths = generate(SMALL, tmp_path)
    bars = load_minute_bars(paths["prices_minute"])
    stocks = [name for name in bars if name != INDEX_SYMBOL]
    assert len(stocks) == SMALL.n_stocks
    for name, series in bars.items():
        assert all(price > 0 for _, price in series)
    for i, (stamp, index_price) in enumerate(bars[INDEX_SYMBOL]):
        mean = sum(bars[name][i][1] for name in stocks) / len(stocks)
        assert index_price == pytest.approx(mean, abs=1e-9)
        assert bars[stocks[0]][i][0] == stamp


def test_daily_close_equals_last_bar(tmp_path):
    paths = generate(SMALL, tmp_path)
    closes = load_daily_closes(paths["prices_daily"])
    bars = load_minute_bars(paths["prices_minute"])
    for name, rows in closes.items():
        last_bar_by_day = {}
        for stamp, price in bars[name]:
            last_bar_by_day[stamp.date()] = price  # bars are UTC; close < midnight UTC
        for day, price in rows:
            assert price == last_bar_by_day[day]


def test_news_well_formed_and_vocabulary_closed(tmp_path):
    paths = generate(SMALL, tmp_path)
    items, errors = load_news(paths["news"])
    assert not errors
    assert len(items) == SMALL.n_days * SMALL.headlines_per_day
    vocab = set(vocabulary(SMALL))
    for item in items:
        assert item.ticker.startswith("STK")
        assert set(item.headline.split()) <= vocab
        assert len(item.headline.split()) == SMALL.tokens_per_headline


def test_trading_days_skip_weekends():
    days = trading_days(SMALL)
    assert len(days) == SMALL.n_days
    assert all(day.weekday() < 5 for day in days)
    assert days[0] == date(2021, 1, 4)


def test_zero_effect_spec_has_no_signal_requirement():
    spec = SyntheticSpec(seed=1, n_stocks=2, n_days=2, headlines_per_day=2, effect_size=0.0)
    assert spec.effect_size == 0.0


def test_spec_validation():
    with pytest.raises(ConfigError):
        SyntheticSpec(positive_words=("same",), negative_words=("same",))
    with pytest.raises(ConfigError):
        SyntheticSpec(effect_size=-0.1)
    with pytest.raises(ConfigError):
        SyntheticSpec(bar_minutes=7)  # does not divide the session
    with pytest.raises(ConfigError):
        SyntheticSpec(max_signal_words=99)


def test_signal_words_appear_with_roughly_requested_probability(tmp_path):
    spec = SyntheticSpec(seed=3, n_stocks=5, n_days=20, headlines_per_day=20, signal_probability=0.7)
    paths = generate(spec, tmp_path)
    items, _ = load_news(paths["news"])
    signal = set(spec.positive_words) | set(spec.negative_words)
    hits = sum(1 for item in items if set(item.headline.split()) & signal)
    fraction = hits / len(items)
    assert math.isclose(fraction, 0.7, abs_tol=0.08)
