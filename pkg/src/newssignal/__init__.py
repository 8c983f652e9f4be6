"""Headline-to-trading pipeline: label news by forward returns, train sentiment
classifiers, evaluate on extreme-score percentile sets, and backtest
dollar-neutral strategies."""

__version__ = "0.1.0"
