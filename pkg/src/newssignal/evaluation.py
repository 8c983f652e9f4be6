"""Signed scores, extreme-percentile evaluation sets, confusion metrics, and
the frequent-word analysis of the extreme sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

from .corpus import tokenize
from .errors import AlignmentError, EmptyDataset, InvalidProbability


@dataclass(frozen=True)
class ScoredNews:
    """Model output for one headline: P+ and the signed score in [-1, 1]."""

    news_id: int
    p_plus: float
    score: float

    @classmethod
    def from_probability(cls, news_id: int, p_plus: float) -> "ScoredNews":
        return cls(news_id=news_id, p_plus=p_plus, score=to_score(p_plus))


def to_score(p_plus: float) -> float:
    """Map a positive-class probability onto the [-1, 1] score scale."""
    if not 0.0 <= p_plus <= 1.0 or math.isnan(p_plus):
        raise InvalidProbability(f"probability {p_plus} outside [0, 1]")
    return (p_plus - 0.5) * 2.0


@dataclass(frozen=True)
class ExtremeThresholds:
    """Score cutoffs: below `lower` or above `upper` counts as extreme."""

    n: float
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"lower percentile {self.lower} above upper {self.upper}")


def percentile_thresholds(training_scores: Sequence[float], n: float) -> ExtremeThresholds:
    """Nearest-rank percentiles P_n and P_(100-n) of the training scores.

    Nearest rank means the sorted value at rank ceil(p/100 * m): no
    interpolation, so thresholds are always observed scores.
    """
    if not 0 < n < 50:
        raise ValueError(f"percentile level must be in (0, 50), got {n}")
    m = len(training_scores)
    if m == 0:
        raise EmptyDataset("percentile_thresholds needs at least one score")
    ordered = sorted(training_scores)

    def at(p: float) -> float:
        rank = max(1, math.ceil(p / 100.0 * m))
        return ordered[rank - 1]

    return ExtremeThresholds(n=n, lower=at(n), upper=at(100.0 - n))


def select_extreme(scored: Iterable[ScoredNews], thresholds: ExtremeThresholds) -> set:
    """Ids with score strictly below `lower` or strictly above `upper`."""
    return {
        s.news_id for s in scored if s.score < thresholds.lower or s.score > thresholds.upper
    }


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(scored: Sequence[ScoredNews], labels: Mapping[int, int]) -> ConfusionMatrix:
    """2x2 contingency of sign(score) decisions against labels.

    A score of exactly 0 is called class 0, mirroring the <=0 labeling rule.
    """
    tp = fp = tn = fn = 0
    for item in scored:
        if item.news_id not in labels:
            raise AlignmentError(f"no label for scored news {item.news_id}")
        truth = labels[item.news_id]
        if truth not in (0, 1):
            raise AlignmentError(f"label for news {item.news_id} must be 0/1, got {truth!r}")
        predicted = 1 if item.score > 0 else 0
        if predicted == 1:
            if truth == 1:
                tp += 1
            else:
                fp += 1
        else:
            if truth == 1:
                fn += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyDataset("accuracy undefined on an empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation coefficient; 0 when any denominator factor is 0."""
    denom = (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    if denom == 0:
        return 0.0
    return (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(denom)


def load_stopwords() -> frozenset:
    """The packaged English stopword list (versioned data file)."""
    text = resources.files("newssignal").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def frequent_words(
    positive_headlines: Iterable[str],
    negative_headlines: Iterable[str],
    k: int = 50,
    stopwords: Optional[frozenset] = None,
) -> tuple[list, list]:
    """Top-k non-stopword tokens with relative frequencies, per extreme set.

    Frequencies are counts over all kept tokens of the set; ties rank
    lexicographically.
    """
    if stopwords is None:
        stopwords = load_stopwords()

    def ranked(headlines: Iterable[str]) -> list:
        counts: dict = {}
        total = 0
        for headline in headlines:
            for token in tokenize(headline):
                if token in stopwords:
                    continue
                counts[token] = counts.get(token, 0) + 1
                total += 1
        if total == 0:
            return []
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(token, count / total) for token, count in ordered[:k]]

    return ranked(positive_headlines), ranked(negative_headlines)
