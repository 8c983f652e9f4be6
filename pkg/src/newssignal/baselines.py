"""Word-frequency classifiers: multinomial Naive Bayes and a screened
tone-regression scorer (screening + supervised topic weights + penalized
maximum-likelihood scoring on a probability grid)."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateTraining,
    IncompatibleArtifacts,
    IngestError,
    NoSentimentWords,
)


# ---------------------------------------------------------------------------
# Naive Bayes


@dataclass
class NbcModel:
    """Multinomial NB with add-alpha smoothing over the training vocabulary."""

    alpha: float
    doc_counts: tuple[int, int]  # headlines per class
    token_counts: dict  # token -> [occurrences in class 0, in class 1]
    class_totals: tuple[int, int]  # token occurrences per class

    @property
    def vocabulary_size(self) -> int:
        return len(self.token_counts)

    @property
    def priors(self) -> tuple[float, float]:
        total = self.doc_counts[0] + self.doc_counts[1]
        return self.doc_counts[0] / total, self.doc_counts[1] / total


def nbc_train(docs: Iterable[tuple[Sequence[str], int]], alpha: float = 1.0) -> NbcModel:
    if alpha <= 0:
        raise ConfigError(f"smoothing alpha must be positive, got {alpha}")
    doc_counts = [0, 0]
    totals = [0, 0]
    token_counts: dict = {}
    for tokens, label in docs:
        if label not in (0, 1):
            raise ValueError(f"labels must be 0 or 1, got {label!r}")
        doc_counts[label] += 1
        for token in tokens:
            cell = token_counts.setdefault(token, [0, 0])
            cell[label] += 1
            totals[label] += 1
    if doc_counts[0] == 0 or doc_counts[1] == 0:
        raise DegenerateTraining(
            f"both classes required, got {doc_counts[0]} negative / {doc_counts[1]} positive"
        )
    return NbcModel(
        alpha=alpha,
        doc_counts=(doc_counts[0], doc_counts[1]),
        token_counts=token_counts,
        class_totals=(totals[0], totals[1]),
    )


def nbc_score(model: NbcModel, tokens: Sequence[str]) -> float:
    """Posterior probability of class 1; out-of-vocabulary tokens are ignored."""
    p0, p1 = model.priors
    log0, log1 = math.log(p0), math.log(p1)
    vocab = model.vocabulary_size
    denom0 = model.class_totals[0] + model.alpha * vocab
    denom1 = model.class_totals[1] + model.alpha * vocab
    for token in tokens:
        cell = model.token_counts.get(token)
        if cell is None:
            continue
        log0 += math.log((cell[0] + model.alpha) / denom0)
        log1 += math.log((cell[1] + model.alpha) / denom1)
    # logistic form of the two-class posterior, stable for large gaps; the
    # true value lies strictly inside (0, 1), so keep the float there too
    posterior = 1.0 / (1.0 + math.exp(min(log0 - log1, 700.0)))
    return min(max(posterior, math.nextafter(0.0, 1.0)), math.nextafter(1.0, 0.0))


_NBC_BUNDLE = ("bundle", "nbc", "1")


def save_nbc(model: NbcModel, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_NBC_BUNDLE)
    writer.writerow(["alpha", repr(model.alpha)])
    writer.writerow(["docs", model.doc_counts[0], model.doc_counts[1]])
    writer.writerow(["totals", model.class_totals[0], model.class_totals[1]])
    for token in sorted(model.token_counts):
        cell = model.token_counts[token]
        writer.writerow(["token", token, cell[0], cell[1]])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def load_nbc(path) -> NbcModel:
    rows = _read_bundle(path, "nbc")
    alpha = None
    doc_counts = totals = None
    token_counts: dict = {}
    for row in rows:
        if row[0] == "alpha":
            alpha = float(row[1])
        elif row[0] == "docs":
            doc_counts = (int(row[1]), int(row[2]))
        elif row[0] == "totals":
            totals = (int(row[1]), int(row[2]))
        elif row[0] == "token":
            token_counts[row[1]] = [int(row[2]), int(row[3])]
        else:
            raise IngestError(f"{path}: unknown bundle row {row[0]!r}")
    if alpha is None or doc_counts is None or totals is None:
        raise IngestError(f"{path}: incomplete model bundle")
    return NbcModel(alpha=alpha, doc_counts=doc_counts, token_counts=token_counts, class_totals=totals)


# ---------------------------------------------------------------------------
# screening + tone regression


@dataclass
class SsestmModel:
    """Screened sentiment vocabulary with a column-stochastic tone matrix.

    ``tone[:, 0]`` is the positive column, ``tone[:, 1]`` the negative one;
    each sums to 1 after the clip-and-normalize step.
    """

    tokens: list
    tone: np.ndarray
    alpha_plus: float
    alpha_minus: float
    min_count: int
    penalty: float
    grid_step: float = 1e-3
    _index: dict = field(default=None, repr=False, compare=False)

    def index(self) -> dict:
        if self._index is None:
            self._index = {token: i for i, token in enumerate(self.tokens)}
        return self._index


def ssestm_train(
    docs: Sequence[tuple[Sequence[str], int, float]],
    alpha_plus: float = 0.6,
    alpha_minus: Optional[float] = None,
    min_count: int = 20,
    penalty: float = 0.1,
) -> SsestmModel:
    """Screen sentiment-charged tokens, then regress term frequencies on
    rank-normalized returns.

    `docs` rows are (tokens, label, adjusted_return). Screening keeps token j
    when at least `min_count` headlines contain it and its positive-headline
    fraction f_j is >= alpha_plus or <= alpha_minus (default 1 - alpha_plus).
    Tone columns are the clipped, normalized regression coefficients on
    [p_hat, 1 - p_hat] where p_hat is the return rank scaled into (0, 1).
    """
    if alpha_minus is None:
        alpha_minus = 1.0 - alpha_plus
    if not 0 < alpha_minus <= alpha_plus < 1:
        raise ConfigError(f"need 0 < alpha_minus <= alpha_plus < 1, got {alpha_minus}, {alpha_plus}")
    if min_count < 1:
        raise ConfigError("min_count must be >= 1")
    if penalty < 0:
        raise ConfigError("penalty must be non-negative")
    if not docs:
        raise DegenerateTraining("no training documents")

    doc_freq: dict = {}
    pos_freq: dict = {}
    for tokens, label, _ in docs:
        if label not in (0, 1):
            raise ValueError(f"labels must be 0 or 1, got {label!r}")
        for token in set(tokens):
            doc_freq[token] = doc_freq.get(token, 0) + 1
            if label == 1:
                pos_freq[token] = pos_freq.get(token, 0) + 1
    screened = sorted(
        token
        for token, count in doc_freq.items()
        if count >= min_count
        and (pos_freq.get(token, 0) / count >= alpha_plus or pos_freq.get(token, 0) / count <= alpha_minus)
    )
    if not screened:
        raise NoSentimentWords("screening removed every token")
    column = {token: i for i, token in enumerate(screened)}

    # rank-normalize returns into (0, 1); ties break by input position
    n = len(docs)
    order = sorted(range(n), key=lambda i: (docs[i][2], i))
    p_hat = np.empty(n)
    for rank, i in enumerate(order, start=1):
        p_hat[i] = rank / (n + 1)

    rows = []
    weights = []
    for i, (tokens, _, _) in enumerate(docs):
        counts = np.zeros(len(screened))
        total = 0
        for token in tokens:
            j = column.get(token)
            if j is not None:
                counts[j] += 1
                total += 1
        if total:
            rows.append(counts / total)
            weights.append(p_hat[i])
    if not rows:
        raise NoSentimentWords("no training headline contains a screened token")
    frequency = np.array(rows)
    w = np.array(weights)
    design = np.column_stack([w, 1.0 - w])
    coef, *_ = np.linalg.lstsq(design, frequency, rcond=None)
    tone = np.clip(coef.T, 0.0, None)
    sums = tone.sum(axis=0)
    if np.any(sums <= 0):
        raise DegenerateTraining("a tone column collapsed to zero after clipping")
    tone = tone / sums
    return SsestmModel(
        tokens=screened,
        tone=tone,
        alpha_plus=alpha_plus,
        alpha_minus=alpha_minus,
        min_count=min_count,
        penalty=penalty,
    )


def ssestm_score(model: SsestmModel, tokens: Sequence[str], grid_step: Optional[float] = None) -> float:
    """Penalized maximum-likelihood sentiment on a (0, 1) grid.

    Maximizes sum_j c_j * log(p*O+_j + (1-p)*O-_j) + penalty * log(p(1-p))
    over the grid; headlines with no screened token score 0.5.
    """
    step = model.grid_step if grid_step is None else grid_step
    index = model.index()
    counts: dict = {}
    for token in tokens:
        j = index.get(token)
        if j is not None:
            counts[j] = counts.get(j, 0) + 1
    if not counts:
        return 0.5
    cols = np.array(sorted(counts))
    c = np.array([counts[j] for j in cols], dtype=float)
    grid = np.arange(1, round(1.0 / step)) * step
    mix = np.outer(grid, model.tone[cols, 0]) + np.outer(1.0 - grid, model.tone[cols, 1])
    with np.errstate(divide="ignore"):
        ll = np.log(mix) @ c + model.penalty * np.log(grid * (1.0 - grid))
    return float(grid[int(np.argmax(ll))])


_SSESTM_BUNDLE = ("bundle", "ssestm", "1")


def save_ssestm(model: SsestmModel, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_SSESTM_BUNDLE)
    for key in ("alpha_plus", "alpha_minus", "min_count", "penalty", "grid_step"):
        writer.writerow(["param", key, repr(getattr(model, key))])
    for token, (pos, neg) in zip(model.tokens, model.tone):
        writer.writerow(["tone", token, repr(float(pos)), repr(float(neg))])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def load_ssestm(path) -> SsestmModel:
    rows = _read_bundle(path, "ssestm")
    params: dict = {}
    tokens = []
    tone_rows = []
    for row in rows:
        if row[0] == "param":
            params[row[1]] = float(row[2])
        elif row[0] == "tone":
            tokens.append(row[1])
            tone_rows.append([float(row[2]), float(row[3])])
        else:
            raise IngestError(f"{path}: unknown bundle row {row[0]!r}")
    if not tokens:
        raise IngestError(f"{path}: bundle has no tone rows")
    return SsestmModel(
        tokens=tokens,
        tone=np.array(tone_rows),
        alpha_plus=params["alpha_plus"],
        alpha_minus=params["alpha_minus"],
        min_count=int(params["min_count"]),
        penalty=params["penalty"],
        grid_step=params.get("grid_step", 1e-3),
    )


def _read_bundle(path, kind: str) -> list[list[str]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read model bundle {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or len(header) != 3 or header[0] != "bundle":
        raise IncompatibleArtifacts(f"{path}: not a model bundle")
    if header[1] != kind:
        raise IncompatibleArtifacts(f"{path}: bundle holds a {header[1]!r} model, expected {kind!r}")
    if header[2] != "1":
        raise IncompatibleArtifacts(f"{path}: unsupported bundle version {header[2]!r}")
    return [row for row in reader if row]


def sniff_bundle_kind(path) -> Optional[str]:
    """Model kind of a CSV bundle ('nbc' / 'ssestm'), or None if not a bundle."""
    try:
        first = Path(path).open(encoding="utf-8").readline()
    except (OSError, UnicodeDecodeError):
        return None
    parts = first.strip().split(",")
    if len(parts) == 3 and parts[0] == "bundle":
        return parts[1]
    return None
