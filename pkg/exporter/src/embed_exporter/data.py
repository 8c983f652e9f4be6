"""Readers for the upstream file formats: the labeled dataset CSV
(news_id,adjusted_return,label,split) and the news CSV holding the headline
text. These are the exporter's only contract with the pipeline that produced
them."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

LABELED_HEADER = ["news_id", "adjusted_return", "label", "split"]
NEWS_HEADER = ["id", "timestamp", "ticker", "headline", "vendor_score", "vendor_confidence"]


@dataclass(frozen=True)
class Doc:
    news_id: int
    headline: str
    label: Optional[int]  # None for excluded training rows
    split: str


def _read_csv(path: Path, expected_header: list) -> list:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected_header:
            raise ValueError(f"{path}: expected header {','.join(expected_header)}, got {header}")
        return [row for row in reader if row]


def load_docs(labeled_path, news_path) -> list:
    """Join the labeled dataset with headline text, preserving splits."""
    headlines = {}
    for row in _read_csv(Path(news_path), NEWS_HEADER):
        headlines[int(row[0])] = row[3]
    docs = []
    for row in _read_csv(Path(labeled_path), LABELED_HEADER):
        news_id = int(row[0])
        text = headlines.get(news_id)
        if text is None:
            raise ValueError(f"labeled news {news_id} missing from the news file")
        label = None if row[2] == "excluded" else int(row[2])
        docs.append(Doc(news_id=news_id, headline=text, label=label, split=row[3]))
    return docs


def training_split(docs) -> tuple[list, list]:
    """(train, dev) docs with usable labels."""
    train = [d for d in docs if d.split == "train" and d.label is not None]
    dev = [d for d in docs if d.split == "dev" and d.label is not None]
    return train, dev
