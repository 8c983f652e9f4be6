"""Writer for the shared binary embedding format.

Layout (little-endian): magic "EMB1", u8 source tag (0 static / 1 base /
2 tuned), u16 layer, u32 record count; then per record u64 news_id, u16 rows,
u16 cols, and rows*cols float32 values row-major. Files are written to a
temporary sibling and renamed into place so readers never observe a partial
file.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
SOURCE_TAGS = {"static": 0, "base": 1, "tuned": 2}

_HEADER = struct.Struct("<4sBHI")
_RECORD = struct.Struct("<QHH")


def write_embedding_file(path, source: str, layer: int, records, index_path=None) -> None:
    """`records` is an iterable of (news_id, matrix) with float32 matrices."""
    if source not in SOURCE_TAGS:
        raise ValueError(f"unknown source {source!r}")
    records = list(records)
    path = Path(path)
    temp = path.with_name(path.name + ".tmp")
    offsets = []
    with open(temp, "wb") as handle:
        handle.write(_HEADER.pack(MAGIC, SOURCE_TAGS[source], layer, len(records)))
        position = _HEADER.size
        for news_id, matrix in records:
            matrix = np.ascontiguousarray(matrix, dtype="<f4")
            if matrix.ndim != 2 or min(matrix.shape) < 1:
                raise ValueError(f"record {news_id}: matrix must be 2-D, got {matrix.shape}")
            rows, cols = matrix.shape
            offsets.append((news_id, position))
            payload = matrix.tobytes(order="C")
            handle.write(_RECORD.pack(news_id, rows, cols))
            handle.write(payload)
            position += _RECORD.size + len(payload)
    os.replace(temp, path)

    if index_path is not None:
        index_path = Path(index_path)
        index_temp = index_path.with_name(index_path.name + ".tmp")
        lines = ["news_id,offset"] + [f"{nid},{off}" for nid, off in offsets]
        index_temp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        os.replace(index_temp, index_path)


def write_scores_csv(path, rows) -> None:
    """`rows` is an iterable of (news_id, p_plus)."""
    path = Path(path)
    temp = path.with_name(path.name + ".tmp")
    lines = ["news_id,p_plus"] + [f"{nid},{p!r}" for nid, p in rows]
    temp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(temp, path)
