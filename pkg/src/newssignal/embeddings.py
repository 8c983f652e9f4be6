"""Embedding artifacts: static token tables, per-headline matrices, and the
bit-exact binary store shared with the exporter.

Binary layout (little-endian):
    magic "EMB1" | u8 source tag | u16 layer | u32 record count
    per record: u64 news_id | u16 rows | u16 cols | rows*cols float32 row-major

One file holds records from a single (source, layer); the optional index
sidecar maps news_id to the byte offset of its record for random access.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Optional, Sequence

import numpy as np

from .errors import (
    BadMagic,
    EmptyHeadline,
    IngestError,
    ShapeError,
    Truncated,
)

MAGIC = b"EMB1"
SOURCES = ("static", "base", "tuned")
_SOURCE_TAG = {"static": 0, "base": 1, "tuned": 2}
_TAG_SOURCE = {tag: name for name, tag in _SOURCE_TAG.items()}

_HEADER = struct.Struct("<4sBHI")
_RECORD = struct.Struct("<QHH")


# ---------------------------------------------------------------------------
# static token tables


@dataclass
class StaticTable:
    """Token -> fixed vector lookup of one shared dimension."""

    dimension: int
    vectors: dict

    def __post_init__(self):
        for token, vec in self.vectors.items():
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (self.dimension,):
                raise ShapeError(
                    f"token {token!r} has dimension {arr.shape}, expected ({self.dimension},)"
                )
            self.vectors[token] = arr

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def load_static_table(source) -> StaticTable:
    """Parse the text table: header "count dimension", then token rows."""
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise IngestError("empty static table")
    header = lines[0].split()
    if len(header) != 2:
        raise IngestError(f"bad static table header {lines[0]!r}, expected 'count dimension'")
    try:
        count, dim = int(header[0]), int(header[1])
    except ValueError as exc:
        raise IngestError(f"bad static table header {lines[0]!r}") from exc
    if dim <= 0:
        raise IngestError(f"static table dimension must be positive, got {dim}")
    body = lines[1:]
    if len(body) < count:
        raise Truncated(f"static table header claims {count} tokens, found {len(body)}")
    if len(body) > count:
        raise IngestError(f"static table header claims {count} tokens, found {len(body)}")
    vectors: dict = {}
    for row_no, line in enumerate(body, start=2):
        parts = line.split()
        if len(parts) != dim + 1:
            raise IngestError(f"static table line {row_no}: expected {dim} values for {parts[0]!r}")
        token = parts[0]
        if token in vectors:
            raise IngestError(f"static table line {row_no}: duplicate token {token!r}")
        try:
            vectors[token] = np.array([float(v) for v in parts[1:]], dtype=np.float32)
        except ValueError as exc:
            raise IngestError(f"static table line {row_no}: {exc}") from exc
    return StaticTable(dimension=dim, vectors=vectors)


def save_static_table(table: StaticTable, path) -> None:
    lines = [f"{len(table.vectors)} {table.dimension}"]
    for token, vec in table.vectors.items():
        lines.append(token + " " + " ".join(repr(float(v)) for v in vec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# headline embeddings


@dataclass(eq=False)
class HeadlineEmbedding:
    """A (tokens x dimension) float32 matrix for one headline."""

    news_id: int
    source: str
    layer: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ShapeError(f"unknown embedding source {self.source!r}")
        if self.source == "static":
            if self.layer != 0:
                raise ShapeError("static embeddings must carry layer 0")
        elif self.layer < 1:
            raise ShapeError(f"{self.source} embeddings need layer >= 1, got {self.layer}")
        if not 0 <= self.news_id < 2**64:
            raise ShapeError(f"news_id {self.news_id} outside unsigned 64-bit range")
        matrix = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise ShapeError(f"embedding matrix must be 2-D and non-empty, got {matrix.shape}")
        if matrix.shape[0] > 0xFFFF or matrix.shape[1] > 0xFFFF:
            raise ShapeError(f"embedding matrix {matrix.shape} exceeds the u16 shape fields")
        self.matrix = matrix

    def __eq__(self, other) -> bool:
        if not isinstance(other, HeadlineEmbedding):
            return NotImplemented
        return (
            self.news_id == other.news_id
            and self.source == other.source
            and self.layer == other.layer
            and self.matrix.shape == other.matrix.shape
            and bool(np.array_equal(self.matrix, other.matrix))
        )


def embed_static(
    tokens: Sequence[str],
    table: StaticTable,
    oov_policy: str = "zero",
    *,
    news_id: int = 0,
) -> HeadlineEmbedding:
    """Stack the table vector of each token; OOV rows follow `oov_policy`.

    The default zero-vector policy keeps the sequence length equal to the
    token count; the recurrent net learns to skim the zero rows.
    """
    if not tokens:
        raise EmptyHeadline("cannot embed an empty token list")
    if oov_policy not in ("zero", "error"):
        raise ValueError(f"unknown oov_policy {oov_policy!r}")
    rows = []
    for token in tokens:
        vec = table.vectors.get(token)
        if vec is None:
            if oov_policy == "error":
                raise LookupError(f"token {token!r} not in static table")
            vec = np.zeros(table.dimension, dtype=np.float32)
        rows.append(vec)
    return HeadlineEmbedding(news_id=news_id, source="static", layer=0, matrix=np.stack(rows))


# ---------------------------------------------------------------------------
# binary store


def _coerce_sink(sink) -> tuple[BinaryIO, bool]:
    if isinstance(sink, (str, Path)):
        return open(sink, "wb"), True
    return sink, False


def write_embeddings(
    embeddings: Sequence[HeadlineEmbedding],
    sink,
    index_sink=None,
    *,
    source: Optional[str] = None,
    layer: Optional[int] = None,
) -> None:
    """Write one embedding file; all records must share (source, layer).

    `source`/`layer` are only needed for an empty record list. When
    `index_sink` is given, a `news_id,offset` CSV sidecar is written too.
    """
    if embeddings:
        source = embeddings[0].source if source is None else source
        layer = embeddings[0].layer if layer is None else layer
        for emb in embeddings:
            if emb.source != source or emb.layer != layer:
                raise ShapeError(
                    f"mixed (source, layer) in one file: ({emb.source}, {emb.layer}) "
                    f"vs ({source}, {layer})"
                )
    else:
        source = "static" if source is None else source
        layer = 0 if layer is None else layer
    if source not in _SOURCE_TAG:
        raise ShapeError(f"unknown embedding source {source!r}")

    handle, owned = _coerce_sink(sink)
    offsets: list[tuple[int, int]] = []
    try:
        handle.write(_HEADER.pack(MAGIC, _SOURCE_TAG[source], layer, len(embeddings)))
        position = _HEADER.size
        for emb in embeddings:
            rows, cols = emb.matrix.shape
            offsets.append((emb.news_id, position))
            payload = emb.matrix.astype("<f4", copy=False).tobytes(order="C")
            handle.write(_RECORD.pack(emb.news_id, rows, cols))
            handle.write(payload)
            position += _RECORD.size + len(payload)
    finally:
        if owned:
            handle.close()

    if index_sink is not None:
        lines = ["news_id,offset"] + [f"{nid},{off}" for nid, off in offsets]
        if isinstance(index_sink, (str, Path)):
            Path(index_sink).write_text("\n".join(lines) + "\n", encoding="utf-8")
        else:
            index_sink.write("\n".join(lines) + "\n")


def _read_exact(handle: BinaryIO, n: int, what: str) -> bytes:
    data = handle.read(n)
    if len(data) != n:
        raise Truncated(f"embedding file ended inside {what}")
    return data


def _read_header(handle: BinaryIO) -> tuple[str, int, int]:
    magic, tag, layer, count = _HEADER.unpack(_read_exact(handle, _HEADER.size, "header"))
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}, expected {MAGIC!r}")
    if tag not in _TAG_SOURCE:
        raise IngestError(f"unknown source tag {tag}")
    return _TAG_SOURCE[tag], layer, count


def _read_record(handle: BinaryIO, source: str, layer: int) -> HeadlineEmbedding:
    news_id, rows, cols = _RECORD.unpack(_read_exact(handle, _RECORD.size, "record header"))
    if rows < 1 or cols < 1:
        raise IngestError(f"record {news_id}: degenerate shape {rows}x{cols}")
    payload = _read_exact(handle, rows * cols * 4, f"record {news_id} payload")
    matrix = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()
    return HeadlineEmbedding(news_id=news_id, source=source, layer=layer, matrix=matrix)


def _open_binary(path) -> BinaryIO:
    try:
        return open(path, "rb")
    except OSError as exc:
        raise IngestError(f"cannot read embedding file {path}: {exc}") from exc


def read_embeddings(source) -> list[HeadlineEmbedding]:
    """Read a whole embedding file; inverse of :func:`write_embeddings`."""
    if isinstance(source, (str, Path)):
        handle: BinaryIO = _open_binary(source)
        owned = True
    elif isinstance(source, bytes):
        handle = io.BytesIO(source)
        owned = True
    else:
        handle = source
        owned = False
    try:
        src, layer, count = _read_header(handle)
        records = [_read_record(handle, src, layer) for _ in range(count)]
        if handle.read(1):
            raise IngestError("trailing bytes after the last record")
        return records
    finally:
        if owned:
            handle.close()


def read_file_header(path) -> tuple[str, int, int]:
    """(source, layer, record count) of an embedding file without reading it all."""
    with _open_binary(path) as handle:
        return _read_header(handle)


def read_embedding_at(path, offset: int) -> HeadlineEmbedding:
    """Random access via an offset from the index sidecar."""
    with _open_binary(path) as handle:
        source, layer, _ = _read_header(handle)
        handle.seek(offset)
        return _read_record(handle, source, layer)


def read_index(path) -> dict[int, int]:
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["news_id", "offset"]:
        raise IngestError(f"bad index header {header!r}")
    return {int(row[0]): int(row[1]) for row in reader if row}
