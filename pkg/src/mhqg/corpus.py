"""Data model and ingestion for tables, passages, and their linkage.

Two corpus shapes are supported:

* table corpus — JSON array of ``{"table": {...}, "passages": {...}}``
  objects; each table cell may link to passages by id.
* passage-pair corpus — JSON array of ``{"first": {...}, "second": {...}}``.

Loaded objects are immutable and safe to share across workers. Loading
preserves file order and is idempotent.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DanglingLink, DuplicatePair, IndexOutOfRange, MalformedInput

# Sentence boundaries: terminator + space + capital/digit. The abbreviation
# list suppresses the most common false splits; anything fancier belongs in
# a real segmenter.
_ABBREVIATIONS = ("Mr.", "Mrs.", "Dr.", "St.", "No.")
_BOUNDARY = re.compile(r"[.!?](?= [A-Z0-9])")


def split_sentences(text: str) -> tuple[tuple[int, int], ...]:
    """Character spans of sentences in ``text``, ordered and non-overlapping."""
    if not text.strip():
        return ()
    breaks: list[int] = []
    for m in _BOUNDARY.finditer(text):
        end = m.end()
        if any(text[: end].endswith(abbr) for abbr in _ABBREVIATIONS):
            continue
        breaks.append(end)
    spans = []
    start = 0
    for b in breaks:
        spans.append((start, b))
        start = b + 1  # skip the single space after the terminator
    if start < len(text):
        spans.append((start, len(text)))
    return tuple(spans)


def _collapse_ws(s: str) -> str:
    return " ".join(s.split())


@dataclass(frozen=True)
class Passage:
    id: str
    title: str
    text: str
    sentences: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        if not self.title:
            raise ValueError("passage title must be non-empty")
        prev_end = 0
        for start, end in self.sentences:
            if start < prev_end or end > len(self.text) or start > end:
                raise ValueError("sentence spans must be ordered and in bounds")
            prev_end = end

    @classmethod
    def build(cls, id: str, title: str, text: str) -> "Passage":
        return cls(id=id, title=title, text=text, sentences=split_sentences(text))


@dataclass(frozen=True)
class Cell:
    raw: str
    linked_passage_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class Table:
    id: str
    title: str
    section_title: str
    headers: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]

    def __post_init__(self):
        if not self.headers:
            raise ValueError("table must declare at least one header")
        normalized = [_collapse_ws(h).lower() for h in self.headers]
        if len(set(normalized)) != len(normalized):
            raise ValueError("table headers must be distinct after normalization")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.headers):
                raise ValueError(f"row {i} has {len(row)} cells, expected {len(self.headers)}")


@dataclass(frozen=True)
class LinkedTableContext:
    table: Table
    passages: dict[str, Passage]

    def __post_init__(self):
        for row in self.table.rows:
            for cell in row:
                for pid in cell.linked_passage_ids:
                    if pid not in self.passages:
                        raise DanglingLink(pid)

    def linked_passage_order(self) -> list[str]:
        """Passage ids in row-major first-link order, then leftovers by id."""
        seen: list[str] = []
        for row in self.table.rows:
            for cell in row:
                for pid in cell.linked_passage_ids:
                    if pid not in seen:
                        seen.append(pid)
        for pid in sorted(self.passages):
            if pid not in seen:
                seen.append(pid)
        return seen


@dataclass(frozen=True)
class PassagePair:
    first: Passage
    second: Passage

    def __post_init__(self):
        if self.first.id == self.second.id:
            raise DuplicatePair(f"pair references passage {self.first.id!r} twice")


def _require(obj, key: str, kind, record_index: int):
    if not isinstance(obj, dict) or key not in obj:
        raise MalformedInput(f"missing key {key!r}", record_index)
    value = obj[key]
    if not isinstance(value, kind):
        raise MalformedInput(f"key {key!r} must be {kind.__name__}", record_index)
    return value


def _parse_passage(obj, record_index: int, passage_id: str | None = None) -> Passage:
    pid = passage_id if passage_id is not None else _require(obj, "id", str, record_index)
    title = _require(obj, "title", str, record_index)
    text = _require(obj, "text", str, record_index)
    if not title:
        raise MalformedInput("passage title must be non-empty", record_index)
    return Passage.build(id=pid, title=title, text=text)


def load_table_corpus(path: str | Path) -> list[LinkedTableContext]:
    """Load a table corpus file, resolving cell links against its passages."""
    data = _read_json_array(path)
    contexts = []
    for i, entry in enumerate(data):
        tbl = _require(entry, "table", dict, i)
        headers = tuple(_require(tbl, "headers", list, i))
        if not all(isinstance(h, str) for h in headers):
            raise MalformedInput("headers must be strings", i)
        rows = []
        for row in _require(tbl, "rows", list, i):
            if not isinstance(row, list):
                raise MalformedInput("rows must be arrays of cells", i)
            cells = []
            for cell in row:
                raw = _require(cell, "raw", str, i)
                links = tuple(cell.get("links", []))
                if not all(isinstance(l, str) for l in links):
                    raise MalformedInput("cell links must be strings", i)
                cells.append(Cell(raw=_collapse_ws(raw), linked_passage_ids=links))
            rows.append(tuple(cells))
        try:
            table = Table(
                id=_require(tbl, "id", str, i),
                title=_require(tbl, "title", str, i),
                section_title=_require(tbl, "section_title", str, i),
                headers=headers,
                rows=tuple(rows),
            )
        except ValueError as exc:
            raise MalformedInput(str(exc), i) from exc
        passages = {
            pid: _parse_passage(pobj, i, passage_id=pid)
            for pid, pobj in _require(entry, "passages", dict, i).items()
        }
        try:
            contexts.append(LinkedTableContext(table=table, passages=passages))
        except DanglingLink as exc:
            raise DanglingLink(exc.passage_id, record_index=i) from exc
    return contexts


def load_text_pair_corpus(path: str | Path) -> list[PassagePair]:
    """Load a passage-pair corpus file, preserving file order."""
    data = _read_json_array(path)
    pairs = []
    for i, entry in enumerate(data):
        first = _parse_passage(_require(entry, "first", dict, i), i)
        second = _parse_passage(_require(entry, "second", dict, i), i)
        pairs.append(PassagePair(first=first, second=second))
    return pairs


def _read_json_array(path: str | Path) -> list:
    p = Path(path)
    try:
        raw = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedInput(f"cannot read {p}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid JSON in {p}: {exc}") from exc
    if not isinstance(data, list):
        raise MalformedInput(f"{p} must contain a JSON array")
    return data


def table_context_to_obj(ctx: LinkedTableContext) -> dict:
    """Serialize one context back to its corpus-file shape."""
    return {
        "table": {
            "id": ctx.table.id,
            "title": ctx.table.title,
            "section_title": ctx.table.section_title,
            "headers": list(ctx.table.headers),
            "rows": [
                [{"raw": c.raw, "links": list(c.linked_passage_ids)} for c in row]
                for row in ctx.table.rows
            ],
        },
        "passages": {
            pid: {"title": p.title, "text": p.text} for pid, p in ctx.passages.items()
        },
    }


def passage_pair_to_obj(pair: PassagePair) -> dict:
    return {
        "first": {"id": pair.first.id, "title": pair.first.title, "text": pair.first.text},
        "second": {"id": pair.second.id, "title": pair.second.title, "text": pair.second.text},
    }


def flatten_table_row(table: Table, row_index: int) -> str:
    """Linearize one row as ``<title> ; <section> ; <h> is <cell> ; ... .``

    Empty cells are skipped. The output is the sole table-side input given
    to the description backend, so it must stay deterministic.
    """
    if not 0 <= row_index < len(table.rows):
        raise IndexOutOfRange(f"row {row_index} outside table of {len(table.rows)} rows")
    parts = [table.title, table.section_title]
    for header, cell in zip(table.headers, table.rows[row_index]):
        if cell.raw:
            parts.append(f"{header} is {cell.raw}")
    return " ; ".join(parts) + " ."
