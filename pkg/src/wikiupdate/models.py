"""Document data model and its line-record (JSON) representation.

All types are frozen; sequences are stored as tuples so articles can be shared
between threads and hashed where useful.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from typing import Any


class SchemaError(ValueError):
    """A corpus record does not follow the record schema."""


@dataclass(frozen=True, slots=True)
class Mention:
    surface: str
    start: int
    end: int
    target: str
    # Set only for mentions flattened out of a table row: index of the cell
    # whose text the offsets refer to.
    cell: int | None = None


@dataclass(frozen=True, slots=True)
class Sentence:
    text: str
    index: int = 0
    mentions: tuple[Mention, ...] = ()

    @property
    def targets(self) -> set[str]:
        return {m.target for m in self.mentions}


@dataclass(frozen=True, slots=True)
class TableCell:
    text: str
    mentions: tuple[Mention, ...] = ()


@dataclass(frozen=True, slots=True)
class TableRow:
    cells: tuple[TableCell, ...]
    attrs: str = ""

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(c.text for c in self.cells)

    def flat_mentions(self) -> tuple[Mention, ...]:
        out = []
        for i, cell in enumerate(self.cells):
            for m in cell.mentions:
                out.append(Mention(m.surface, m.start, m.end, m.target, cell=i))
        return tuple(out)


@dataclass(frozen=True, slots=True)
class TableBlock:
    table_id: str
    header: tuple[str, ...]
    rows: tuple[TableRow, ...] = ()


@dataclass(frozen=True, slots=True)
class ListItem:
    text: str
    mentions: tuple[Mention, ...] = ()
    marker_depth: int = 1


@dataclass(frozen=True, slots=True)
class Section:
    heading_path: tuple[str, ...] = ()
    sentences: tuple[Sentence, ...] = ()
    tables: tuple[TableBlock, ...] = ()
    list_items: tuple[ListItem, ...] = ()


@dataclass(frozen=True, slots=True)
class Article:
    page_id: str
    title: str
    snapshot_date: datetime.date
    sections: tuple[Section, ...] = field(default=(Section(),))

    @property
    def intro(self) -> Section:
        return self.sections[0]

    @property
    def intro_sentences(self) -> tuple[Sentence, ...]:
        return self.sections[0].sentences


# --- record conversion ------------------------------------------------------


def mention_to_dict(m: Mention) -> dict[str, Any]:
    d: dict[str, Any] = {"surface": m.surface, "start": m.start, "end": m.end, "target": m.target}
    if m.cell is not None:
        d["cell"] = m.cell
    return d


def mention_from_dict(d: dict[str, Any]) -> Mention:
    return Mention(d["surface"], int(d["start"]), int(d["end"]), d["target"], d.get("cell"))


def _mentions(ds) -> tuple[Mention, ...]:
    return tuple(mention_from_dict(m) for m in ds or ())


def table_to_dict(t: TableBlock) -> dict[str, Any]:
    return {
        "table_id": t.table_id,
        "header": list(t.header),
        "rows": [
            {
                "attrs": r.attrs,
                "cells": [
                    {"text": c.text, "mentions": [mention_to_dict(m) for m in c.mentions]}
                    for c in r.cells
                ],
            }
            for r in t.rows
        ],
    }


def table_from_dict(d: dict[str, Any]) -> TableBlock:
    rows = tuple(
        TableRow(
            tuple(TableCell(c["text"], _mentions(c.get("mentions"))) for c in r["cells"]),
            r.get("attrs", ""),
        )
        for r in d.get("rows", ())
    )
    return TableBlock(d["table_id"], tuple(d.get("header", ())), rows)


def article_to_dict(a: Article) -> dict[str, Any]:
    return {
        "page_id": a.page_id,
        "title": a.title,
        "snapshot_date": a.snapshot_date.isoformat(),
        "sections": [
            {
                "heading_path": list(s.heading_path),
                "sentences": [
                    {"text": x.text, "mentions": [mention_to_dict(m) for m in x.mentions]}
                    for x in s.sentences
                ],
                "tables": [table_to_dict(t) for t in s.tables],
                "list_items": [
                    {
                        "text": li.text,
                        "mentions": [mention_to_dict(m) for m in li.mentions],
                        "marker_depth": li.marker_depth,
                    }
                    for li in s.list_items
                ],
            }
            for s in a.sections
        ],
    }


def article_from_dict(d: dict[str, Any]) -> Article:
    if not isinstance(d, dict):
        raise SchemaError("record is not an object")
    page_id = d.get("page_id")
    if not isinstance(page_id, str) or not page_id:
        raise SchemaError("missing page_id")
    try:
        date = datetime.date.fromisoformat(d["snapshot_date"])
        sections = []
        for s in d.get("sections") or [{}]:
            sentences = tuple(
                Sentence(x["text"], i, _mentions(x.get("mentions")))
                for i, x in enumerate(s.get("sentences", ()))
            )
            sections.append(
                Section(
                    tuple(s.get("heading_path", ())),
                    sentences,
                    tuple(table_from_dict(t) for t in s.get("tables", ())),
                    tuple(
                        ListItem(li["text"], _mentions(li.get("mentions")), int(li.get("marker_depth", 1)))
                        for li in s.get("list_items", ())
                    ),
                )
            )
        return Article(page_id, d.get("title", page_id), date, tuple(sections))
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"page {page_id}: bad record ({e!r})") from e
