"""Parser for a fixed subset of MediaWiki markup.

Supported: ``== headings ==`` (levels 2-6), ``[[Target|surface]]`` links,
``{| ... |}`` tables with ``!`` header and ``|`` cell rows, ``*``/``#`` list
items and blank-line paragraph breaks. Templates, references, comments and
HTML tags are stripped, never expanded.
"""

from __future__ import annotations

import datetime
import re

from wikiupdate.models import (
    Article,
    ListItem,
    Mention,
    Section,
    Sentence,
    TableBlock,
    TableCell,
    TableRow,
)
from wikiupdate.segment import split_offsets
from wikiupdate.text import collapse_whitespace, normalize_title


class MalformedMarkup(ValueError):
    def __init__(self, page_id: str, reason: str):
        super().__init__(f"{page_id}: {reason}")
        self.page_id = page_id
        self.reason = reason


_COMMENT = re.compile(r"<!--.*?-->", re.S)
_REF = re.compile(r"<ref[^>/]*/>|<ref[^>]*>.*?</ref>", re.S | re.I)
_TAG = re.compile(r"</?[A-Za-z][^>]*>")
_EMPHASIS = re.compile(r"'{2,}")
_EXTERNAL = re.compile(r"\[(?:https?:)?//[^\s\]]+(?: ([^\]]*))?\]")
_HEADING_INLINE = re.compile(r"(?:^|(?<=\s))(={2,6})[ \t]*([^=\n]+?)[ \t]*\1(?=\s|$)", re.M)
_HEADING_LINE = re.compile(r"^(={2,6})[ \t]*([^=\n]+?)[ \t]*\1$")
_LIST = re.compile(r"^([*#]+)\s*(.*)$")
_DROPPED_NAMESPACES = ("file:", "image:", "category:", "media:")


def _strip_templates(text: str, page_id: str) -> str:
    out = []
    depth = 0
    i = 0
    n = len(text)
    while i < n:
        if text.startswith("{{", i):
            depth += 1
            i += 2
        elif depth and text.startswith("}}", i):
            depth -= 1
            i += 2
        else:
            if not depth:
                out.append(text[i])
            i += 1
    if depth:
        raise MalformedMarkup(page_id, "unclosed template")
    return "".join(out)


def _clean(text: str) -> str:
    text = _EMPHASIS.sub("", text)
    text = _EXTERNAL.sub(lambda m: m.group(1) or "", text)
    return _TAG.sub(" ", text)


def _find_link_end(text: str, start: int) -> int:
    """Index just past the ``]]`` closing the link opened at ``start``."""
    depth = 0
    i = start
    while i < len(text) - 1:
        if text.startswith("[[", i):
            depth += 1
            i += 2
        elif text.startswith("]]", i):
            depth -= 1
            i += 2
            if depth == 0:
                return i
        else:
            i += 1
    return -1


def render_links(text: str, page_id: str) -> tuple[str, list[Mention]]:
    """Replace links by their surface text; returns plain text and mentions.

    The result is whitespace-normalized and mention offsets index into it.
    """
    text = collapse_whitespace(_clean(text))
    pieces: list[str] = []
    mentions: list[tuple[int, int, str]] = []
    pos = 0
    length = 0
    while True:
        i = text.find("[[", pos)
        if i < 0:
            break
        j = _find_link_end(text, i)
        if j < 0:
            raise MalformedMarkup(page_id, f"unclosed link at offset {i}")
        pieces.append(text[pos:i])
        length += i - pos
        inner = text[i + 2 : j - 2]
        pos = j
        if inner.lower().lstrip(":").startswith(_DROPPED_NAMESPACES):
            continue
        target, _, surface = inner.partition("|")
        if "[[" in surface:
            surface, _ = render_links(surface, page_id)
        surface = surface.strip() or target.strip()
        target = normalize_title(target.split("#", 1)[0].lstrip(":"))
        pieces.append(surface)
        if target and surface:
            mentions.append((length, length + len(surface), target))
        length += len(surface)
    pieces.append(text[pos:])
    raw = "".join(pieces)

    # Collapse whitespace again (dropped links leave double spaces), remapping offsets.
    out: list[str] = []
    remap = [0] * (len(raw) + 1)
    prev_space = True
    for k, ch in enumerate(raw):
        remap[k] = len(out)
        if ch.isspace():
            if not prev_space:
                out.append(" ")
            prev_space = True
        else:
            out.append(ch)
            prev_space = False
    remap[len(raw)] = len(out)
    if out and out[-1] == " ":
        out.pop()
    plain = "".join(out)
    result = []
    for s, e, target in mentions:
        ns, ne = remap[s], min(remap[e], len(plain))
        surface = plain[ns:ne].strip()
        if not surface:
            continue
        ns = plain.index(surface, ns)
        result.append(Mention(surface, ns, ns + len(surface), target))
    return plain, result


def _sentences(paragraph: str, page_id: str, first_index: int) -> list[Sentence]:
    plain, mentions = render_links(paragraph, page_id)
    spans = [(m.start, m.end) for m in mentions]
    out = []
    for s, e in split_offsets(plain, spans):
        text = plain[s:e]
        if not text.strip():
            continue
        ms = tuple(
            Mention(m.surface, m.start - s, m.end - s, m.target)
            for m in mentions
            if s <= m.start and m.end <= e
        )
        out.append(Sentence(text, first_index + len(out), ms))
    return out


def _split_cells(body: str, sep: str) -> list[str]:
    """Split on ``sep`` outside of link markup."""
    cells = []
    depth = 0
    cur = []
    i = 0
    while i < len(body):
        if body.startswith("[[", i):
            depth += 1
            cur.append("[[")
            i += 2
        elif body.startswith("]]", i):
            depth = max(0, depth - 1)
            cur.append("]]")
            i += 2
        elif depth == 0 and body.startswith(sep, i):
            cells.append("".join(cur))
            cur = []
            i += len(sep)
        else:
            cur.append(body[i])
            i += 1
    cells.append("".join(cur))
    return cells


def _cell_content(cell: str) -> str:
    # `attr="x" | content` -> content (a single top-level pipe separates attributes).
    parts = _split_cells(cell, "|")
    if len(parts) > 1 and "[[" not in parts[0]:
        return "|".join(parts[1:])
    return cell


def _parse_table(lines: list[str], table_id: str, page_id: str) -> TableBlock:
    header: list[str] = []
    rows: list[tuple[str, list[str]]] = []
    current: list[str] | None = None
    attrs = ""
    header_open = True
    for line in lines[1:-1]:
        s = line.strip()
        if s.startswith("|+"):
            continue
        if s.startswith("|-"):
            if current:
                rows.append((attrs, current))
                header_open = False
            current = []
            attrs = collapse_whitespace(s[2:])
            continue
        if s.startswith("!"):
            cells = [_cell_content(c) for c in _split_cells(s[1:].replace("||", "!!"), "!!")]
            if header_open and not rows and not current:
                header.extend(cells)
                continue
            current = (current or []) + cells
        elif s.startswith("|"):
            cells = [_cell_content(c) for c in _split_cells(s[1:], "||")]
            current = (current or []) + cells
            header_open = False
        elif s:
            if current:
                current[-1] += " " + s
            elif header:
                header[-1] += " " + s
    if current:
        rows.append((attrs, current))

    header_texts = [render_links(h, page_id)[0] for h in header]
    rendered = []
    for row_attrs, cells in rows:
        tc = []
        for c in cells:
            text, ms = render_links(c, page_id)
            tc.append(TableCell(text, tuple(ms)))
        rendered.append((row_attrs, tc))
    arity = max([len(header_texts)] + [len(c) for _, c in rendered])
    header_texts += [""] * (arity - len(header_texts))
    return TableBlock(
        table_id,
        tuple(header_texts),
        tuple(
            TableRow(tuple(tc + [TableCell("")] * (arity - len(tc))), a) for a, tc in rendered
        ),
    )


class _SectionBuilder:
    def __init__(self, heading_path: tuple[str, ...]):
        self.heading_path = heading_path
        self.sentences: list[Sentence] = []
        self.tables: list[TableBlock] = []
        self.items: list[ListItem] = []
        self.paragraph: list[str] = []

    def flush(self, page_id: str) -> None:
        if self.paragraph:
            self.sentences.extend(
                _sentences(" ".join(self.paragraph), page_id, len(self.sentences))
            )
            self.paragraph = []

    def build(self) -> Section:
        return Section(
            self.heading_path, tuple(self.sentences), tuple(self.tables), tuple(self.items)
        )


def parse_wikitext_subset(
    raw: str, page_id: str, title: str, snapshot_date: datetime.date | str
) -> Article:
    if isinstance(snapshot_date, str):
        snapshot_date = datetime.date.fromisoformat(snapshot_date)
    if not raw or not raw.strip():
        raise MalformedMarkup(page_id, "empty page")
    text = _COMMENT.sub("", raw.replace("\r\n", "\n"))
    text = _REF.sub("", text)
    text = _strip_templates(text, page_id)
    text = _HEADING_INLINE.sub(lambda m: "\n" + m.group(0) + "\n", text)

    builders = [_SectionBuilder(())]
    stack: list[tuple[int, str]] = []
    lines = text.split("\n")
    i = 0
    while i < len(lines):
        line = lines[i]
        stripped = line.strip()
        cur = builders[-1]
        if stripped.startswith("{|"):
            cur.flush(page_id)
            depth = 0
            j = i
            while j < len(lines):
                s = lines[j].strip()
                if s.startswith("{|"):
                    depth += 1
                elif s.startswith("|}"):
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            if j >= len(lines):
                raise MalformedMarkup(page_id, f"unclosed table at line {i + 1}")
            table_id = f"Table-{len(builders) - 1}-{len(cur.tables)}"
            cur.tables.append(_parse_table(lines[i : j + 1], table_id, page_id))
            i = j + 1
            continue
        heading = _HEADING_LINE.match(stripped)
        if heading:
            cur.flush(page_id)
            level = len(heading.group(1))
            name, _ = render_links(heading.group(2), page_id)
            while stack and stack[-1][0] >= level:
                stack.pop()
            stack.append((level, name))
            builders.append(_SectionBuilder(tuple(h for _, h in stack)))
        elif (item := _LIST.match(stripped)) is not None:
            cur.flush(page_id)
            body, mentions = render_links(item.group(2), page_id)
            if body:
                cur.items.append(ListItem(body, tuple(mentions), len(item.group(1))))
        elif not stripped:
            cur.flush(page_id)
        elif stripped.startswith("|}"):
            pass
        else:
            cur.paragraph.append(stripped)
        i += 1
    builders[-1].flush(page_id)
    return Article(page_id, title, snapshot_date, tuple(b.build() for b in builders))
