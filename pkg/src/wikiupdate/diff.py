"""Intro alignment between two snapshots and mining of new subject mentions."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from wikiupdate.models import Article, Mention, Sentence
from wikiupdate.text import normalize_text, tokenize

EDIT_THRESHOLD = 0.5


class PageMismatch(ValueError):
    pass


class Label(str, enum.Enum):
    COPIED = "COPIED"
    EDITED = "EDITED"
    ADDED = "ADDED"


class Kind(str, enum.Enum):
    TEXT = "TEXT"
    TABLE_ROW = "TABLE_ROW"
    LIST_ITEM = "LIST_ITEM"


@dataclass(frozen=True, slots=True)
class SentenceAlignment:
    target_index: int
    label: Label
    source_index: int | None = None
    similarity: float = 0.0


@dataclass(frozen=True, slots=True)
class ArticleDiff:
    page_id: str
    source_intro_sentences: tuple[Sentence, ...]
    target_intro_sentences: tuple[Sentence, ...]
    alignments: tuple[SentenceAlignment, ...]
    removed_source_indices: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class TableRowContent:
    table_id: str
    header: tuple[str, ...]
    cells: tuple[str, ...]
    attrs: str = ""


@dataclass(frozen=True, slots=True)
class EvidenceItem:
    evidence_id: int
    origin_page_id: str
    origin_title: str
    heading_path: tuple[str, ...]
    kind: Kind
    content: Union[str, TableRowContent]
    mentions: tuple[Mention, ...] = ()

    @property
    def targets(self) -> set[str]:
        return {m.target for m in self.mentions}

    def text(self) -> str:
        """Content as plain text (table rows linearized)."""
        if isinstance(self.content, TableRowContent):
            from wikiupdate.codec import linearize_row

            return linearize_row(self.content)
        return self.content


def jaccard_similarity(a: Iterable[str], b: Iterable[str]) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def lcs_pairs(xs: list, ys: list) -> list[tuple[int, int]]:
    """Index pairs of one longest common subsequence of two sequences."""
    n, m = len(xs), len(ys)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, below = dp[i], dp[i + 1]
        for j in range(m - 1, -1, -1):
            if xs[i] == ys[j]:
                row[j] = below[j + 1] + 1
            else:
                row[j] = max(below[j], row[j + 1])
    pairs = []
    i = j = 0
    while i < n and j < m:
        if xs[i] == ys[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif dp[i + 1][j] >= dp[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def align_sentences(
    source: tuple[Sentence, ...], target: tuple[Sentence, ...]
) -> tuple[list[SentenceAlignment], list[int]]:
    src_norm = [normalize_text(s.text) for s in source]
    tgt_norm = [normalize_text(s.text) for s in target]
    match: dict[int, int] = {j: i for i, j in lcs_pairs(src_norm, tgt_norm)}
    copied = set(match)
    src_tokens = [set(tokenize(s.text)) for s in source]
    used = set(match.values())
    sims: dict[int, float] = {}

    for t in range(len(target)):
        if t in match:
            continue
        lower = max((match[k] for k in match if k < t), default=-1)
        upper = min((match[k] for k in match if k > t), default=len(source))
        tokens = set(tokenize(target[t].text))
        best, best_sim = None, 0.0
        for s in range(lower + 1, upper):
            if s in used:
                continue
            sim = jaccard_similarity(tokens, src_tokens[s])
            if sim > best_sim or best is None:
                best, best_sim = s, sim
        sims[t] = best_sim
        if best is not None and best_sim >= EDIT_THRESHOLD:
            match[t] = best
            used.add(best)

    alignments = []
    for t in range(len(target)):
        if t in copied:
            alignments.append(SentenceAlignment(t, Label.COPIED, match[t], 1.0))
        elif t in match:
            alignments.append(SentenceAlignment(t, Label.EDITED, match[t], sims[t]))
        else:
            alignments.append(SentenceAlignment(t, Label.ADDED, None, sims.get(t, 0.0)))
    removed = [i for i in range(len(source)) if i not in used]
    return alignments, removed


def align_article(source: Article, target: Article) -> ArticleDiff:
    """Label each target intro sentence COPIED, EDITED or ADDED."""
    if source.page_id != target.page_id:
        raise PageMismatch(f"{source.page_id!r} != {target.page_id!r}")
    alignments, removed = align_sentences(source.intro_sentences, target.intro_sentences)
    return ArticleDiff(
        target.page_id,
        source.intro_sentences,
        target.intro_sentences,
        tuple(alignments),
        tuple(removed),
    )


# --- evidence mining ---------------------------------------------------------

_KIND_ORDER = {Kind.TEXT: 0, Kind.TABLE_ROW: 1, Kind.LIST_ITEM: 2}


def _units(article: Article):
    """(position, key, kind, content, mentions, heading_path) over non-intro sections."""
    for si, section in enumerate(article.sections):
        if si == 0:
            continue
        for sent in section.sentences:
            yield (
                (si, 0, 0, sent.index),
                ("T", normalize_text(sent.text)),
                Kind.TEXT,
                sent.text,
                sent.mentions,
                section.heading_path,
            )
        for ti, table in enumerate(section.tables):
            for ri, row in enumerate(table.rows):
                cells = tuple(row.texts)
                yield (
                    (si, 1, ti, ri),
                    ("R", normalize_text(" | ".join(cells))),
                    Kind.TABLE_ROW,
                    TableRowContent(table.table_id, table.header, cells, row.attrs),
                    row.flat_mentions(),
                    section.heading_path,
                )
        for li, item in enumerate(section.list_items):
            yield (
                (si, 2, 0, li),
                ("L", normalize_text(item.text)),
                Kind.LIST_ITEM,
                item.text,
                item.mentions,
                section.heading_path,
            )


def new_units(source: Article | None, target: Article) -> list[tuple[tuple, EvidenceItem]]:
    """Non-intro units of ``target`` that are absent from ``source``.

    Only units carrying at least one mention are returned (anything else can
    never be evidence). Items carry evidence_id -1 until assigned.
    """
    old = {key for _, key, *_ in _units(source)} if source is not None else set()
    out = []
    for pos, key, kind, content, mentions, heading_path in _units(target):
        if key in old or not mentions:
            continue
        item = EvidenceItem(-1, target.page_id, target.title, heading_path, kind, content, mentions)
        out.append((pos, item))
    return out


def number_evidence(units: Iterable[tuple[tuple, EvidenceItem]]) -> list[EvidenceItem]:
    """Sort (origin_page_id, position)-keyed units and assign ids 0..n-1."""
    ordered = sorted(units, key=lambda u: (u[1].origin_page_id, u[0]))
    out = []
    for i, (_, item) in enumerate(ordered):
        out.append(
            EvidenceItem(
                i,
                item.origin_page_id,
                item.origin_title,
                item.heading_path,
                item.kind,
                item.content,
                item.mentions,
            )
        )
    return out


def mine_new_mentions(
    source_others: Mapping[str, Article],
    target_others: Mapping[str, Article],
    subject_page_id: str,
) -> list[EvidenceItem]:
    """New units in other articles that link to ``subject_page_id``."""
    found = []
    for page_id in sorted(target_others):
        if page_id == subject_page_id:
            continue
        for pos, item in new_units(source_others.get(page_id), target_others[page_id]):
            if subject_page_id in item.targets:
                found.append((pos, item))
    return number_evidence(found)
