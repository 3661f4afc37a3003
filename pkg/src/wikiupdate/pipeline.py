"""Instance assembly: stylistic filter, distant-supervision evidence links, stats."""

from __future__ import annotations

import hashlib
import json
import logging
import multiprocessing
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from wikiupdate.corpus import corpus_files, dumps, parse_line
from wikiupdate.diff import (
    ArticleDiff,
    EvidenceItem,
    Kind,
    Label,
    SentenceAlignment,
    TableRowContent,
    align_article,
    new_units,
    number_evidence,
)
from wikiupdate.models import Article, Sentence, mention_from_dict, mention_to_dict

logger = logging.getLogger(__name__)

FAILURE_BUDGET = 0.01


@dataclass(frozen=True)
class UpdateInstance:
    instance_id: str
    source_intro: tuple[Sentence, ...]
    target_intro: tuple[Sentence, ...]
    alignments: tuple[SentenceAlignment, ...]
    removed_source: tuple[int, ...]
    evidence: tuple[EvidenceItem, ...]
    support: dict[int, tuple[int, ...]] = field(default_factory=dict)
    added_entities: frozenset[str] = frozenset()

    @property
    def page_id(self) -> str:
        return self.instance_id.split("@", 1)[0]

    @property
    def source_texts(self) -> list[str]:
        return [s.text for s in self.source_intro]

    @property
    def target_texts(self) -> list[str]:
        return [s.text for s in self.target_intro]


@dataclass(frozen=True)
class DatasetStats:
    articles: int = 0
    edits: int = 0
    substantiated_edits: int = 0
    evidence_items: int = 0
    content_selection_instances: int = 0

    def __add__(self, other: "DatasetStats") -> "DatasetStats":
        return DatasetStats(
            self.articles + other.articles,
            self.edits + other.edits,
            self.substantiated_edits + other.substantiated_edits,
            self.evidence_items + other.evidence_items,
            self.content_selection_instances + other.content_selection_instances,
        )

    def to_dict(self) -> dict[str, int]:
        return {
            "articles": self.articles,
            "edits": self.edits,
            "substantiated_edits": self.substantiated_edits,
            "evidence_items": self.evidence_items,
            "content_selection_instances": self.content_selection_instances,
        }


def added_entities(diff: ArticleDiff, source: Article | None = None, target: Article | None = None) -> set[str]:
    """Link targets in the target intro that no source intro sentence links to.

    ``source``/``target`` are accepted for call-site symmetry; the diff already
    carries both intros.
    """
    before = set()
    for s in diff.source_intro_sentences:
        before |= s.targets
    after = set()
    for s in diff.target_intro_sentences:
        after |= s.targets
    return after - before


def filter_stylistic(diff: ArticleDiff, source: Article | None = None, target: Article | None = None) -> bool:
    """True (keep) iff the update adds at least one linked entity."""
    return bool(added_entities(diff))


def associate_evidence(
    diff: ArticleDiff, evidence: Iterable[EvidenceItem], added: set[str]
) -> dict[int, tuple[int, ...]]:
    evidence = list(evidence)
    support = {}
    for al in diff.alignments:
        if al.label is Label.COPIED:
            continue
        wanted = diff.target_intro_sentences[al.target_index].targets & added
        if not wanted:
            continue
        ids = sorted({e.evidence_id for e in evidence if e.targets & wanted})
        if ids:
            support[al.target_index] = tuple(ids)
    return support


def instance_id_for(page_id: str, source: Article, target: Article) -> str:
    return f"{page_id}@{source.snapshot_date.isoformat()}->{target.snapshot_date.isoformat()}"


def assemble(diff: ArticleDiff, instance_id: str, added: set[str], units) -> UpdateInstance | None:
    evidence = number_evidence(units)
    if not evidence:
        return None
    return UpdateInstance(
        instance_id,
        diff.source_intro_sentences,
        diff.target_intro_sentences,
        diff.alignments,
        diff.removed_source_indices,
        tuple(evidence),
        associate_evidence(diff, evidence, added),
        frozenset(added),
    )


@dataclass
class _PairResult:
    page_id: str
    candidate: tuple[ArticleDiff, str, frozenset] | None
    units: list


def process_pair(source: Article | None, target: Article) -> _PairResult:
    """Per-page work: diff + filter for the subject, new units for mining."""
    units = new_units(source, target)
    candidate = None
    if source is not None:
        diff = align_article(source, target)
        added = added_entities(diff)
        if added:
            candidate = (diff, instance_id_for(target.page_id, source, target), frozenset(added))
    return _PairResult(target.page_id, candidate, units)


class _Merger:
    """Deterministic merge of per-page results, independent of arrival order."""

    def __init__(self):
        self.candidates: dict[str, tuple] = {}
        self.by_subject: dict[str, list] = {}

    def add(self, r: _PairResult) -> None:
        if r.candidate is not None:
            self.candidates[r.page_id] = r.candidate
        for pos, item in r.units:
            for t in item.targets:
                if t != item.origin_page_id:
                    self.by_subject.setdefault(t, []).append((pos, item))

    def instances(self) -> Iterator[UpdateInstance]:
        for page_id in sorted(self.candidates):
            diff, instance_id, added = self.candidates[page_id]
            inst = assemble(diff, instance_id, set(added), self.by_subject.get(page_id, []))
            if inst is not None:
                yield inst


def build_instances(
    source_corpus: Iterable[Article],
    target_corpus: Iterable[Article],
    failures: list[str] | None = None,
) -> Iterator[UpdateInstance]:
    """In-memory pipeline over two article streams; output sorted by page_id."""
    sources = {a.page_id: a for a in source_corpus}
    merger = _Merger()
    for target in target_corpus:
        try:
            merger.add(process_pair(sources.get(target.page_id), target))
        except Exception as e:  # per-page isolation
            logger.error("page %s failed: %s", target.page_id, e)
            if failures is not None:
                failures.append(f"{target.page_id}: {e}")
    return merger.instances()


# --- file-backed, parallel build --------------------------------------------

_PAGE_ID_PREFIX = re.compile(r'^\{"page_id":("(?:[^"\\]|\\.)*")')


def _page_id_of(line: str) -> str:
    m = _PAGE_ID_PREFIX.match(line)
    if m:
        return json.loads(m.group(1))
    return json.loads(line)["page_id"]


class _SourceIndex:
    """page_id -> byte offset of its record, so the source never sits in memory."""

    def __init__(self, path):
        self.offsets: dict[str, tuple[int, int]] = {}
        self.files = corpus_files(path)
        self.handles = []
        for fi, f in enumerate(self.files):
            with open(f, "rb") as fh:
                offset = 0
                for raw in fh:
                    if raw.strip():
                        try:
                            self.offsets[_page_id_of(raw.decode("utf-8"))] = (fi, offset)
                        except (ValueError, KeyError, TypeError):
                            pass  # reported when (if) the page is needed
                    offset += len(raw)
            self.handles.append(open(f, "rb"))

    def get(self, page_id: str) -> str | None:
        loc = self.offsets.get(page_id)
        if loc is None:
            return None
        fh = self.handles[loc[0]]
        fh.seek(loc[1])
        return fh.readline().decode("utf-8")

    def close(self):
        for h in self.handles:
            h.close()


def _work(job: tuple[str, str | None, str]):
    where, src_line, tgt_line = job
    try:
        target = parse_line(tgt_line)
        source = parse_line(src_line) if src_line is not None else None
        return process_pair(source, target)
    except Exception as e:
        return f"{where}: {e}"


def _jobs(source_index: _SourceIndex, target_path) -> Iterator[tuple[str, str | None, str]]:
    for f in corpus_files(target_path):
        with open(f, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                where = f"{f.name}:{lineno}"
                try:
                    page_id = _page_id_of(line)
                    where = f"{page_id} ({where})"
                except (ValueError, KeyError, TypeError):
                    yield where, None, line
                    continue
                yield where, source_index.get(page_id), line


@dataclass
class BuildResult:
    instances: list[UpdateInstance]
    pages: int
    failures: list[str]

    @property
    def failure_rate(self) -> float:
        return len(self.failures) / self.pages if self.pages else 0.0

    @property
    def over_budget(self) -> bool:
        return self.failure_rate > FAILURE_BUDGET


def build_from_files(source_path, target_path, workers: int = 1) -> BuildResult:
    """Stream the target corpus against an offset index of the source corpus."""
    index = _SourceIndex(source_path)
    merger = _Merger()
    failures: list[str] = []
    pages = 0
    pool = None
    try:
        jobs = _jobs(index, target_path)
        if workers > 1:
            pool = multiprocessing.get_context("fork").Pool(workers)
            results = pool.imap(_work, jobs, chunksize=32)
        else:
            results = map(_work, jobs)
        for r in results:
            pages += 1
            if isinstance(r, str):
                logger.error("page failed: %s", r)
                failures.append(r)
            else:
                merger.add(r)
    finally:
        if pool is not None:
            pool.close()
            pool.join()
        index.close()
    return BuildResult(list(merger.instances()), pages, failures)


def stats(instances: Iterable[UpdateInstance]) -> DatasetStats:
    total = DatasetStats()
    for inst in instances:
        edits = sum(1 for a in inst.alignments if a.label is not Label.COPIED)
        used = {e for ids in inst.support.values() for e in ids}
        total = total + DatasetStats(
            1,
            edits,
            len(inst.support),
            len(inst.evidence),
            int(any(e.evidence_id not in used for e in inst.evidence)),
        )
    return total


def assign_split(instance_id: str, validation_fraction: float = 0.1) -> str:
    """Hash-based train/validation assignment (stable across runs and machines)."""
    h = int.from_bytes(hashlib.sha1(instance_id.encode("utf-8")).digest()[:8], "big")
    return "validation" if h / 2**64 < validation_fraction else "train"


# --- instance records --------------------------------------------------------


def _content_to_json(item: EvidenceItem) -> Any:
    c = item.content
    if isinstance(c, TableRowContent):
        return {"table_id": c.table_id, "header": list(c.header), "cells": list(c.cells), "attrs": c.attrs}
    return c


def evidence_to_dict(e: EvidenceItem) -> dict[str, Any]:
    return {
        "id": e.evidence_id,
        "origin": e.origin_page_id,
        "heading_path": list(e.heading_path),
        "kind": e.kind.value,
        "content": _content_to_json(e),
        "origin_title": e.origin_title,
        "mentions": [mention_to_dict(m) for m in e.mentions],
    }


def evidence_from_dict(d: dict[str, Any]) -> EvidenceItem:
    kind = Kind(d["kind"])
    content = d["content"]
    if kind is Kind.TABLE_ROW:
        content = TableRowContent(
            content["table_id"], tuple(content["header"]), tuple(content["cells"]), content.get("attrs", "")
        )
    return EvidenceItem(
        int(d["id"]),
        d["origin"],
        d.get("origin_title", d["origin"]),
        tuple(d.get("heading_path", ())),
        kind,
        content,
        tuple(mention_from_dict(m) for m in d.get("mentions", ())),
    )


def instance_to_dict(inst: UpdateInstance) -> dict[str, Any]:
    return {
        "instance_id": inst.instance_id,
        "source_sentences": inst.source_texts,
        "target_sentences": inst.target_texts,
        "alignments": [
            {"target": a.target_index, "label": a.label.value, "source": a.source_index, "similarity": a.similarity}
            for a in inst.alignments
        ],
        "removed_source": list(inst.removed_source),
        "evidence": [evidence_to_dict(e) for e in inst.evidence],
        "support": {str(k): list(v) for k, v in sorted(inst.support.items())},
        "added_entities": sorted(inst.added_entities),
        "source_mentions": [[mention_to_dict(m) for m in s.mentions] for s in inst.source_intro],
        "target_mentions": [[mention_to_dict(m) for m in s.mentions] for s in inst.target_intro],
    }


def _sentences(texts: list[str], mentions: list | None) -> tuple[Sentence, ...]:
    mentions = mentions or [[] for _ in texts]
    return tuple(
        Sentence(t, i, tuple(mention_from_dict(m) for m in ms)) for i, (t, ms) in enumerate(zip(texts, mentions))
    )


def instance_from_dict(d: dict[str, Any]) -> UpdateInstance:
    return UpdateInstance(
        d["instance_id"],
        _sentences(d["source_sentences"], d.get("source_mentions")),
        _sentences(d["target_sentences"], d.get("target_mentions")),
        tuple(
            SentenceAlignment(a["target"], Label(a["label"]), a.get("source"), a.get("similarity", 0.0))
            for a in d["alignments"]
        ),
        tuple(d.get("removed_source", ())),
        tuple(evidence_from_dict(e) for e in d.get("evidence", ())),
        {int(k): tuple(v) for k, v in d.get("support", {}).items()},
        frozenset(d.get("added_entities", ())),
    )


def write_instances(instances: Iterable[UpdateInstance], path: str | os.PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(dumps(instance_to_dict(inst)) + "\n")
            n += 1
    return n


def read_instances(path: str | os.PathLike) -> Iterator[UpdateInstance]:
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield instance_from_dict(json.loads(line))
