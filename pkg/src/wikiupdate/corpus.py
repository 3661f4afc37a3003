"""Line-delimited JSON corpus files (one article per line)."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Iterable, Iterator

from wikiupdate.models import Article, SchemaError, article_from_dict, article_to_dict

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    """A malformed record was found in strict mode."""


def dumps(record: dict) -> str:
    """Canonical single-line serialization used for every JSONL output."""
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def corpus_files(path: str | os.PathLike) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix == ".jsonl")
    return [path]


def iter_lines(path: str | os.PathLike) -> Iterator[tuple[Path, int, str]]:
    """Yield (file, 1-based line number, line) over a corpus file or directory."""
    for f in corpus_files(path):
        with open(f, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if line.strip():
                    yield f, lineno, line


def parse_line(line: str) -> Article:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON ({e.msg})") from e
    return article_from_dict(record)


def read_corpus(
    path: str | os.PathLike,
    lenient: bool = False,
    diagnostics: list[str] | None = None,
) -> Iterator[Article]:
    """Stream articles in file order.

    Malformed lines raise CorpusError unless ``lenient``, in which case they are
    logged, recorded in ``diagnostics`` and skipped.
    """
    for f, lineno, line in iter_lines(path):
        try:
            yield parse_line(line)
        except SchemaError as e:
            msg = f"{f}:{lineno}: {e}"
            if not lenient:
                raise CorpusError(msg) from e
            logger.warning("skipping malformed record %s", msg)
            if diagnostics is not None:
                diagnostics.append(msg)


def write_corpus(articles: Iterable[Article], path: str | os.PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a in articles:
            fh.write(dumps(article_to_dict(a)) + "\n")
            n += 1
    return n
