"""Deterministic rule-based sentence segmentation.

A boundary is a run of ``.``, ``!`` or ``?`` (optionally followed by closing
quotes/brackets) and a single space, where the next character is uppercase, a
digit or an opening quote. Periods that end an abbreviation never split.
"""

from __future__ import annotations

import functools
import re
from importlib import resources

from wikiupdate.models import Sentence
from wikiupdate.text import collapse_whitespace

_BOUNDARY = re.compile(r"[.!?]+[\"'”’)\]]*(?= )")
_OPENERS = "\"'“‘("
_LEADING_PUNCT = "\"'“‘(["
_SINGLE_INITIAL = re.compile(r"[A-Z]\.")
_INITIALISM = re.compile(r"(?:[A-Za-z]\.){2,}")
_MARKUP = re.compile(r"\[\[.*?\]\]|\{\|.*?\|\}")


@functools.cache
def abbreviations() -> frozenset[str]:
    raw = resources.files("wikiupdate").joinpath("data/abbreviations.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in raw.splitlines() if line.strip() and not line.startswith("#")
    )


def _is_abbreviation(token: str) -> bool:
    token = token.lstrip(_LEADING_PUNCT)
    return (
        token in abbreviations()
        or _SINGLE_INITIAL.fullmatch(token) is not None
        or _INITIALISM.fullmatch(token) is not None
    )


def _starts_sentence(text: str, pos: int) -> bool:
    c = text[pos]
    return c.isupper() or c.isdigit() or c in _OPENERS or text.startswith("[[", pos)


def split_offsets(text: str, protected: list[tuple[int, int]] = ()) -> list[tuple[int, int]]:
    """Sentence spans of an already whitespace-normalized paragraph.

    No boundary is placed strictly inside a ``protected`` (start, end) span.
    """
    if not text:
        return []
    spans = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        end = m.end()
        if end + 1 >= len(text) or not _starts_sentence(text, end + 1):
            continue
        if any(s < end < e for s, e in protected):
            continue
        if text[m.start()] == ".":
            token = text[text.rfind(" ", 0, m.start()) + 1 : m.start() + 1]
            if _is_abbreviation(token):
                continue
        spans.append((start, end))
        start = end + 1
    spans.append((start, len(text)))
    return spans


def segment_sentences(text: str) -> list[Sentence]:
    """Split one paragraph into sentences.

    Joining the sentence texts with single spaces gives back the
    whitespace-normalized input. Link (``[[...]]``) and table (``{|...|}``)
    markup is never split.
    """
    text = collapse_whitespace(text)
    protected = [m.span() for m in _MARKUP.finditer(text)]
    return [
        Sentence(text[s:e], i) for i, (s, e) in enumerate(split_offsets(text, protected))
    ]
