"""Pluggable entity annotators for the entity-token metrics.

An annotator maps a text to entity spans over ``tokenize(text)``. Shipped:

* ``GazetteerAnnotator`` - entity strings are the instance's link surfaces plus
  the titles of its added entities, matched as token subsequences.
* ``FileAnnotator`` - imports spans produced by any external recognizer.
* ``IdentityAnnotator`` - every token is an entity token (for sanity checks).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from wikiupdate.text import normalize_text, tokenize


class AnnotationError(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class EntitySpan:
    surface: str
    start: int  # token offsets into tokenize(text), end exclusive
    end: int


class Annotator:
    name = "base"

    def annotate(self, instance, text: str) -> list[EntitySpan]:
        raise NotImplementedError

    def entity_tokens(self, instance, texts: Iterable[str]) -> list[str]:
        out = []
        for text in texts:
            tokens = tokenize(text)
            for span in self.annotate(instance, text):
                out.extend(tokens[span.start : span.end])
        return out


class IdentityAnnotator(Annotator):
    name = "identity"

    def annotate(self, instance, text):
        tokens = tokenize(text)
        return [EntitySpan(text, 0, len(tokens))] if tokens else []


def instance_surfaces(instance) -> set[str]:
    names = set(instance.added_entities)
    for sent in (*instance.source_intro, *instance.target_intro):
        names.update(m.surface for m in sent.mentions)
    for item in instance.evidence:
        names.update(m.surface for m in item.mentions)
    return names


class GazetteerAnnotator(Annotator):
    name = "gazetteer"

    def __init__(self):
        self._cache: dict[str, dict[str, list[tuple[str, ...]]]] = {}

    def _entries(self, instance) -> dict[str, list[tuple[str, ...]]]:
        key = instance.instance_id
        if key not in self._cache:
            by_first: dict[str, list[tuple[str, ...]]] = {}
            for name in instance_surfaces(instance):
                toks = tuple(tokenize(name))
                if toks:
                    by_first.setdefault(toks[0], []).append(toks)
            for v in by_first.values():
                v.sort(key=lambda t: (-len(t), t))
            self._cache = {key: by_first}  # one instance at a time is enough
        return self._cache[key]

    def annotate(self, instance, text):
        entries = self._entries(instance)
        tokens = tokenize(text)
        spans = []
        i = 0
        while i < len(tokens):
            for cand in entries.get(tokens[i], ()):
                if tuple(tokens[i : i + len(cand)]) == cand:
                    spans.append(EntitySpan(" ".join(cand), i, i + len(cand)))
                    i += len(cand)
                    break
            else:
                i += 1
        return spans


class FileAnnotator(Annotator):
    """Spans loaded from a JSONL file of ``{"instance_id", "text", "entities"}``.

    ``entities`` is a list of ``{"surface", "start", "end"}`` token spans over
    ``tokenize(text)``. Every text the metrics ask about must be present.
    """

    name = "file"

    def __init__(self, path):
        self.path = str(path)
        self.spans: dict[tuple[str, str], list[EntitySpan]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                n = len(tokenize(rec["text"]))
                spans = sorted(
                    (EntitySpan(e.get("surface", ""), int(e["start"]), int(e["end"])) for e in rec["entities"]),
                    key=lambda s: s.start,
                )
                last = 0
                for s in spans:
                    if not (last <= s.start < s.end <= n):
                        raise AnnotationError(f"{path}:{lineno}: bad or overlapping span {s}")
                    last = s.end
                self.spans[(rec["instance_id"], normalize_text(rec["text"]))] = spans

    def annotate(self, instance, text):
        try:
            return self.spans[(instance.instance_id, normalize_text(text))]
        except KeyError:
            raise AnnotationError(
                f"no annotation for instance {instance.instance_id!r} text {text[:60]!r}"
            ) from None


def make_annotator(spec: str) -> Annotator:
    if spec == "gazetteer":
        return GazetteerAnnotator()
    if spec == "identity":
        return IdentityAnnotator()
    if spec.startswith("file:"):
        return FileAnnotator(spec[len("file:") :])
    raise ValueError(f"unknown annotator {spec!r} (gazetteer, identity or file:PATH)")
