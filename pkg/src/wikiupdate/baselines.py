"""Trivial copy baselines, emitted in the plain prediction format."""

from __future__ import annotations

from typing import Iterable, Iterator


def copy_source(instance) -> str:
    return " ".join(instance.source_texts)


def copy_source_plus_evidence(instance) -> str:
    parts = [copy_source(instance)] + [e.text() for e in instance.evidence]
    return " ".join(p for p in parts if p)


BASELINES = {"copy": copy_source, "copy_evidence": copy_source_plus_evidence}


def predictions(instances: Iterable, kind: str) -> Iterator[dict]:
    fn = BASELINES[kind]
    for inst in instances:
        yield {"instance_id": inst.instance_id, "output": fn(inst), "format": "plain"}
