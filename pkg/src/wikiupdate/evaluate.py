"""Scoring of prediction files against instance files."""

from __future__ import annotations

import json
import math
import multiprocessing
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from wikiupdate.codec import decode_output
from wikiupdate.metrics import (
    entity_metrics,
    extract_updates,
    reference_agreement,
    rouge_scores,
    update_rouge,
)
from wikiupdate.segment import segment_sentences
from wikiupdate.text import collapse_whitespace

METRIC_KEYS = (
    "rouge1",
    "rouge2",
    "rougeL",
    "update_rouge1",
    "update_rouge2",
    "update_rougeL",
    "entity_precision",
    "entity_recall",
    "entity_recall_target",
    "entity_recall_updates",
    "unsupported_entity_tokens",
)

NORMALIZER = "NFKC, lowercase, split on non-alphanumeric runs"


class EvaluationError(ValueError):
    pass


_SENTENCE_END = re.compile(r"[.!?][\"'”’)\]]*$")


def split_prediction(text: str, source_sentences: Sequence[str]) -> list[str]:
    """Sentence-split a plain prediction, keeping verbatim source sentences whole.

    A source sentence is recognized wherever a new sentence may start, so
    copied text is never merged with its neighbours by the segmenter.
    """
    text = collapse_whitespace(text)
    sources = sorted({collapse_whitespace(s) for s in source_sentences if s.strip()}, key=lambda s: (-len(s), s))
    out: list[str] = []
    free_start = pos = 0
    n = len(text)
    while pos < n:
        at_start = pos == free_start or _SENTENCE_END.search(text, free_start, pos - 1) is not None
        hit = None
        if at_start:
            for s in sources:
                end = pos + len(s)
                if text.startswith(s, pos) and (end == n or text[end] == " "):
                    hit = s
                    break
        if hit is not None:
            if pos > free_start:
                out.extend(x.text for x in segment_sentences(text[free_start:pos]))
            out.append(hit)
            pos = free_start = pos + len(hit) + 1
            continue
        nxt = text.find(" ", pos)
        pos = n if nxt < 0 else nxt + 1
    if free_start < n:
        out.extend(x.text for x in segment_sentences(text[free_start:]))
    return out


def prediction_sentences(prediction: dict, instance) -> tuple[list[str], int]:
    """(sentences, decode warnings) for one prediction record."""
    fmt = prediction.get("format", "plain")
    if fmt == "edit_script":
        decoded = decode_output(prediction["output"], instance.source_texts)
        return decoded.sentences, len(decoded.warnings)
    if fmt == "plain":
        return split_prediction(prediction["output"], instance.source_texts), 0
    raise EvaluationError(f"{prediction['instance_id']}: unknown format {fmt!r}")


def score_instance(instance, pred_sentences: Sequence[str], annotator) -> dict[str, float]:
    scores = {}
    for k, v in rouge_scores(" ".join(pred_sentences), " ".join(instance.target_texts)).items():
        scores[k] = v
    for k, v in update_rouge(pred_sentences, instance).items():
        scores["update_" + k] = v
    scores.update(entity_metrics(pred_sentences, instance, annotator))
    scores["has_updates"] = float(bool(extract_updates(pred_sentences, instance.source_texts)))
    return scores


@dataclass
class MetricReport:
    scores: dict[str, float]
    instances: int
    predictions_without_updates: int
    decode_warnings: int = 0
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: self.scores[k] for k in METRIC_KEYS if k in self.scores}
        d.update(self.extra)
        d["counts"] = {
            "instances": self.instances,
            "predictions_without_updates": self.predictions_without_updates,
            "decode_warnings": self.decode_warnings,
        }
        d["config"] = self.config
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def table(self) -> str:
        s = self.scores
        head = ("UR-1", "UR-2", "UR-L", "E-Prec", "E-Rec", "Unsup", "R-1", "R-2", "R-L")
        vals = [
            f"{s['update_rouge1']:.1f}",
            f"{s['update_rouge2']:.1f}",
            f"{s['update_rougeL']:.1f}",
            f"{s['entity_precision']:.1f}",
            f"{s['entity_recall']:.1f}",
            f"{s['unsupported_entity_tokens']:.2f}",
            f"{s['rouge1']:.1f}",
            f"{s['rouge2']:.1f}",
            f"{s['rougeL']:.1f}",
        ]
        widths = [max(len(h), len(v)) for h, v in zip(head, vals)]
        line1 = "  ".join(h.rjust(w) for h, w in zip(head, widths))
        line2 = "  ".join(v.rjust(w) for v, w in zip(vals, widths))
        return f"{line1}\n{line2}"


def load_predictions(records: Iterable[dict], instance_ids: Sequence[str]) -> dict[str, dict]:
    preds: dict[str, dict] = {}
    dupes = []
    for rec in records:
        iid = rec.get("instance_id")
        if iid in preds:
            dupes.append(iid)
        preds[iid] = rec
    if dupes:
        raise EvaluationError(f"duplicate prediction ids: {', '.join(map(str, sorted(set(dupes))))}")
    known = set(instance_ids)
    unknown = sorted(str(k) for k in preds if k not in known)
    if unknown:
        raise EvaluationError(f"predictions for unknown instance ids: {', '.join(unknown)}")
    missing = [i for i in instance_ids if i not in preds]
    if missing:
        raise EvaluationError(f"missing predictions for instance ids: {', '.join(missing)}")
    return preds


_worker_state: dict = {}


def _score_job(job):
    instance, prediction = job
    sentences, warnings = prediction_sentences(prediction, instance)
    return score_instance(instance, sentences, _worker_state["annotator"]), warnings


def _macro(rows: list[dict[str, float]]) -> dict[str, float]:
    if not rows:
        return {k: 0.0 for k in METRIC_KEYS}
    return {k: math.fsum(r[k] for r in rows) / len(rows) for k in METRIC_KEYS}


def evaluate(instances: Sequence, predictions: Iterable[dict], annotator, workers: int = 1, config=None) -> MetricReport:
    """Macro-averaged metrics; the result does not depend on ``workers``."""
    ids = [inst.instance_id for inst in instances]
    preds = load_predictions(predictions, ids)
    jobs = [(inst, preds[inst.instance_id]) for inst in instances]
    _worker_state["annotator"] = annotator
    if workers > 1:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            results = pool.map(_score_job, jobs, chunksize=16)
    else:
        results = [_score_job(j) for j in jobs]
    rows = [r for r, _ in results]
    cfg = {"averaging": "macro", "normalizer": NORMALIZER, "rouge": "no stemming, no stopword removal",
           "annotator": getattr(annotator, "name", type(annotator).__name__)}
    cfg.update(config or {})
    return MetricReport(
        _macro(rows),
        len(rows),
        sum(1 for r in rows if not r["has_updates"]),
        sum(w for _, w in results),
        cfg,
    )


def agreement(silver: Sequence, gold: Sequence, annotator) -> MetricReport:
    """Score silver targets as predictions against gold, plus reference agreement."""
    silver_by_id = {s.instance_id: s for s in silver}
    missing = [g.instance_id for g in gold if g.instance_id not in silver_by_id]
    if missing:
        raise EvaluationError(f"gold instances without silver counterpart: {', '.join(missing)}")
    rows = []
    a, b = {}, {}
    for g in gold:
        s = silver_by_id[g.instance_id]
        rows.append(score_instance(g, s.target_texts, annotator))
        for k, v in s.support.items():
            a[(g.instance_id, k)] = v
        for k, v in g.support.items():
            b[(g.instance_id, k)] = v
    return MetricReport(
        _macro(rows),
        len(rows),
        sum(1 for r in rows if not r["has_updates"]),
        config={"averaging": "macro", "reference_agreement": "pooled over all (instance, sentence, evidence) pairs",
                "annotator": getattr(annotator, "name", "")},
        extra={"reference_agreement": reference_agreement(a, b)},
    )
