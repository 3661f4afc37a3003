"""ROUGE, update-only ROUGE, entity-token faithfulness, agreement and Spearman.

All scores are percentages in [0, 100]. Tokenization is ``text.tokenize``
(NFKC, lowercase, alphanumeric runs) with no stemming or stopword removal.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Mapping, Sequence

from wikiupdate.text import normalize_text, tokenize


def _prf(overlap: int, n_pred: int, n_ref: int) -> tuple[float, float, float]:
    p = 100.0 * overlap / n_pred if n_pred else 0.0
    r = 100.0 * overlap / n_ref if n_ref else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(pred: Sequence[str], ref: Sequence[str], n: int = 1) -> tuple[float, float, float]:
    """Clipped n-gram overlap (precision, recall, F1) over token sequences."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    p, r = ngrams(pred, n), ngrams(ref, n)
    overlap = sum((p & r).values())
    return _prf(overlap, sum(p.values()), sum(r.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(pred: Sequence[str], ref: Sequence[str]) -> tuple[float, float, float]:
    return _prf(lcs_length(pred, ref), len(pred), len(ref))


def rouge_scores(pred_text: str, ref_text: str) -> dict[str, float]:
    """F1 of ROUGE-1/2/L between two texts."""
    p, r = tokenize(pred_text), tokenize(ref_text)
    return {
        "rouge1": rouge_n(p, r, 1)[2],
        "rouge2": rouge_n(p, r, 2)[2],
        "rougeL": rouge_l(p, r)[2],
    }


def extract_updates(sentences: Iterable[str], source_sentences: Iterable[str]) -> list[str]:
    """Sentences whose normalized form matches no source sentence."""
    seen = {normalize_text(s) for s in source_sentences}
    return [s for s in sentences if normalize_text(s) not in seen]


def update_rouge(pred_sentences: Sequence[str], instance) -> dict[str, float]:
    """ROUGE-1/2/L F1 restricted to updated sentences of prediction and target."""
    pred = extract_updates(pred_sentences, instance.source_texts)
    ref = extract_updates(instance.target_texts, instance.source_texts)
    if not ref:
        v = 0.0 if pred else 100.0
        return {"rouge1": v, "rouge2": v, "rougeL": v}
    return rouge_scores(" ".join(pred), " ".join(ref))


def _bag_prf(pred: Counter, ref: Counter) -> tuple[float, float]:
    if not pred and not ref:
        return 100.0, 100.0
    overlap = sum((pred & ref).values())
    p = 100.0 * overlap / sum(pred.values()) if pred else 0.0
    r = 100.0 * overlap / sum(ref.values()) if ref else 0.0
    return p, r


def entity_metrics(pred_sentences: Sequence[str], instance, annotator) -> dict[str, float]:
    """Entity-token precision/recall against the target, and unsupported tokens.

    ``entity_recall`` (== ``entity_recall_updates``) compares against entity
    tokens of the target's updated sentences; ``entity_recall_target`` against
    all target sentences. Unsupported tokens are predicted-update entity tokens
    that appear nowhere in the source article or the evidence.
    """
    from wikiupdate.codec import render_evidence

    source = instance.source_texts
    pred_updates = extract_updates(pred_sentences, source)
    ref_updates = extract_updates(instance.target_texts, source)

    pred_bag = Counter(annotator.entity_tokens(instance, pred_updates))
    upd_bag = Counter(annotator.entity_tokens(instance, ref_updates))
    tgt_bag = Counter(annotator.entity_tokens(instance, instance.target_texts))

    support_vocab = set()
    for s in source:
        support_vocab.update(tokenize(s))
    for e in instance.evidence:
        support_vocab.update(tokenize(render_evidence(e)))
    unsupported = sum(c for tok, c in pred_bag.items() if tok not in support_vocab)

    precision, recall = _bag_prf(pred_bag, upd_bag)
    _, recall_target = _bag_prf(pred_bag, tgt_bag)
    return {
        "entity_precision": precision,
        "entity_recall": recall,
        "entity_recall_updates": recall,
        "entity_recall_target": recall_target,
        "unsupported_entity_tokens": float(unsupported),
    }


def reference_agreement(silver: Mapping, gold: Mapping) -> float:
    """Percent of silver (sentence, evidence) reference pairs kept in gold."""
    a = {(k, e) for k, ids in silver.items() for e in ids}
    b = {(k, e) for k, ids in gold.items() for e in ids}
    if not a:
        return 100.0 if not b else 0.0
    return 100.0 * len(a & b) / len(a)


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; ties share the mean of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean
        i = j + 1
    return ranks


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = math.fsum(v * v for v in dx)
    syy = math.fsum(v * v for v in dy)
    if sxx == 0 or syy == 0:
        return math.nan
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman's rho with average ranks for ties; NaN if either side is constant."""
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("spearman needs two sequences of equal length >= 2")
    return pearson(average_ranks(x), average_ranks(y))
