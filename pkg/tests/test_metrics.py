import itertools
import json
import math
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_instance, text_item
from wikiupdate.annotators import FileAnnotator, GazetteerAnnotator, IdentityAnnotator
from wikiupdate.metrics import (
    average_ranks,
    entity_metrics,
    extract_updates,
    lcs_length,
    reference_agreement,
    rouge_l,
    rouge_n,
    spearman,
    update_rouge,
)

# --- independent oracles ---------------------------------------------------


def prf_oracle(overlap, n_pred, n_ref):
    p = 100 * overlap / n_pred if n_pred else 0.0
    r = 100 * overlap / n_ref if n_ref else 0.0
    return p, r, (2 * p * r / (p + r) if p + r else 0.0)


def rouge_n_oracle(pred, ref, n):
    """Greedy one-to-one matching of n-gram occurrences (list removal)."""
    grams_p = [tuple(pred[i : i + n]) for i in range(len(pred) - n + 1)]
    grams_r = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
    pool = list(grams_r)
    overlap = 0
    for g in grams_p:
        if g in pool:
            pool.remove(g)
            overlap += 1
    return prf_oracle(overlap, len(grams_p), len(grams_r))


def is_subsequence(sub, seq):
    it = iter(seq)
    return all(any(x == y for y in it) for x in sub)


def lcs_oracle(a, b):
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    for k in range(len(short), 0, -1):
        for idx in itertools.combinations(range(len(short)), k):
            if is_subsequence([short[i] for i in idx], long_):
                return k
    return 0


def ranks_oracle(xs):
    return [sum(1 for y in xs if y < x) + (sum(1 for y in xs if y == x) + 1) / 2 for x in xs]


def spearman_oracle(x, y):
    return statistics.correlation(ranks_oracle(x), ranks_oracle(y))


TOKS = st.lists(st.sampled_from("abcde"), max_size=9)

# --- ROUGE -----------------------------------------------------------------


def test_rouge_examples():
    assert rouge_n(list("abc"), list("abc"), 1) == (100.0, 100.0, 100.0)
    p, r, f = rouge_n("a c d".split(), "a b c".split(), 1)
    assert (round(p, 1), round(r, 1), round(f, 1)) == (66.7, 66.7, 66.7)
    assert rouge_n([], list("abc"), 1) == (0.0, 0.0, 0.0)
    assert rouge_n([], [], 2) == (0.0, 0.0, 0.0)
    p, r, f = rouge_l("a b c d".split(), "b d".split())
    assert (p, r, round(f, 1)) == (50.0, 100.0, 66.7)
    assert rouge_l(list("ab"), list("cd")) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        rouge_n(["a"], ["a"], 3)


def test_rouge_clips_repeats():
    p, r, _ = rouge_n(list("aaaa"), list("ab"), 1)
    assert (p, r) == (25.0, 50.0)


@settings(max_examples=300)
@given(TOKS, TOKS)
def test_rouge_matches_oracle(a, b):
    for n in (1, 2):
        assert rouge_n(a, b, n) == pytest.approx(rouge_n_oracle(a, b, n), abs=1e-9)
    assert lcs_length(a, b) == lcs_oracle(a, b)
    assert rouge_l(a, b) == pytest.approx(prf_oracle(lcs_oracle(a, b), len(a), len(b)), abs=1e-9)


@settings(max_examples=300)
@given(TOKS, TOKS)
def test_f1_bounded_by_max_of_p_and_r(a, b):
    for p, r, f in (rouge_n(a, b, 1), rouge_n(a, b, 2), rouge_l(a, b)):
        assert 0 <= f <= max(p, r) + 1e-12 <= 100 + 1e-12


# --- update extraction and UpdateROUGE -------------------------------------


def test_extract_updates_kristensson(by_page):
    inst = by_page["Tom Kristensson"]
    assert extract_updates(inst.source_texts, inst.source_texts) == []
    t = inst.target_texts
    assert extract_updates(t, inst.source_texts) == [t[0], t[3], t[4]]


def test_case_and_whitespace_variants_are_not_updates():
    assert extract_updates(["the  CAT sat."], ["The cat sat."]) == []


def two_update_instance():
    return make_instance(
        ["Base fact one.", "Base fact two."],
        ["Base fact one.", "Base fact two.", "Alpha beta gamma delta.", "Omega psi chi phi."],
    )


def test_update_rouge_half_of_reference():
    inst = two_update_instance()
    scores = update_rouge(inst.source_texts + ["Alpha beta gamma delta."], inst)
    from wikiupdate.metrics import rouge_scores

    p, r, _ = rouge_n("alpha beta gamma delta".split(), "alpha beta gamma delta omega psi chi phi".split(), 1)
    assert (p, r) == (100.0, 50.0)
    assert scores["rouge1"] == pytest.approx(2 * p * r / (p + r))
    assert scores == rouge_scores("Alpha beta gamma delta.", "Alpha beta gamma delta. Omega psi chi phi.")


def test_update_rouge_perfect_and_copy(synth30):
    for inst in synth30:
        assert update_rouge(inst.target_texts, inst) == {"rouge1": 100.0, "rouge2": 100.0, "rougeL": 100.0}
        assert update_rouge(inst.source_texts, inst) == {"rouge1": 0.0, "rouge2": 0.0, "rougeL": 0.0}


def test_update_rouge_without_reference_updates():
    inst = make_instance(["Same one.", "Same two."], ["Same one."])
    assert update_rouge(["Same one."], inst)["rouge1"] == 100.0
    assert update_rouge(["Same one.", "Something new."], inst)["rougeL"] == 0.0


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_appending_source_sentences_never_changes_update_rouge(synth30, data):
    inst = data.draw(st.sampled_from(synth30))
    pred = data.draw(st.lists(st.sampled_from(inst.target_texts + ["Invented words here."]), max_size=6))
    extra = data.draw(st.lists(st.sampled_from(inst.source_texts), max_size=4))
    pos = data.draw(st.integers(0, len(pred)))
    assert update_rouge(pred[:pos] + extra + pred[pos:], inst) == update_rouge(pred, inst)


# --- entity metrics --------------------------------------------------------


def test_entity_metrics_perfect_and_copy(golden_instances, synth30):
    g = GazetteerAnnotator()
    for inst in [*golden_instances, *synth30]:
        perfect = entity_metrics(inst.target_texts, inst, g)
        assert perfect["entity_precision"] == 100.0 and perfect["entity_recall"] == 100.0
        copy = entity_metrics(inst.source_texts, inst, g)
        assert copy == {
            "entity_precision": 0.0,
            "entity_recall": 0.0,
            "entity_recall_updates": 0.0,
            "entity_recall_target": 0.0,
            "unsupported_entity_tokens": 0.0,
        }


def sullivan_case(tmp_path):
    inst = make_instance(
        ["Holli Sullivan is an American politician."],
        ["Holli Sullivan is an American politician.", "Eric Holcomb appointed her in March 2021."],
        evidence=[text_item(0, "Eric Holcomb", "Holcomb appointed Holli Sullivan in March 2021.", targets=["Holli Sullivan"])],
        support={1: (0,)},
        added=("Eric Holcomb",),
    )
    pred = "Eric Holcomb appointed her in January 2020."
    rows = [
        {"instance_id": inst.instance_id, "text": pred,
         "entities": [{"surface": "Eric Holcomb", "start": 0, "end": 2}, {"surface": "January 2020", "start": 5, "end": 7}]},
        {"instance_id": inst.instance_id, "text": inst.target_texts[1],
         "entities": [{"surface": "Eric Holcomb", "start": 0, "end": 2}, {"surface": "March 2021", "start": 5, "end": 7}]},
        {"instance_id": inst.instance_id, "text": inst.target_texts[0],
         "entities": [{"surface": "Holli Sullivan", "start": 0, "end": 2}]},
    ]
    path = tmp_path / "ann.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return inst, pred, FileAnnotator(path)


def test_unsupported_tokens_hand_count(tmp_path):
    inst, pred, ann = sullivan_case(tmp_path)
    m = entity_metrics(inst.source_texts + [pred], inst, ann)
    # "january" and "2020" occur in neither the source nor the evidence
    assert m["unsupported_entity_tokens"] == 2.0
    # predicted bag {eric, holcomb, january, 2020} vs reference {eric, holcomb, march, 2021}
    assert m["entity_precision"] == 50.0 and m["entity_recall"] == 50.0
    # whole target adds {holli, sullivan}
    assert m["entity_recall_target"] == pytest.approx(100 * 2 / 6)


def test_entity_bags_clip(tmp_path):
    inst = make_instance(["Old."], ["Old.", "Paris Paris."])
    pred = "Paris Paris Paris."
    rows = [
        {"instance_id": inst.instance_id, "text": pred, "entities": [{"start": i, "end": i + 1} for i in range(3)]},
        {"instance_id": inst.instance_id, "text": "Paris Paris.", "entities": [{"start": 0, "end": 1}, {"start": 1, "end": 2}]},
        {"instance_id": inst.instance_id, "text": "Old.", "entities": []},
    ]
    path = tmp_path / "a.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    m = entity_metrics(["Old.", pred], inst, FileAnnotator(path))
    assert m["entity_precision"] == pytest.approx(200 / 3) and m["entity_recall"] == 100.0


def test_empty_entity_sides():
    inst = make_instance(["Old."], ["Old.", "nothing named here."])
    g = GazetteerAnnotator()
    m = entity_metrics(["Old.", "also nothing."], inst, g)
    assert m["entity_precision"] == 100.0 and m["entity_recall"] == 100.0  # both bags empty


def test_identity_annotator_precision_equals_update_rouge1_precision(golden_instances, synth30):
    from wikiupdate.baselines import copy_source_plus_evidence
    from wikiupdate.evaluate import split_prediction
    from wikiupdate.text import tokenize

    ident = IdentityAnnotator()
    for inst in [*golden_instances, *synth30]:
        pred = split_prediction(copy_source_plus_evidence(inst), inst.source_texts)
        pu = extract_updates(pred, inst.source_texts)
        ru = extract_updates(inst.target_texts, inst.source_texts)
        p_tokens = [t for s in pu for t in tokenize(s)]
        r_tokens = [t for s in ru for t in tokenize(s)]
        expected = rouge_n(p_tokens, r_tokens, 1)[0]
        assert entity_metrics(pred, inst, ident)["entity_precision"] == pytest.approx(expected, abs=1e-9)


# --- agreement -------------------------------------------------------------


def test_reference_agreement():
    a = {(f"i{k // 4}", k % 4): [k % 3, 7] for k in range(10)}  # 20 pairs
    assert sum(len(v) for v in a.values()) == 20
    assert reference_agreement(a, a) == 100.0
    gold = {k: list(v) for k, v in a.items()}
    dropped = 0
    for k in sorted(gold):
        if dropped < 3:
            gold[k] = gold[k][:1]
            dropped += 1
    assert reference_agreement(a, gold) == 85.0
    assert reference_agreement(a, {}) == 0.0
    assert reference_agreement({}, {}) == 100.0
    assert reference_agreement({}, {0: [1]}) == 0.0


# --- Spearman --------------------------------------------------------------


def test_spearman_examples():
    assert spearman([3, 1, 2], [3, 1, 2]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)
    assert average_ranks([10, 20, 20, 5]) == [2.0, 3.5, 3.5, 1.0]
    assert math.isnan(spearman([1, 1, 1], [1, 2, 3]))
    with pytest.raises(ValueError):
        spearman([1], [1])


VEC = st.lists(st.integers(0, 5), min_size=2, max_size=12)


@settings(max_examples=300)
@given(st.data())
def test_spearman_matches_oracles(data):
    from scipy.stats import spearmanr

    x = data.draw(VEC)
    y = data.draw(st.lists(st.integers(0, 5), min_size=len(x), max_size=len(x)))
    assert average_ranks(x) == ranks_oracle(x)
    rho = spearman(x, y)
    if len(set(x)) == 1 or len(set(y)) == 1:
        assert math.isnan(rho)
        return
    assert rho == pytest.approx(spearman_oracle(x, y), abs=1e-12)
    assert rho == pytest.approx(spearmanr(x, y).statistic, abs=1e-12)
