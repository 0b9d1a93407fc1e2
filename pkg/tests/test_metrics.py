from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import roc_auc_score

from rationale_attention.errors import (
    DegeneratePool,
    EmptyInput,
    MissingErasedProbs,
    MissingRationaleProbs,
)
from rationale_attention.evaluation import (
    DumpHeader,
    PredictionRecord,
    accuracy,
    adapted_correct,
    auroc,
    comprehensiveness,
    evaluate_dump,
    extract_model_rationale,
    format_table,
    gmb,
    iou_f1,
    macro_f1,
    read_dump,
    subgroup_aucs,
    sufficiency,
    token_auprc,
    token_f1,
    write_dump,
)
from rationale_attention.evaluation.fairness import subgroup_aucs_from_arrays

import oracles


def hate_rec(i, gold, pred, p_hate=None, m=(), h=(), attention=None, tags=()):
    p = p_hate if p_hate is not None else (0.9 if pred == "Hate" else 0.1)
    return PredictionRecord(
        id=f"r{i}", task="hate", gold_hate=gold, gold_moral_set=["NN"], gold_moral_primary="NN",
        prediction=pred, class_probs=[1 - p, p], gold_mask=list(h),
        model_mask=list(m) if m else None, attention=attention, subgroup_tags=list(tags),
    )


def moral_rec(i, gold_set, pred):
    probs = [0.0] * 6
    probs[["NN", "HN", "FN", "PN", "AN", "LN"].index(pred)] = 1.0
    return PredictionRecord(
        id=f"m{i}", task="moral", gold_hate="Hate", gold_moral_set=list(gold_set),
        gold_moral_primary=gold_set[0], prediction=pred, class_probs=probs,
    )


# ---------------------------------------------------------------------------
# classification


@pytest.mark.parametrize("pred,gold,expected", [
    ("HN", {"HN", "PN"}, 1), ("FN", {"HN"}, 0), ("AN", {"AN"}, 1),
])
def test_adapted_correct(pred, gold, expected):
    assert adapted_correct(pred, gold) == expected == oracles.adapted_correct(pred, gold)


def test_macro_f1_extremes():
    recs = [hate_rec(0, "Hate", "Hate"), hate_rec(1, "NonHate", "NonHate")]
    assert macro_f1(recs) == 1.0
    recs = [hate_rec(0, "Hate", "NonHate"), hate_rec(1, "NonHate", "Hate")]
    assert macro_f1(recs) == 0.0


def test_macro_f1_adapted_toy():
    recs = [
        moral_rec(0, ["HN", "PN"], "PN"),  # adapted match on the secondary label
        moral_rec(1, ["HN"], "HN"),
        moral_rec(2, ["FN"], "HN"),
        moral_rec(3, ["NN"], "NN"),
    ]
    gold = oracles.adapted_gold([r.prediction for r in recs], [r.gold_moral_set for r in recs],
                                [r.gold_moral_primary for r in recs])
    assert gold == ["PN", "HN", "FN", "NN"]
    expected = oracles.macro_f1(gold, [r.prediction for r in recs])
    # PN 1, HN 2/3, FN 0, NN 1
    assert expected == float((1 + Fraction(2, 3) + 0 + 1) / 4)
    assert macro_f1(recs) == expected
    assert macro_f1(recs, "strict") == oracles.macro_f1([r.gold_moral_primary for r in recs],
                                                        [r.prediction for r in recs])


def test_macro_f1_empty():
    with pytest.raises(EmptyInput):
        macro_f1([])


def test_accuracy_is_exact_match():
    recs = [moral_rec(0, ["HN", "PN"], "HN"), moral_rec(1, ["HN"], "HN")]
    assert accuracy(recs) == 0.5


def test_auroc_hate_and_moral():
    recs = [hate_rec(i, g, g, p) for i, (g, p) in enumerate([("Hate", 0.8), ("NonHate", 0.3), ("Hate", 0.2)])]
    assert auroc(recs) == roc_auc_score([1, 0, 1], [0.8, 0.3, 0.2])
    assert auroc([hate_rec(0, "Hate", "Hate")]) is None
    recs = [moral_rec(0, ["HN"], "HN"), moral_rec(1, ["FN"], "FN"), moral_rec(2, ["HN", "FN"], "HN")]
    assert auroc(recs) == pytest.approx(np.mean([
        roc_auc_score([1, 0, 1], [1, 0, 1]), roc_auc_score([0, 1, 1], [0, 1, 0])]))


# ---------------------------------------------------------------------------
# plausibility


def test_iou_f1_examples():
    m, h = [0, 1, 1, 1, 0], [0, 0, 1, 1, 1]
    assert oracles.set_iou(m, h) == Fraction(1, 2)
    assert iou_f1([hate_rec(0, "Hate", "Hate", m=m, h=h)]) == 1.0
    assert iou_f1([hate_rec(0, "Hate", "Hate", m=m, h=h)], strict=True) == 0.0
    assert iou_f1([hate_rec(0, "Hate", "Hate", m=[1, 0], h=[0, 1])]) == 0.0
    assert iou_f1([hate_rec(0, "Hate", "Hate", m=[1, 0], h=[1, 0])]) == 1.0


def test_token_f1_examples():
    assert token_f1([hate_rec(0, "Hate", "Hate", m=[1, 1, 0], h=[0, 1, 1])]) == 0.5
    assert token_f1([hate_rec(0, "Hate", "Hate", m=[1, 1], h=[1, 1])]) == 1.0
    empty = PredictionRecord("e", "hate", "Hate", ["NN"], "NN", "Hate", [0.1, 0.9],
                             gold_mask=[1, 0], model_mask=[0, 0])
    assert token_f1([empty]) == 0.0


masks = st.integers(1, 12).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 1), min_size=n, max_size=n),
                        st.lists(st.integers(0, 1), min_size=n, max_size=n)))


@settings(max_examples=200, deadline=None)
@given(st.lists(masks, min_size=1, max_size=8))
def test_plausibility_matches_set_oracle(pairs):
    recs = [hate_rec(i, "Hate", "Hate", m=m, h=h) for i, (m, h) in enumerate(pairs)]
    for r, (m, _) in zip(recs, pairs):
        r.model_mask = list(m)
    assert iou_f1(recs) == oracles.iou_f1(pairs)
    assert token_f1(recs) == oracles.token_f1(pairs)
    assert 0.0 <= token_f1(recs) <= 1.0


def _ap_oracle(labels, scores):
    """Step-wise area under the PR curve for tie-free scores."""
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    hits, total, area = 0, sum(labels), Fraction(0)
    for rank, i in enumerate(order, start=1):
        if labels[i]:
            hits += 1
            area += Fraction(hits, rank) / total
    return float(area)


def test_auprc_examples():
    rec = hate_rec(0, "Hate", "Hate", m=[1, 1, 0, 0], h=[1, 1, 0, 0], attention=[0.4, 0.3, 0.2, 0.1])
    assert token_auprc([rec]) == 1.0
    rec.attention = [0.25] * 4
    assert token_auprc([rec]) == 0.5
    rng = np.random.default_rng(0)
    for _ in range(20):
        labels = rng.integers(0, 2, 20)
        labels[0] = 1
        scores = rng.random(20)
        rec = hate_rec(0, "Hate", "Hate", m=[0] * 20, h=labels.tolist(), attention=scores.tolist())
        assert token_auprc([rec]) == pytest.approx(_ap_oracle(labels.tolist(), scores.tolist()), abs=1e-12)


@pytest.mark.parametrize("a,strategy,k,expected", [
    ([0.25] * 4, "threshold", None, [1, 1, 1, 1]),
    ([0, 1, 0], "threshold", None, [0, 1, 0]),
    ([0.5, 0.3, 0.2], "topk", 2, [1, 1, 0]),
    ([0.2, 0.4, 0.2, 0.2], "topk", 2, [1, 1, 0, 0]),
])
def test_extract_model_rationale(a, strategy, k, expected):
    assert extract_model_rationale(a, strategy, k).tolist() == expected


# ---------------------------------------------------------------------------
# faithfulness


def test_comprehensiveness_and_sufficiency():
    rec = hate_rec(0, "Hate", "Hate", p_hate=0.9, m=[1, 0], h=[1, 0])
    rec.probs_erased = [0.7, 0.3]
    rec.probs_rationale_only = [0.15, 0.85]
    assert comprehensiveness([rec]) == pytest.approx(0.6, abs=1e-15)
    assert sufficiency([rec]) == pytest.approx(0.05, abs=1e-15)
    rec.probs_erased = list(rec.class_probs)
    assert comprehensiveness([rec]) == 0.0


def test_sufficiency_skips_empty_rationale():
    rec = hate_rec(0, "Hate", "Hate", m=[0, 0], h=[1, 0])
    rec.model_mask = [0, 0]
    value, skipped = sufficiency([rec], return_skipped=True)
    assert skipped == 1 and np.isnan(value)


def test_missing_probs():
    rec = hate_rec(0, "Hate", "Hate", m=[1, 0], h=[1, 0])
    with pytest.raises(MissingErasedProbs):
        comprehensiveness([rec])
    with pytest.raises(MissingRationaleProbs):
        sufficiency([rec])


# ---------------------------------------------------------------------------
# fairness


def test_subgroup_aucs_perfect():
    recs = [hate_rec(i, g, g, p, tags=[t]) for i, (g, p, t) in enumerate([
        ("Hate", 0.9, "a"), ("NonHate", 0.1, "a"), ("Hate", 0.8, "b"), ("NonHate", 0.2, "b")])]
    assert subgroup_aucs(recs, "a") == (1.0, 1.0, 1.0)


def test_subgroup_aucs_random():
    rng = np.random.default_rng(7)
    y = rng.integers(0, 2, 2000).astype(bool)
    s = rng.random(2000)
    g = rng.integers(0, 2, 2000).astype(bool)
    for value in subgroup_aucs_from_arrays(y, s, g):
        assert abs(value - 0.5) <= 0.05


def test_subgroup_whole_corpus_equals_global():
    rng = np.random.default_rng(3)
    y = rng.integers(0, 2, 200).astype(bool)
    s = rng.random(200)
    g = np.ones(200, dtype=bool)
    # the background is empty, so only the subgroup AUC is defined
    with pytest.raises(DegeneratePool):
        subgroup_aucs_from_arrays(y, s, g)
    from rationale_attention.evaluation.fairness import _auc

    assert _auc(y[g], s[g], "subgroup") == roc_auc_score(y, s)


def test_degenerate_pool():
    recs = [hate_rec(0, "Hate", "Hate", tags=["a"]), hate_rec(1, "NonHate", "NonHate", tags=["b"])]
    with pytest.raises(DegeneratePool):
        subgroup_aucs(recs, "a")


def test_gmb_examples():
    assert gmb([0.9]) == 0.9
    assert gmb([0.7] * 5) == 0.7
    v = gmb([0.8, 1.0], -5)
    # oracle: v^-5 is the mean of 0.8^-5 and 1
    assert v ** -5 == pytest.approx((0.8 ** -5 + 1) / 2, rel=1e-12)
    assert v == pytest.approx(0.868315, abs=1e-6)
    with pytest.raises(ValueError):
        gmb([0.0, 0.5], -5)
    with pytest.raises(ValueError):
        gmb([])


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=10))
def test_gmb_range(values):
    v = gmb(values)
    assert min(values) - 1e-12 <= v <= max(values) + 1e-12
    assert v <= float(np.mean(values)) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=4, max_size=30), st.integers(0, 2**16))
def test_auroc_invariant_to_monotone_transform(grid, seed):
    scores = [g / 1000 for g in grid]
    y = np.random.default_rng(seed).integers(0, 2, len(scores))
    y[0], y[1] = 0, 1
    recs = [hate_rec(i, "Hate" if t else "NonHate", "Hate", p) for i, (t, p) in enumerate(zip(y, scores))]
    squashed = [hate_rec(i, r.gold_hate, "Hate", p ** 3) for i, (r, p) in enumerate(zip(recs, scores))]
    assert auroc(recs) == pytest.approx(auroc(squashed), abs=1e-12)


# ---------------------------------------------------------------------------
# report


def test_evaluate_dump_round_trip(tmp_path):
    recs = []
    for i in range(8):
        gold = "Hate" if i % 2 else "NonHate"
        rec = hate_rec(i, gold, gold, 0.6 if i % 2 else 0.4, m=[1, 0, 0], h=[1, 0, 0] if i % 2 else [0, 0, 0],
                       attention=[0.5, 0.3, 0.2], tags=["gender:male" if i < 4 else "gender:female"])
        rec.probs_erased = [0.5, 0.5]
        rec.probs_rationale_only = list(rec.class_probs)
        recs.append(rec)
    header = DumpHeader(task="hate", model_kind="birnn_attn")
    write_dump(tmp_path / "d.jsonl", header, recs)
    header2, back = read_dump(tmp_path / "d.jsonl")
    assert back == recs and header2.n == 8
    report = evaluate_dump(back, header2)
    assert report.n_plausibility == 4
    assert report.token_f1 == 1.0 and report.iou_f1 == 1.0
    assert report.sufficiency == 0.0
    assert report.macro_f1 == 1.0
    assert report.gmb_sub == 1.0
    table = format_table(report)
    assert "Token F1" in table and "Macro F1" in table


# ---------------------------------------------------------------------------
# agreement


def test_kappa_edge_cases():
    from rationale_attention.evaluation import weighted_cohen_kappa

    assert weighted_cohen_kappa([0, 1, 2], [0, 1, 2], 6) == 1.0
    assert weighted_cohen_kappa([1, 1], [1, 1], 6) is None
    with pytest.raises(ValueError):
        weighted_cohen_kappa([0, 6], [0, 1], 6)
    with pytest.raises(ValueError):
        weighted_cohen_kappa([], [], 6)


def test_agreement_needs_two_annotators(fixture_corpus):
    from rationale_attention.evaluation import agreement_by_class

    with pytest.raises(ValueError):
        agreement_by_class(fixture_corpus)
