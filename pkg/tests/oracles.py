"""Brute-force reference computations used by the tests.

Everything here works on plain Python sets, lists and fractions so that it
shares no code path with the package.
"""

from fractions import Fraction
from itertools import product


def set_iou(m, h):
    ms = {i for i, v in enumerate(m) if v}
    hs = {i for i, v in enumerate(h) if v}
    union = ms | hs
    return Fraction(1) if not union else Fraction(len(ms & hs), len(union))


def set_dice(m, h):
    ms = {i for i, v in enumerate(m) if v}
    hs = {i for i, v in enumerate(h) if v}
    if not ms and not hs:
        return Fraction(1)
    return Fraction(2 * len(ms & hs), len(ms) + len(hs))


def iou_f1(pairs, threshold=Fraction(1, 2), strict=False):
    hits = [(set_iou(m, h) > threshold) if strict else (set_iou(m, h) >= threshold) for m, h in pairs]
    return float(Fraction(sum(hits), len(hits)))


def token_f1(pairs):
    return float(sum(set_dice(m, h) for m, h in pairs) / len(pairs))


def adapted_correct(pred, gold_set):
    return 1 if any(pred == g for g in gold_set) else 0


def macro_f1(gold, pred, ignore=()):
    """Confusion-matrix macro F1 over classes seen in gold or predictions."""
    labels = sorted(set(gold) | set(pred), key=str)
    confusion = {(a, b): 0 for a, b in product(labels, labels)}
    for g, p in zip(gold, pred):
        confusion[(g, p)] += 1
    scores = []
    for c in labels:
        if c in ignore:
            continue
        tp = confusion[(c, c)]
        fp = sum(confusion[(o, c)] for o in labels if o != c)
        fn = sum(confusion[(c, o)] for o in labels if o != c)
        scores.append(Fraction(2 * tp, 2 * tp + fp + fn) if (2 * tp + fp + fn) else Fraction(0))
    return float(sum(scores) / len(scores)) if scores else 0.0


def adapted_gold(preds, gold_sets, primaries):
    return [p if adapted_correct(p, gs) else prim for p, gs, prim in zip(preds, gold_sets, primaries)]
