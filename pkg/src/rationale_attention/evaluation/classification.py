"""Classification metrics: adapted correctness, macro F1, accuracy, AUROC."""

from __future__ import annotations

from fractions import Fraction
from typing import Hashable, Sequence

import numpy as np
from sklearn.metrics import roc_auc_score

from ..errors import EmptyInput
from .records import PredictionRecord

# placeholder prediction for responses that could not be parsed
INVALID = "<invalid>"


def adapted_correct(pred, gold_set) -> int:
    """1 if the single predicted label belongs to the gold label set."""
    return int(pred in set(gold_set))


def f1_from_labels(y_true: Sequence[Hashable], y_pred: Sequence[Hashable],
                   ignore: Sequence[Hashable] = (INVALID,)) -> float:
    """Unweighted mean of one-vs-rest F1 over classes seen in either sequence.

    Classes listed in ``ignore`` still generate false negatives for the gold
    class but are never averaged over themselves. Per-class scores are exact
    fractions, so the result does not depend on summation order.
    """
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred differ in length")
    if not len(y_true):
        raise EmptyInput("macro F1 of an empty set")
    classes = sorted({*y_true, *y_pred} - set(ignore), key=str)
    scores = []
    for c in classes:
        tp = sum(t == c and p == c for t, p in zip(y_true, y_pred))
        fp = sum(t != c and p == c for t, p in zip(y_true, y_pred))
        fn = sum(t == c and p != c for t, p in zip(y_true, y_pred))
        denom = 2 * tp + fp + fn
        scores.append(Fraction(2 * tp, denom) if denom else Fraction(0))
    return float(sum(scores) / len(scores)) if scores else 0.0


def adapted_targets(preds: Sequence[str], gold_sets: Sequence, primaries: Sequence[str]) -> list[str]:
    """Effective gold labels under adapted scoring.

    A prediction inside the gold set is its own target (a TP for that
    class); otherwise the primary gold label is the target, giving an FP for
    the predicted class and an FN for the primary label.
    """
    return [p if p in set(g) else prim for p, g, prim in zip(preds, gold_sets, primaries)]


def macro_f1(records: Sequence[PredictionRecord], mode: str | None = None) -> float:
    """Macro F1; ``mode`` defaults to strict for hate, adapted for moral."""
    if not records:
        raise EmptyInput("macro F1 of an empty set")
    if mode is None:
        mode = "adapted" if records[0].task == "moral" else "strict"
    preds = [r.prediction for r in records]
    if mode == "strict":
        gold = [r.gold for r in records]
    elif mode == "adapted":
        gold = adapted_targets(preds, [r.gold_set for r in records], [r.gold for r in records])
    else:
        raise ValueError(f"unknown macro F1 mode {mode!r}")
    return f1_from_labels(gold, preds)


def accuracy(records: Sequence[PredictionRecord]) -> float:
    """Exact-match accuracy: the predicted label set equals the gold set."""
    if not records:
        raise EmptyInput("accuracy of an empty set")
    return float(np.mean([frozenset([r.prediction]) == r.gold_set for r in records]))


def auroc(records: Sequence[PredictionRecord]) -> float | None:
    """Hate: AUROC of the Hate probability. Moral: macro one-vs-rest AUROC,
    where a class is positive for an instance if it is in the gold set.
    Classes lacking positives or negatives are left out; None if none remain.
    """
    if not records:
        raise EmptyInput("AUROC of an empty set")
    labels = records[0].labels
    probs = np.array([r.class_probs for r in records], dtype=np.float64)
    if records[0].task == "hate":
        y = np.array([r.gold_hate == "Hate" for r in records])
        if y.all() or not y.any():
            return None
        return float(roc_auc_score(y, probs[:, labels.index("Hate")]))
    scores = []
    for j, c in enumerate(labels):
        y = np.array([c in r.gold_set for r in records])
        if y.all() or not y.any():
            continue
        scores.append(roc_auc_score(y, probs[:, j]))
    return float(np.mean(scores)) if scores else None
