"""Quadratic weighted Cohen's kappa between two annotators."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..corpus import MORAL_LABELS, Instance

logger = logging.getLogger(__name__)

# agreement classes are the salience slots of the moral annotation
CLASS_SLOTS = {"A": 1, "B": 2, "C": 3}


def quadratic_weights(k: int) -> np.ndarray:
    """Agreement weights ``w_ij = 1 - (i - j)^2 / (k - 1)^2``."""
    i, j = np.indices((k, k))
    return 1.0 - (i - j) ** 2 / (k - 1) ** 2


def weighted_cohen_kappa(labels_a: Sequence[int], labels_b: Sequence[int], k: int) -> float | None:
    """Quadratic weighted kappa over ordinal labels ``0..k-1``.

    The ratio is taken over disagreement weights ``1 - w_ij`` so that perfect
    agreement gives exactly 1. Returns None when the chance-disagreement
    term vanishes (degenerate marginals).
    """
    a = np.asarray(labels_a, dtype=np.int64)
    b = np.asarray(labels_b, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label vectors must be one-dimensional and of equal length")
    if a.size == 0:
        raise ValueError("kappa of empty label vectors")
    if k < 2:
        return None
    if a.min() < 0 or b.min() < 0 or a.max() >= k or b.max() >= k:
        raise ValueError(f"labels must lie in 0..{k - 1}")

    observed = np.zeros((k, k), dtype=np.float64)
    np.add.at(observed, (a, b), 1.0)
    observed /= a.size
    expected = np.outer(observed.sum(1), observed.sum(0))
    disagreement = 1.0 - quadratic_weights(k)
    denom = float(np.sum(disagreement * expected))
    if denom == 0.0:
        logger.warning("degenerate marginals: kappa undefined")
        return None
    return 1.0 - float(np.sum(disagreement * observed)) / denom


def slot_labels(instances: Sequence[Instance], annotator_a: str, annotator_b: str,
                slot: int) -> tuple[list[int], list[int]]:
    """Paired label codes for one salience slot; pairs with a missing slot drop out."""
    out_a, out_b = [], []
    for inst in instances:
        anns = inst.all_annotators or {}
        if annotator_a not in anns or annotator_b not in anns:
            continue
        la = next((x.label.value for x in anns[annotator_a] if x.order == slot), None)
        lb = next((x.label.value for x in anns[annotator_b] if x.order == slot), None)
        if la is None or lb is None:
            continue
        out_a.append(MORAL_LABELS.index(la))
        out_b.append(MORAL_LABELS.index(lb))
    return out_a, out_b


def annotators_of(instances: Sequence[Instance]) -> list[str]:
    names = []
    for inst in instances:
        for name in inst.all_annotators or {}:
            if name not in names:
                names.append(name)
    return names


def agreement_by_class(instances: Sequence[Instance], annotators: Sequence[str] | None = None,
                       k: int = len(MORAL_LABELS), classes: Sequence[str] = ("A", "B", "C")
                       ) -> dict[str, float | None]:
    names = list(annotators) if annotators else annotators_of(instances)
    if len(names) < 2:
        raise ValueError("agreement needs at least two annotators")
    result = {}
    for cls in classes:
        a, b = slot_labels(instances, names[0], names[1], CLASS_SLOTS[cls])
        result[cls] = weighted_cohen_kappa(a, b, k) if a else None
    return result
