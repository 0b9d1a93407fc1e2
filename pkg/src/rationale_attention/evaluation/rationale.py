"""Plausibility (IoU-F1, Token-F1, AUPRC) and faithfulness (comprehensiveness,
sufficiency) of attention-derived rationales."""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Sequence

import numpy as np
from sklearn.metrics import average_precision_score

from ..errors import MissingErasedProbs, MissingRationaleProbs, NoAttention
from .records import PredictionRecord

logger = logging.getLogger(__name__)

STRATEGIES = ("threshold", "topk")


def extract_model_rationale(a, strategy: str = "threshold", k: int | None = None) -> np.ndarray:
    """Binary model rationale from an attention vector over valid tokens.

    ``threshold`` keeps tokens with at least uniform mass (a_i >= 1/V);
    ``topk`` keeps the k largest, ties going to the lower index.
    """
    a = np.asarray(a, dtype=np.float64)
    out = np.zeros(len(a), dtype=np.int8)
    if len(a) == 0:
        return out
    if strategy == "threshold":
        out[a >= 1.0 / len(a)] = 1
    elif strategy == "topk":
        if k is None or k < 0:
            raise ValueError("topk strategy needs a non-negative k")
        order = np.lexsort((np.arange(len(a)), -a))
        out[order[:k]] = 1
    else:
        raise ValueError(f"unknown rationale strategy {strategy!r}")
    return out


def _masks(rec: PredictionRecord) -> tuple[np.ndarray, np.ndarray]:
    if rec.model_mask is None:
        raise NoAttention(f"record {rec.id!r} has no model rationale")
    m = np.asarray(rec.model_mask, dtype=bool)
    h = np.asarray(rec.gold_mask, dtype=bool)
    if m.shape != h.shape:
        raise ValueError(f"record {rec.id!r}: model and gold masks differ in length")
    return m, h


def iou(m, h) -> float:
    m, h = np.asarray(m, bool), np.asarray(h, bool)
    union = np.sum(m | h)
    return 1.0 if union == 0 else float(np.sum(m & h) / union)


def dice(m, h) -> float:
    m, h = np.asarray(m, bool), np.asarray(h, bool)
    denom = m.sum() + h.sum()
    return 1.0 if denom == 0 else float(2 * np.sum(m & h) / denom)


def iou_f1(records: Sequence[PredictionRecord], threshold: float = 0.5, strict: bool = False) -> float:
    """Fraction of instances whose rationale IoU reaches ``threshold``."""
    if not records:
        return float("nan")
    hits = []
    for rec in records:
        score = iou(*_masks(rec))
        hits.append(score > threshold if strict else score >= threshold)
    return float(Fraction(sum(hits), len(hits)))


def _dice_fraction(m: np.ndarray, h: np.ndarray) -> Fraction:
    denom = int(m.sum() + h.sum())
    return Fraction(1) if denom == 0 else Fraction(2 * int(np.sum(m & h)), denom)


def token_f1(records: Sequence[PredictionRecord]) -> float:
    """Mean per-instance Dice, summed exactly and rounded once."""
    if not records:
        return float("nan")
    return float(sum(_dice_fraction(*_masks(rec)) for rec in records) / len(records))


def token_auprc(records: Sequence[PredictionRecord]) -> float | None:
    """Average precision of attention scores against gold tokens, pooled."""
    scores, labels = [], []
    for rec in records:
        if rec.attention is None:
            raise NoAttention(f"record {rec.id!r} has no attention")
        scores.extend(rec.attention)
        labels.extend(rec.gold_mask)
    labels = np.asarray(labels, dtype=bool)
    if not labels.any():
        return None
    return float(average_precision_score(labels, np.asarray(scores, dtype=np.float64)))


def comprehensiveness(records: Sequence[PredictionRecord]) -> float:
    """Mean drop in predicted-class probability after erasing the rationale."""
    drops = []
    for rec in records:
        if rec.probs_erased is None:
            raise MissingErasedProbs(f"record {rec.id!r} lacks probs_erased")
        j = rec.pred_index
        drops.append(rec.class_probs[j] - rec.probs_erased[j])
    return float(np.mean(drops)) if drops else float("nan")


def sufficiency(records: Sequence[PredictionRecord], return_skipped: bool = False):
    """Mean drop in predicted-class probability when only the rationale is kept.

    Instances with an empty model rationale are skipped; with
    ``return_skipped`` the result is ``(value, n_skipped)``.
    """
    drops, skipped = [], 0
    for rec in records:
        if rec.model_mask is not None and not any(rec.model_mask):
            skipped += 1
            continue
        if rec.probs_rationale_only is None:
            raise MissingRationaleProbs(f"record {rec.id!r} lacks probs_rationale_only")
        j = rec.pred_index
        drops.append(rec.class_probs[j] - rec.probs_rationale_only[j])
    if skipped:
        logger.info("sufficiency skipped %d instance(s) with empty rationales", skipped)
    value = float(np.mean(drops)) if drops else float("nan")
    return (value, skipped) if return_skipped else value
