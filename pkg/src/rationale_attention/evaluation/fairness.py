"""Subgroup AUC bias metrics and their generalized power mean."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from sklearn.metrics import roc_auc_score

from ..errors import DegeneratePool
from .records import PredictionRecord

logger = logging.getLogger(__name__)

DEFAULT_POWER = -5.0


def _auc(y: np.ndarray, s: np.ndarray, pool: str) -> float:
    if y.size == 0 or y.all() or not y.any():
        raise DegeneratePool(f"{pool} pool needs both positives and negatives")
    return float(roc_auc_score(y, s))


def subgroup_aucs_from_arrays(y, scores, in_group) -> tuple[float, float, float]:
    y = np.asarray(y, dtype=bool)
    s = np.asarray(scores, dtype=np.float64)
    g = np.asarray(in_group, dtype=bool)
    sub = _auc(y[g], s[g], "subgroup")
    bpsn_pool = (g & ~y) | (~g & y)
    bnsp_pool = (g & y) | (~g & ~y)
    bpsn = _auc(y[bpsn_pool], s[bpsn_pool], "BPSN")
    bnsp = _auc(y[bnsp_pool], s[bnsp_pool], "BNSP")
    return sub, bpsn, bnsp


def _hate_arrays(records: Sequence[PredictionRecord]):
    y = np.array([r.gold_hate == "Hate" for r in records])
    idx = records[0].labels.index("Hate") if records[0].task == "hate" else None
    if idx is None:
        # moral-task dumps carry no hate probability; use 1 - P(NN) as the score
        nn = records[0].labels.index("NN")
        s = np.array([1.0 - r.class_probs[nn] for r in records])
    else:
        s = np.array([r.class_probs[idx] for r in records])
    return y, s


def subgroup_aucs(records: Sequence[PredictionRecord], subgroup: str) -> tuple[float, float, float]:
    """(subgroup AUC, BPSN AUC, BNSP AUC) for one subgroup tag.

    Scores are the hate-class probability; raises `DegeneratePool` when a
    pool lacks one of the classes.
    """
    y, s = _hate_arrays(records)
    g = np.array([subgroup in r.subgroup_tags for r in records])
    return subgroup_aucs_from_arrays(y, s, g)


def default_subgroups(records: Sequence[PredictionRecord]) -> list[str]:
    return sorted({t for r in records for t in r.subgroup_tags})


def per_subgroup_aucs(records: Sequence[PredictionRecord], subgroups: Sequence[str] | None = None
                      ) -> dict[str, tuple[float, float, float]]:
    subgroups = default_subgroups(records) if subgroups is None else subgroups
    out = {}
    for tag in subgroups:
        try:
            out[tag] = subgroup_aucs(records, tag)
        except DegeneratePool as exc:
            logger.warning("skipping subgroup %r: %s", tag, exc)
    return out


def gmb(values: Sequence[float], p: float = DEFAULT_POWER) -> float:
    """Generalized power mean ``(mean(v ** p)) ** (1 / p)``."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("gmb needs at least one value")
    if p == 0:
        raise ValueError("power 0 is not supported")
    if p < 0 and np.any(v == 0):
        raise ValueError("zero AUC with a negative power")
    if np.any(v < 0):
        raise ValueError("AUC values must be non-negative")
    if np.all(v == v[0]):
        return float(v[0])
    return float(np.mean(v ** p) ** (1.0 / p))
