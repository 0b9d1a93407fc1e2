"""Full metric battery over a prediction dump."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

from ..errors import MissingErasedProbs, MissingRationaleProbs
from .classification import accuracy, auroc, macro_f1
from .fairness import DEFAULT_POWER, gmb, per_subgroup_aucs
from .rationale import comprehensiveness, iou_f1, sufficiency, token_auprc, token_f1
from .records import DumpHeader, PredictionRecord


@dataclass
class EvalReport:
    task: str
    n: int
    accuracy: float
    macro_f1: float
    macro_f1_mode: str
    auroc: float | None = None
    iou_f1: float | None = None
    token_f1: float | None = None
    auprc: float | None = None
    comprehensiveness: float | None = None
    sufficiency: float | None = None
    sufficiency_skipped: int = 0
    gmb_sub: float | None = None
    gmb_bpsn: float | None = None
    gmb_bnsp: float | None = None
    kappa: float | None = None
    n_plausibility: int = 0
    rationale_strategy: str | None = None
    top_k: int | None = None
    gmb_power: float = DEFAULT_POWER
    subgroups: dict[str, list[float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _none_if_nan(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def evaluate_dump(records: Sequence[PredictionRecord], header: DumpHeader | None = None,
                  mode: str | None = None, subgroups: Sequence[str] | None = None,
                  power: float = DEFAULT_POWER, iou_strict: bool = False) -> EvalReport:
    """Score a dump. Plausibility is computed over records with a gold rationale."""
    if not records:
        raise ValueError("cannot evaluate an empty dump")
    task = records[0].task
    mode = mode or ("adapted" if task == "moral" else "strict")
    report = EvalReport(
        task=task,
        n=len(records),
        accuracy=accuracy(records),
        macro_f1=macro_f1(records, mode),
        macro_f1_mode=mode,
        auroc=auroc(records),
        gmb_power=power,
    )
    if header is not None:
        report.rationale_strategy = header.rationale_strategy
        report.top_k = header.top_k

    has_attention = all(r.attention is not None for r in records)
    if has_attention:
        gold = [r for r in records if any(r.gold_mask)]
        report.n_plausibility = len(gold)
        if gold:
            report.iou_f1 = iou_f1(gold, strict=iou_strict)
            report.token_f1 = token_f1(gold)
            report.auprc = token_auprc(gold)
        try:
            report.comprehensiveness = _none_if_nan(comprehensiveness(records))
        except MissingErasedProbs:
            pass
        try:
            value, skipped = sufficiency(records, return_skipped=True)
            report.sufficiency = _none_if_nan(value)
            report.sufficiency_skipped = skipped
        except MissingRationaleProbs:
            pass

    per_group = per_subgroup_aucs(records, subgroups)
    if per_group:
        report.subgroups = {k: list(v) for k, v in per_group.items()}
        report.gmb_sub = gmb([v[0] for v in per_group.values()], power)
        report.gmb_bpsn = gmb([v[1] for v in per_group.values()], power)
        report.gmb_bnsp = gmb([v[2] for v in per_group.values()], power)
    return report


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.4f}"


def format_table(report: EvalReport, name: str = "model") -> str:
    """Plain-text table grouped into classification, plausibility,
    faithfulness and fairness blocks."""
    blocks = [
        ("Classification", [("Acc.", report.accuracy), ("Macro F1", report.macro_f1), ("AUROC", report.auroc)]),
        ("Plausibility", [("IOU F1", report.iou_f1), ("Token F1", report.token_f1), ("AUPRC", report.auprc)]),
        ("Faithfulness", [("Comp.", report.comprehensiveness), ("Suff.", report.sufficiency)]),
        ("Fairness/Bias (AUC)", [("GMB-Sub.", report.gmb_sub), ("GMB-BPSN.", report.gmb_bpsn),
                                 ("GMB-BNSP.", report.gmb_bnsp)]),
    ]
    width = 10
    top = f"{'':<16}" + "".join(f"{title:<{width * len(cols)}}" for title, cols in blocks)
    mid = f"{'Model':<16}" + "".join(f"{c:<{width}}" for _, cols in blocks for c, _ in cols)
    row = f"{name:<16}" + "".join(f"{_fmt(v):<{width}}" for _, cols in blocks for _, v in cols)
    return "\n".join(line.rstrip() for line in (top, mid, row))
