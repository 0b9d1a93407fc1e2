from .agreement import agreement_by_class, weighted_cohen_kappa
from .classification import accuracy, adapted_correct, auroc, f1_from_labels, macro_f1
from .fairness import gmb, per_subgroup_aucs, subgroup_aucs
from .rationale import (
    comprehensiveness,
    extract_model_rationale,
    iou_f1,
    sufficiency,
    token_auprc,
    token_f1,
)
from .records import DumpHeader, PredictionRecord, read_dump, write_dump
from .report import EvalReport, evaluate_dump, format_table

__all__ = [
    "DumpHeader",
    "EvalReport",
    "PredictionRecord",
    "accuracy",
    "adapted_correct",
    "agreement_by_class",
    "auroc",
    "comprehensiveness",
    "evaluate_dump",
    "extract_model_rationale",
    "f1_from_labels",
    "format_table",
    "gmb",
    "iou_f1",
    "macro_f1",
    "per_subgroup_aucs",
    "read_dump",
    "subgroup_aucs",
    "sufficiency",
    "token_auprc",
    "token_f1",
    "weighted_cohen_kappa",
    "write_dump",
]
