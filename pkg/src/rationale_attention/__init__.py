"""Text classifiers whose attention is supervised with human rationales."""

__version__ = "0.1.0"

from .corpus import (
    HATE_LABELS,
    MORAL_LABELS,
    DatasetSplit,
    Instance,
    Metadata,
    MoralLabel,
    RationaleAnnotation,
    corpus_stats,
    load_corpus,
    read_corpus,
    save_corpus,
    split_dataset,
    validate_instance,
)
from .estimator import RationaleAttentionClassifier
from .objective import attention_alignment_loss, gate, joint_loss, total_loss
from .span_align import HFTokenizer, WordTokenizer, spans_to_mask, tokenize_with_offsets
from .trainer import TrainConfig, TrainedModel, evaluate_checkpoint, train

__all__ = [
    "DatasetSplit",
    "HATE_LABELS",
    "HFTokenizer",
    "Instance",
    "MORAL_LABELS",
    "Metadata",
    "MoralLabel",
    "RationaleAnnotation",
    "RationaleAttentionClassifier",
    "TrainConfig",
    "TrainedModel",
    "WordTokenizer",
    "attention_alignment_loss",
    "corpus_stats",
    "evaluate_checkpoint",
    "gate",
    "joint_loss",
    "load_corpus",
    "read_corpus",
    "save_corpus",
    "spans_to_mask",
    "split_dataset",
    "tokenize_with_offsets",
    "total_loss",
    "train",
    "validate_instance",
]
