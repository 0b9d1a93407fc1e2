"""Prediction dump records and their JSONL serialization.

A dump is a JSONL file whose first line is a header object
(``{"type": "header", ...}``) followed by one `PredictionRecord` per line.
Token-level vectors (attention, masks) cover content tokens only; special
and pad positions are dropped before writing.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from ..corpus import HATE_LABELS, MORAL_LABELS


def label_names(task: str) -> tuple[str, ...]:
    if task == "hate":
        return HATE_LABELS
    if task == "moral":
        return MORAL_LABELS
    raise ValueError(f"unknown task {task!r}")


@dataclass
class PredictionRecord:
    id: str
    task: str
    gold_hate: str
    gold_moral_set: list[str]
    gold_moral_primary: str
    prediction: str
    class_probs: list[float]
    gold_mask: list[int] = field(default_factory=list)
    attention: list[float] | None = None
    model_mask: list[int] | None = None
    probs_erased: list[float] | None = None
    probs_rationale_only: list[float] | None = None
    subgroup_tags: list[str] = field(default_factory=list)
    tokens: list[str] | None = None
    logits: list[float] | None = None

    @property
    def labels(self) -> tuple[str, ...]:
        return label_names(self.task)

    @property
    def pred_index(self) -> int:
        return self.labels.index(self.prediction)

    @property
    def gold(self) -> str:
        """Primary gold label for the record's task."""
        return self.gold_hate if self.task == "hate" else self.gold_moral_primary

    @property
    def gold_set(self) -> frozenset[str]:
        return frozenset([self.gold_hate]) if self.task == "hate" else frozenset(self.gold_moral_set)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionRecord":
        d = dict(d)
        d.pop("type", None)
        return cls(**d)


@dataclass
class DumpHeader:
    task: str
    model_kind: str | None = None
    rationale_strategy: str = "threshold"
    top_k: int | None = None
    erasure: str = "delete"
    n: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["type"] = "header"
        d["label_names"] = list(label_names(self.task))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DumpHeader":
        d = {k: v for k, v in d.items() if k not in ("type", "label_names")}
        return cls(**d)


def write_dump(path, header: DumpHeader, records: Iterable[PredictionRecord]) -> None:
    records = list(records)
    header.n = len(records)
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header.to_dict(), ensure_ascii=False) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")


def read_dump(path) -> tuple[DumpHeader, list[PredictionRecord]]:
    header = None
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("type") == "header":
                header = DumpHeader.from_dict(obj)
            else:
                records.append(PredictionRecord.from_dict(obj))
    if header is None:
        task = records[0].task if records else "hate"
        header = DumpHeader(task=task, n=len(records))
    return header, records
