"""Data model, ingestion, validation, splitting and statistics for
rationale-annotated hate speech corpora.

Character offsets everywhere are Unicode code-point indices into
``Instance.text`` (Python ``str`` indexing), never byte offsets. Spans are
half-open ``[start, end)``.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import SchemaError

logger = logging.getLogger(__name__)


class MoralLabel(str, Enum):
    NN = "NN"  # non-morality
    HN = "HN"  # care / harm
    FN = "FN"  # fairness / cheating
    PN = "PN"  # purity / degradation
    AN = "AN"  # authority / subversion
    LN = "LN"  # loyalty / betrayal


# class-index order used by every classifier head in the moral task
MORAL_LABELS: tuple[str, ...] = tuple(m.value for m in MoralLabel)
HATE_LABELS: tuple[str, ...] = ("NonHate", "Hate")
GENDERS = ("male", "female")
PARTIES = ("left", "right")


@dataclass(frozen=True)
class RationaleAnnotation:
    label: MoralLabel
    order: int
    spans: tuple[tuple[int, int], ...] = ()
    rationale_text: str | None = None

    def to_dict(self) -> dict:
        out = {
            "label": self.label.value,
            "order": self.order,
            "spans": [list(s) for s in self.spans],
        }
        if self.rationale_text is not None:
            out["rationale_text"] = self.rationale_text
        return out


@dataclass(frozen=True)
class Metadata:
    politician_gender: str | None = None
    politician_party: str | None = None
    post_link: str | None = None
    post_summary: str | None = None
    post_themes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {}
        for key in ("politician_gender", "politician_party", "post_link", "post_summary"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.post_themes:
            out["post_themes"] = list(self.post_themes)
        return out

    def subgroup_tags(self) -> list[str]:
        tags = []
        if self.politician_gender:
            tags.append(f"gender:{self.politician_gender}")
        if self.politician_party:
            tags.append(f"party:{self.politician_party}")
        return tags


@dataclass(frozen=True)
class Instance:
    id: str
    text: str
    hate_label: str
    moral_annotations: tuple[RationaleAnnotation, ...]
    all_annotators: dict[str, tuple[RationaleAnnotation, ...]] | None = None
    metadata: Metadata = field(default_factory=Metadata)

    @property
    def is_hate(self) -> bool:
        return self.hate_label == "Hate"

    @property
    def moral_set(self) -> frozenset[str]:
        return frozenset(a.label.value for a in self.moral_annotations)

    @property
    def primary_moral(self) -> str:
        return min(self.moral_annotations, key=lambda a: a.order).label.value

    def annotation_for(self, label: str) -> RationaleAnnotation | None:
        for ann in self.moral_annotations:
            if ann.label.value == label:
                return ann
        return None

    def moral_spans(self) -> list[tuple[int, int]]:
        """Union of the spans of every non-NN annotation."""
        spans = []
        for ann in self.moral_annotations:
            if ann.label is not MoralLabel.NN:
                spans.extend(ann.spans)
        return sorted(spans)

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "text": self.text,
            "hate_label": self.hate_label,
            "moral_annotations": [a.to_dict() for a in self.moral_annotations],
        }
        if self.all_annotators is not None:
            out["all_annotators"] = {
                k: [a.to_dict() for a in v] for k, v in self.all_annotators.items()
            }
        meta = self.metadata.to_dict()
        if meta:
            out["metadata"] = meta
        return out


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


@dataclass
class DatasetSplit:
    train: list[Instance]
    validation: list[Instance]
    test: list[Instance]
    seed: int
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def ids(self) -> tuple[list[str], list[str], list[str]]:
        return (
            [i.id for i in self.train],
            [i.id for i in self.validation],
            [i.id for i in self.test],
        )


@dataclass
class Stats:
    n: int
    hate_counts: dict[str, int]
    moral_counts: dict[str, dict[int, int]]
    rationale_coverage: float
    metadata_marginals: dict[str, dict[str, int]]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "hate_counts": self.hate_counts,
            "moral_counts": {k: {str(r): c for r, c in v.items()} for k, v in self.moral_counts.items()},
            "rationale_coverage": self.rationale_coverage,
            "metadata_marginals": self.metadata_marginals,
        }


# ---------------------------------------------------------------------------
# parsing


def _expect(cond, message, path, line):
    if not cond:
        raise SchemaError(message, line=line, path=path)


def _parse_annotations(raw, path, line) -> tuple[RationaleAnnotation, ...]:
    _expect(isinstance(raw, list), "expected a list of annotations", path, line)
    out = []
    for i, ann in enumerate(raw):
        p = f"{path}[{i}]"
        _expect(isinstance(ann, dict), "expected an object", p, line)
        label = ann.get("label")
        _expect(label in MORAL_LABELS, f"unknown moral label {label!r}", f"{p}.label", line)
        order = ann.get("order")
        _expect(
            isinstance(order, int) and not isinstance(order, bool) and order in (1, 2, 3),
            f"order must be 1, 2 or 3, got {order!r}",
            f"{p}.order",
            line,
        )
        spans_raw = ann.get("spans", [])
        _expect(isinstance(spans_raw, list), "spans must be a list", f"{p}.spans", line)
        spans = []
        for j, s in enumerate(spans_raw):
            ok = (
                isinstance(s, (list, tuple))
                and len(s) == 2
                and all(isinstance(v, int) and not isinstance(v, bool) for v in s)
            )
            _expect(ok, f"span must be [start, end] integers, got {s!r}", f"{p}.spans[{j}]", line)
            spans.append((s[0], s[1]))
        rt = ann.get("rationale_text")
        _expect(rt is None or isinstance(rt, str), "rationale_text must be a string", f"{p}.rationale_text", line)
        out.append(RationaleAnnotation(MoralLabel(label), order, tuple(spans), rt))
    return tuple(out)


def instance_from_dict(record: dict, line: int | None = None) -> Instance:
    """Build an `Instance` from a decoded JSON record, checking field types.

    Semantic invariants are checked separately by `validate_instance`.
    """
    _expect(isinstance(record, dict), "record must be a JSON object", "", line)
    for key in ("id", "text"):
        _expect(isinstance(record.get(key), str), f"missing or non-string {key!r}", key, line)
    hate = record.get("hate_label")
    _expect(hate in HATE_LABELS, f"hate_label must be one of {HATE_LABELS}, got {hate!r}", "hate_label", line)
    _expect("moral_annotations" in record, "missing 'moral_annotations'", "moral_annotations", line)
    anns = _parse_annotations(record["moral_annotations"], "moral_annotations", line)

    all_ann = None
    if record.get("all_annotators") is not None:
        raw = record["all_annotators"]
        _expect(isinstance(raw, dict), "all_annotators must be an object", "all_annotators", line)
        all_ann = {
            str(k): _parse_annotations(v, f"all_annotators.{k}", line) for k, v in raw.items()
        }

    meta_raw = record.get("metadata") or {}
    _expect(isinstance(meta_raw, dict), "metadata must be an object", "metadata", line)
    gender = meta_raw.get("politician_gender")
    _expect(gender is None or gender in GENDERS, f"unknown politician_gender {gender!r}",
            "metadata.politician_gender", line)
    party = meta_raw.get("politician_party")
    _expect(party is None or party in PARTIES, f"unknown politician_party {party!r}",
            "metadata.politician_party", line)
    themes = meta_raw.get("post_themes") or []
    _expect(isinstance(themes, list) and all(isinstance(t, str) for t in themes),
            "post_themes must be a list of strings", "metadata.post_themes", line)
    meta = Metadata(
        politician_gender=gender,
        politician_party=party,
        post_link=meta_raw.get("post_link"),
        post_summary=meta_raw.get("post_summary"),
        post_themes=tuple(themes),
    )
    return Instance(record["id"], record["text"], hate, anns, all_ann, meta)


# ---------------------------------------------------------------------------
# validation


def _annotation_violations(text: str, anns: Sequence[RationaleAnnotation], path: str) -> list[Violation]:
    out = []
    if not anns:
        out.append(Violation(path, "at least one moral annotation is required"))
    if len(anns) > 3:
        out.append(Violation(path, f"at most 3 moral annotations allowed, got {len(anns)}"))
    orders = [a.order for a in anns]
    if len(set(orders)) != len(orders):
        out.append(Violation(path, f"salience orders must be distinct, got {orders}"))
    labels = [a.label for a in anns]
    if len(set(labels)) != len(labels):
        logger.warning("%s: repeated moral label in %s", path, [l.value for l in labels])

    for i, ann in enumerate(anns):
        p = f"{path}[{i}]"
        if ann.order not in (1, 2, 3):
            out.append(Violation(f"{p}.order", f"order must be 1, 2 or 3, got {ann.order}"))
        if ann.label is MoralLabel.NN and ann.spans:
            out.append(Violation(f"{p}.spans", "an NN annotation must not carry rationale spans"))
        if ann.label is not MoralLabel.NN and not ann.spans:
            out.append(Violation(f"{p}.spans", f"a {ann.label.value} annotation needs at least one span"))
        bounds_ok = True
        for j, (start, end) in enumerate(ann.spans):
            if not (0 <= start < end <= len(text)):
                bounds_ok = False
                out.append(Violation(
                    f"{p}.spans[{j}]",
                    f"span ({start}, {end}) is outside the text of length {len(text)} or empty",
                ))
        ordered = sorted(ann.spans)
        for (s0, e0), (s1, e1) in zip(ordered, ordered[1:]):
            if s1 < e0:
                out.append(Violation(f"{p}.spans", f"spans ({s0}, {e0}) and ({s1}, {e1}) overlap"))
        if ann.rationale_text is not None and bounds_ok:
            expected = " ".join(text[s:e] for s, e in ann.spans)
            if ann.rationale_text != expected:
                out.append(Violation(
                    f"{p}.rationale_text",
                    f"rationale_text {ann.rationale_text!r} does not match spans text {expected!r}",
                ))
    return out


def validate_instance(inst: Instance) -> list[Violation]:
    """Return every schema invariant the instance breaks (empty if valid)."""
    out = []
    if not inst.id:
        out.append(Violation("id", "id must be non-empty"))
    if inst.hate_label not in HATE_LABELS:
        out.append(Violation("hate_label", f"unknown hate label {inst.hate_label!r}"))
    out.extend(_annotation_violations(inst.text, inst.moral_annotations, "moral_annotations"))
    for annotator, anns in (inst.all_annotators or {}).items():
        out.extend(_annotation_violations(inst.text, anns, f"all_annotators.{annotator}"))
    return out


# ---------------------------------------------------------------------------
# io


def read_corpus(path) -> tuple[list[Instance], list[SchemaError]]:
    """Parse a JSONL corpus, returning valid instances and per-line errors."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    instances, errors = [], []
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                errors.append(SchemaError(f"invalid JSON: {exc.msg}", line=lineno))
                continue
            try:
                inst = instance_from_dict(record, line=lineno)
            except SchemaError as exc:
                errors.append(exc)
                continue
            violations = validate_instance(inst)
            if inst.id in seen:
                violations.append(Violation("id", f"duplicate id {inst.id!r}"))
            if violations:
                for v in violations:
                    errors.append(SchemaError(v.message, line=lineno, path=v.path))
                continue
            seen.add(inst.id)
            instances.append(inst)
    return instances, errors


class CorpusError(SchemaError):
    """Aggregate of every per-line schema error found in a corpus file."""

    def __init__(self, errors: list[SchemaError]):
        self.errors = errors
        first = errors[0]
        more = f" (+{len(errors) - 1} more)" if len(errors) > 1 else ""
        super().__init__(str(first) + more)
        self.line = first.line
        self.path = first.path


def load_corpus(path, format: str = "jsonl") -> list[Instance]:
    """Load and validate a JSONL corpus.

    Raises `CorpusError` (a `SchemaError`) listing every failing line if any
    record is invalid; use `read_corpus` to keep the valid subset instead.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    instances, errors = read_corpus(path)
    if errors:
        raise CorpusError(errors)
    return instances


def dumps_instance(inst: Instance) -> str:
    return json.dumps(inst.to_dict(), ensure_ascii=False)


def save_corpus(instances: Iterable[Instance], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(dumps_instance(inst) + "\n")


# ---------------------------------------------------------------------------
# splitting and statistics


def _split_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    val = int(round(n * ratios[1]))
    test = int(round(n * ratios[2]))
    return [n - val - test, val, test]


def split_dataset(
    instances: Sequence[Instance],
    ratios: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Deterministic train/validation/test partition stratified by hate label.

    Instances are shuffled within each class, the classes are laid end to end
    and positions are dealt to splits so every prefix stays within one
    instance of the target proportions. Each class therefore lands in every
    split in proportion, up to rounding.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-6:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n = len(instances)
    if n < 10:
        raise ValueError(f"need at least 10 instances to split, got {n}")
    ids = [inst.id for inst in instances]
    if len(set(ids)) != n:
        raise ValueError("instance ids must be unique")

    rng = np.random.default_rng(seed)
    ordered: list[Instance] = []
    for label in sorted({inst.hate_label for inst in instances}):
        members = [inst for inst in instances if inst.hate_label == label]
        perm = rng.permutation(len(members))
        ordered.extend(members[i] for i in perm)

    sizes = _split_sizes(n, ratios)
    buckets: list[list[Instance]] = [[], [], []]
    for i, inst in enumerate(ordered, start=1):
        deficits = [sizes[k] * i / n - len(buckets[k]) for k in range(3)]
        k = int(np.argmax(deficits))
        buckets[k].append(inst)

    for bucket in buckets:
        perm = rng.permutation(len(bucket))
        bucket[:] = [bucket[i] for i in perm]
    return DatasetSplit(buckets[0], buckets[1], buckets[2], seed=seed, ratios=ratios)


def corpus_stats(instances: Sequence[Instance]) -> Stats:
    if not instances:
        raise ValueError("corpus_stats needs at least one instance")
    hate = Counter(inst.hate_label for inst in instances)
    moral: dict[str, Counter] = {}
    covered = total = 0
    for inst in instances:
        for ann in inst.moral_annotations:
            moral.setdefault(ann.label.value, Counter())[ann.order] += 1
            if ann.label is not MoralLabel.NN:
                total += 1
                covered += bool(ann.spans)
    marginals = {
        "politician_gender": Counter(i.metadata.politician_gender for i in instances if i.metadata.politician_gender),
        "politician_party": Counter(i.metadata.politician_party for i in instances if i.metadata.politician_party),
        "post_themes": Counter(t for i in instances for t in i.metadata.post_themes),
    }
    return Stats(
        n=len(instances),
        hate_counts=dict(sorted(hate.items())),
        moral_counts={k: dict(sorted(v.items())) for k, v in sorted(moral.items())},
        rationale_coverage=covered / total if total else 1.0,
        metadata_marginals={k: dict(sorted(v.items())) for k, v in marginals.items()},
    )
