"""Input checks shared by the estimator front end."""

from __future__ import annotations

from typing import Sequence

from .corpus import HATE_LABELS, MORAL_LABELS, Instance, MoralLabel, RationaleAnnotation

Span = tuple[int, int]


def check_task(task: str) -> tuple[str, ...]:
    if task == "hate":
        return HATE_LABELS
    if task == "moral":
        return MORAL_LABELS
    raise ValueError(f"task must be 'hate' or 'moral', got {task!r}")


def check_texts(X) -> list:
    """Accept a sequence of strings or of Instance objects, not a mix."""
    if isinstance(X, (str, bytes)):
        raise TypeError("X must be a sequence of texts, not a single string")
    try:
        items = list(X)
    except TypeError:
        raise TypeError(f"X must be iterable, got {type(X).__name__}") from None
    if not items:
        raise ValueError("X is empty")
    if all(isinstance(x, Instance) for x in items):
        return items
    if all(isinstance(x, str) for x in items):
        return items
    raise TypeError("X must contain only str or only Instance items")


def check_labels(y, n: int, labels: Sequence[str]) -> list[str]:
    y = list(y)
    if len(y) != n:
        raise ValueError(f"X has {n} items but y has {len(y)}")
    bad = sorted({str(v) for v in y if v not in labels})
    if bad:
        raise ValueError(f"unknown labels {bad}; expected a subset of {list(labels)}")
    return y


def check_spans(spans: Sequence[Span], text: str) -> tuple[Span, ...]:
    out = []
    for s in spans:
        if len(s) != 2:
            raise ValueError(f"span {s!r} is not a (start, end) pair")
        start, end = int(s[0]), int(s[1])
        if not 0 <= start < end <= len(text):
            raise ValueError(f"span {s!r} out of range for a text of length {len(text)}")
        out.append((start, end))
    return tuple(sorted(out))


def as_instances(X, y=None, rationales=None, task: str = "hate") -> list[Instance]:
    """Wrap raw texts as Instance objects; Instance input passes through."""
    labels = check_task(task)
    items = check_texts(X)
    if isinstance(items[0], Instance):
        if y is not None or rationales is not None:
            raise ValueError("y and rationales must be omitted when X holds Instance objects")
        return items
    if y is None:
        y = [labels[0]] * len(items)
    y = check_labels(y, len(items), labels)
    if rationales is None:
        rationales = [()] * len(items)
    rationales = list(rationales)
    if len(rationales) != len(items):
        raise ValueError("rationales must align with X")

    out = []
    for i, (text, label, spans) in enumerate(zip(items, y, rationales)):
        spans = check_spans(spans or (), text)
        if task == "hate":
            moral = MoralLabel.HN if spans else MoralLabel.NN
            hate = label
        else:
            moral = MoralLabel(label)
            hate = HATE_LABELS[0]
        if moral is MoralLabel.NN:
            spans = ()
        rationale_text = " ".join(text[s:e] for s, e in spans)
        ann = RationaleAnnotation(moral, 1, spans, rationale_text)
        out.append(Instance(f"x{i}", text, hate, (ann,)))
    return out
