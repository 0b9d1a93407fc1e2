"""Synthetic two-class corpora with planted rationales.

Every Hate instance carries one keyword from a small lexicon; the keyword
(optionally padded into a phrase with label-neutral function words) is
annotated as the rationale. Distractor tokens co-occur with the label at a
configurable rate so that an unsupervised attention layer has a tempting
shortcut.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .corpus import Instance, MoralLabel, RationaleAnnotation


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 2000
    seed: int = 0
    lexicon_size: int = 10
    filler_size: int = 300
    n_distractor_types: int = 3
    # probability that a distractor slot is filled, for Hate / NonHate texts
    distractor_rate: tuple[float, float] = (0.9, 0.1)
    distractor_slots: int = 1
    span_len: int = 1
    n_function_words: int = 0
    min_len: int = 8
    max_len: int = 14


def make_corpus(spec: SyntheticSpec = SyntheticSpec()) -> list[Instance]:
    if spec.span_len > 1 and spec.n_function_words == 0:
        raise ValueError("phrases longer than one token need function words")
    rng = random.Random(spec.seed)
    filler = [f"w{i:03d}" for i in range(spec.filler_size)]
    lexicon = [f"h{i}" for i in range(spec.lexicon_size)]
    distractors = [f"d{i}" for i in range(spec.n_distractor_types)]
    function = [f"f{i:02d}" for i in range(spec.n_function_words)]
    pad = spec.span_len - 1

    out = []
    for i in range(spec.n):
        hate = i % 2 == 0
        words = [(rng.choice(filler), False) for _ in range(rng.randint(spec.min_len, spec.max_len))]
        rate = spec.distractor_rate[0] if hate else spec.distractor_rate[1]
        for _ in range(spec.distractor_slots):
            if rng.random() < rate:
                words.insert(rng.randrange(len(words) + 1), (rng.choice(distractors), False))
        if not hate:
            # same function-word count in both classes
            for _ in range(pad):
                words.insert(rng.randrange(len(words) + 1), (rng.choice(function), False))
        else:
            phrase = [(rng.choice(function), True) for _ in range(pad)]
            phrase.insert(rng.randrange(pad + 1), (rng.choice(lexicon), True))
            at = rng.randrange(len(words) + 1)
            words[at:at] = phrase
        out.append(_instance(f"syn{i:05d}", words, hate))
    return out


def _instance(iid: str, words: list[tuple[str, bool]], hate: bool) -> Instance:
    parts, spans, pos, start = [], [], 0, None
    for word, marked in words:
        if marked and start is None:
            start = pos
        elif not marked and start is not None:
            spans.append((start, pos - 1))
            start = None
        parts.append(word)
        pos += len(word) + 1
    if start is not None:
        spans.append((start, pos - 1))
    text = " ".join(parts)
    if hate:
        ann = RationaleAnnotation(MoralLabel.HN, 1, tuple(spans),
                                  " ".join(text[s:e] for s, e in spans))
    else:
        ann = RationaleAnnotation(MoralLabel.NN, 1, ())
    return Instance(iid, text, "Hate" if hate else "NonHate", (ann,))
