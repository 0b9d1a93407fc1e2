"""Character-span to token-mask alignment.

Every encoded sequence has the layout ``[CLS] content... [SEP] [PAD]...``
padded to ``max_len``. Special and pad positions carry the sentinel offset
``(0, 0)`` and ``validity = False``; only content tokens can hold rationale
or attention mass.
"""

from __future__ import annotations

import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .corpus import Instance, MoralLabel
from .errors import EmptyRationale, TokenizerError

Span = tuple[int, int]


class OffsetTokenizer(Protocol):
    """Minimal tokenizer surface the aligner relies on."""

    cls_id: int
    sep_id: int
    pad_id: int

    def encode_content(self, text: str) -> tuple[list[int], list[Span]]:
        """Token ids and code-point offsets of the content tokens only."""

    def id_to_token(self, idx: int) -> str: ...


class WordTokenizer:
    """Regex word/punctuation tokenizer with a frequency-built vocabulary.

    Used by the classic baselines. Matching is case-insensitive by default
    (Unicode NFC, then ``str.lower``); offsets refer to the original text.
    """

    PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
    pattern = re.compile(r"\w+|[^\w\s]", re.UNICODE)

    def __init__(self, vocab: Sequence[str] | None = None, lowercase: bool = True):
        self.lowercase = lowercase
        specials = [self.PAD, self.UNK, self.CLS, self.SEP]
        words = [w for w in (vocab or []) if w not in specials]
        self.itos = specials + words
        self.stoi = {w: i for i, w in enumerate(self.itos)}
        self.pad_id, self.unk_id, self.cls_id, self.sep_id = 0, 1, 2, 3

    @property
    def vocab_size(self) -> int:
        return len(self.itos)

    def _norm(self, word: str) -> str:
        word = unicodedata.normalize("NFC", word)
        return word.lower() if self.lowercase else word

    @classmethod
    def fit(cls, texts: Iterable[str], min_freq: int = 1, max_size: int | None = None,
            lowercase: bool = True) -> "WordTokenizer":
        tok = cls(lowercase=lowercase)
        counts = Counter(tok._norm(m.group()) for t in texts for m in cls.pattern.finditer(t))
        words = sorted((w for w, c in counts.items() if c >= min_freq), key=lambda w: (-counts[w], w))
        if max_size is not None:
            words = words[:max_size]
        return cls(words, lowercase=lowercase)

    def encode_content(self, text: str) -> tuple[list[int], list[Span]]:
        ids, offsets = [], []
        for m in self.pattern.finditer(text):
            ids.append(self.stoi.get(self._norm(m.group()), self.unk_id))
            offsets.append((m.start(), m.end()))
        return ids, offsets

    def id_to_token(self, idx: int) -> str:
        return self.itos[idx]

    def to_dict(self) -> dict:
        return {"type": "word", "lowercase": self.lowercase, "vocab": self.itos[4:]}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "WordTokenizer":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data["vocab"], lowercase=data.get("lowercase", True))


class HFTokenizer:
    """Adapter around a HuggingFace *fast* tokenizer (offset mappings needed)."""

    def __init__(self, hf_tokenizer):
        if not getattr(hf_tokenizer, "is_fast", False):
            raise TokenizerError("offset mappings require a fast tokenizer")
        self.hf = hf_tokenizer
        self.cls_id = hf_tokenizer.cls_token_id
        self.sep_id = hf_tokenizer.sep_token_id
        self.pad_id = hf_tokenizer.pad_token_id
        if None in (self.cls_id, self.sep_id, self.pad_id):
            raise TokenizerError("tokenizer lacks CLS/SEP/PAD tokens")

    @classmethod
    def from_pretrained(cls, name_or_path: str) -> "HFTokenizer":
        from transformers import AutoTokenizer

        return cls(AutoTokenizer.from_pretrained(name_or_path, use_fast=True))

    @property
    def vocab_size(self) -> int:
        return len(self.hf)

    def encode_content(self, text: str) -> tuple[list[int], list[Span]]:
        enc = self.hf(text, add_special_tokens=False, return_offsets_mapping=True)
        offsets = enc.get("offset_mapping")
        if offsets is None:
            raise TokenizerError("backend returned no offsets")
        return list(enc["input_ids"]), [tuple(o) for o in offsets]

    def id_to_token(self, idx: int) -> str:
        return self.hf.convert_ids_to_tokens(idx)

    def save(self, path) -> None:
        self.hf.save_pretrained(str(path))


@dataclass
class TokenizedText:
    text: str
    token_ids: list[int]
    offsets: list[Span]
    validity: list[bool]
    tokens: list[str] = field(default_factory=list)
    truncated: bool = False
    # end character of the last content token kept after truncation
    kept_char_end: int = 0

    def __len__(self):
        return len(self.token_ids)

    @property
    def n_valid(self) -> int:
        return int(sum(self.validity))

    def valid_index(self) -> np.ndarray:
        return np.flatnonzero(self.validity)


@dataclass
class RationaleMask:
    values: np.ndarray
    source_label: str | None = None
    truncated_rationale: bool = False

    def __len__(self):
        return len(self.values)

    @property
    def total(self) -> int:
        return int(np.sum(self.values))


def tokenize_with_offsets(text: str, tokenizer: OffsetTokenizer, max_len: int = 128) -> TokenizedText:
    if max_len < 2:
        raise ValueError(f"max_len must be >= 2, got {max_len}")
    ids, offsets = tokenizer.encode_content(text)
    if offsets is None or len(offsets) != len(ids):
        raise TokenizerError("tokenizer did not return one offset per token")
    room = max_len - 2
    truncated = len(ids) > room
    ids, offsets = list(ids[:room]), [tuple(o) for o in offsets[:room]]
    n_pad = room - len(ids)

    token_ids = [tokenizer.cls_id] + ids + [tokenizer.sep_id] + [tokenizer.pad_id] * n_pad
    all_offsets = [(0, 0)] + offsets + [(0, 0)] * (1 + n_pad)
    validity = [False] + [True] * len(ids) + [False] * (1 + n_pad)
    tokens = [tokenizer.id_to_token(i) for i in token_ids]
    return TokenizedText(
        text=text,
        token_ids=token_ids,
        offsets=all_offsets,
        validity=validity,
        tokens=tokens,
        truncated=truncated,
        kept_char_end=offsets[-1][1] if offsets else 0,
    )


def spans_to_mask(tok: TokenizedText, spans: Sequence[Span], source_label: str | None = None) -> RationaleMask:
    """Mark every valid token whose characters overlap a span by at least one."""
    values = np.zeros(len(tok), dtype=np.int8)
    for i, ((ts, te), ok) in enumerate(zip(tok.offsets, tok.validity)):
        if not ok:
            continue
        for s, e in spans:
            if max(s, ts) < min(e, te):
                values[i] = 1
                break
    lost = tok.truncated and any(e > tok.kept_char_end for s, e in spans)
    return RationaleMask(values, source_label, truncated_rationale=lost)


def mask_to_spans(tok: TokenizedText, mask: RationaleMask | Sequence[int]) -> list[Span]:
    values = mask.values if isinstance(mask, RationaleMask) else np.asarray(mask)
    if len(values) != len(tok):
        raise ValueError("mask and tokenization differ in length")
    spans: list[Span] = []
    run: list[int] = []
    for i in range(len(tok) + 1):
        on = i < len(tok) and tok.validity[i] and values[i]
        if on:
            run.append(i)
        elif run:
            spans.append((tok.offsets[run[0]][0], tok.offsets[run[-1]][1]))
            run = []
    return spans


def normalize_mask(mask: RationaleMask | Sequence[int]) -> np.ndarray:
    values = np.asarray(mask.values if isinstance(mask, RationaleMask) else mask, dtype=np.float64)
    total = values.sum()
    if total <= 0:
        raise EmptyRationale("rationale mask has no positive entries")
    return values / total


def instance_mask(inst: Instance, tok: TokenizedText, task: str, target: str | None = None) -> RationaleMask:
    """Gold rationale mask for one instance under a task.

    Hate task: union of the spans of all non-NN annotations. Moral task:
    the spans of the annotation whose label equals ``target`` (defaults to
    the primary label).
    """
    if task == "hate":
        return spans_to_mask(tok, inst.moral_spans(), source_label=None)
    if task != "moral":
        raise ValueError(f"unknown task {task!r}")
    target = target or inst.primary_moral
    ann = inst.annotation_for(target)
    spans = ann.spans if ann is not None and ann.label is not MoralLabel.NN else ()
    return spans_to_mask(tok, spans, source_label=target)
