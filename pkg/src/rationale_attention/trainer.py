"""Fine-tuning loop for the joint objective, prediction dumps and checkpoints."""

from __future__ import annotations

import copy
import json
import logging
import random
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .corpus import HATE_LABELS, MORAL_LABELS, DatasetSplit, Instance
from .errors import ConfigError, NonFiniteLoss
from .evaluation.classification import macro_f1
from .evaluation.rationale import extract_model_rationale
from .evaluation.records import DumpHeader, PredictionRecord
from .models import ModelConfig, TokenClassifier, build_model, load_checkpoint, save_checkpoint
from .objective import TASKS, joint_loss
from .span_align import HFTokenizer, TokenizedText, WordTokenizer, instance_mask, tokenize_with_offsets

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Training hyperparameters. Defaults follow the reference fine-tuning setup."""

    batch_size: int = 16
    lr: float = 2e-5
    max_len: int = 128
    epochs: int = 20
    alpha: float = 0.001
    weight_decay: float = 0.01
    seed: int = 0
    task: str = "hate"
    model_kind: str = "birnn_attn"
    encoder_id: str | None = None
    embed_dim: int = 100
    rnn_hidden: int = 128
    cnn_filters: int = 100
    min_freq: int = 1
    grad_clip: float | None = 1.0
    alignment_target: str = "normalized"
    use_alignment: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("batch_size", "max_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.epochs < 0 or self.alpha < 0 or self.weight_decay < 0:
            raise ConfigError("epochs, alpha and weight_decay must be non-negative")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        if self.alignment_target not in ("normalized", "binary"):
            raise ConfigError("alignment_target must be 'normalized' or 'binary'")

    @property
    def num_classes(self) -> int:
        return len(HATE_LABELS) if self.task == "hate" else len(MORAL_LABELS)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class History:
    seed: int
    epochs: list[dict] = field(default_factory=list)
    steps: list[dict] = field(default_factory=list)
    best_epoch: int | None = None

    def write_jsonl(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for row in self.epochs:
                fh.write(json.dumps({**row, "seed": self.seed}) + "\n")

    def write_steps(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for row in self.steps:
                fh.write(json.dumps(row) + "\n")


@dataclass
class Encoded:
    instances: list[Instance]
    tokenized: list[TokenizedText]
    input_ids: torch.Tensor
    attention_mask: torch.Tensor
    validity: torch.Tensor
    rationale: torch.Tensor
    labels: torch.Tensor

    def __len__(self):
        return len(self.instances)

    def batch(self, idx) -> dict:
        return {
            "input_ids": self.input_ids[idx],
            "attention_mask": self.attention_mask[idx],
            "validity": self.validity[idx],
        }


def set_global_seed(seed: int) -> None:
    """Seed Python, NumPy and torch generators.

    Runs with the same seed on the same machine and torch build reproduce
    bit-for-bit on CPU; nothing is promised across platforms or devices.
    """
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def target_label(inst: Instance, task: str) -> int:
    if task == "hate":
        return HATE_LABELS.index(inst.hate_label)
    return MORAL_LABELS.index(inst.primary_moral)


def encode_instances(instances: Sequence[Instance], tokenizer, task: str, max_len: int) -> Encoded:
    toks, rats, labels = [], [], []
    for inst in instances:
        tok = tokenize_with_offsets(inst.text, tokenizer, max_len)
        mask = instance_mask(inst, tok, task)
        if mask.truncated_rationale:
            logger.debug("rationale of %s partly lost to truncation", inst.id)
        toks.append(tok)
        rats.append(mask.values)
        labels.append(target_label(inst, task))
    n = len(instances)
    ids = torch.tensor([t.token_ids for t in toks], dtype=torch.long).reshape(n, max_len)
    validity = torch.tensor([t.validity for t in toks], dtype=torch.bool).reshape(n, max_len)
    return Encoded(
        instances=list(instances),
        tokenized=toks,
        input_ids=ids,
        attention_mask=ids != tokenizer.pad_id,
        validity=validity,
        rationale=torch.tensor(np.array(rats, dtype=np.int64).reshape(n, max_len)),
        labels=torch.tensor(labels, dtype=torch.long),
    )


def build_tokenizer(config: TrainConfig, texts: Sequence[str]):
    if config.model_kind == "transformer":
        return HFTokenizer.from_pretrained(config.encoder_id)
    return WordTokenizer.fit(texts, min_freq=config.min_freq)


def model_config_for(config: TrainConfig, tokenizer) -> ModelConfig:
    return ModelConfig(
        kind=config.model_kind,
        num_classes=config.num_classes,
        max_len=config.max_len,
        encoder_id=config.encoder_id,
        vocab_size=None if config.model_kind == "transformer" else tokenizer.vocab_size,
        embed_dim=config.embed_dim,
        rnn_hidden=config.rnn_hidden,
        cnn_filters=config.cnn_filters,
        pad_id=tokenizer.pad_id,
    )


@dataclass
class TrainedModel:
    model: TokenClassifier
    tokenizer: object
    config: TrainConfig

    def encode(self, instances: Sequence[Instance]) -> Encoded:
        return encode_instances(instances, self.tokenizer, self.config.task, self.config.max_len)

    def save(self, directory) -> Path:
        directory = Path(directory)
        extra = {"train_config": self.config.to_dict()}
        save_checkpoint(self.model, directory, self.config.seed, extra)
        if isinstance(self.tokenizer, WordTokenizer):
            self.tokenizer.save(directory / "tokenizer.json")
        else:
            self.tokenizer.save(directory / "tokenizer")
        return directory

    @classmethod
    def load(cls, directory) -> "TrainedModel":
        directory = Path(directory)
        model, sidecar = load_checkpoint(directory)
        config = TrainConfig.from_dict(sidecar["train_config"])
        if (directory / "tokenizer.json").exists():
            tokenizer = WordTokenizer.load(directory / "tokenizer.json")
        else:
            tokenizer = HFTokenizer.from_pretrained(str(directory / "tokenizer"))
        return cls(model, tokenizer, config)


def predict_arrays(model: TokenClassifier, enc: Encoded, batch_size: int = 64
                   ) -> tuple[np.ndarray, np.ndarray | None]:
    """Logits (float64) and attention for every encoded instance, in order."""
    model.eval()
    logits, atts = [], []
    with torch.no_grad():
        for start in range(0, len(enc), batch_size):
            idx = slice(start, start + batch_size)
            state = model(**enc.batch(idx))
            logits.append(state.logits.double().numpy())
            if state.attention is not None:
                atts.append(state.attention.double().numpy())
    if not logits:
        return np.zeros((0, model.config.num_classes)), None
    return np.concatenate(logits), (np.concatenate(atts) if atts else None)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(-1, keepdims=True)


def _rebuild(tokenizer, content_ids: list[int], max_len: int) -> tuple[list[int], list[bool]]:
    ids = content_ids[: max_len - 2]
    pad = max_len - 2 - len(ids)
    token_ids = [tokenizer.cls_id] + ids + [tokenizer.sep_id] + [tokenizer.pad_id] * pad
    validity = [False] + [True] * len(ids) + [False] * (1 + pad)
    return token_ids, validity


def _mask_token_id(tokenizer) -> int:
    if isinstance(tokenizer, WordTokenizer):
        return tokenizer.unk_id
    mid = tokenizer.hf.mask_token_id
    return mid if mid is not None else tokenizer.hf.unk_token_id


def _probe_probs(model, tokenizer, seqs: list[tuple[list[int], list[bool]]], batch_size: int) -> np.ndarray:
    if not seqs:
        return np.zeros((0, model.config.num_classes))
    ids = torch.tensor([s[0] for s in seqs], dtype=torch.long)
    validity = torch.tensor([s[1] for s in seqs], dtype=torch.bool)
    out = []
    model.eval()
    with torch.no_grad():
        for start in range(0, len(seqs), batch_size):
            sl = slice(start, start + batch_size)
            state = model(input_ids=ids[sl], attention_mask=ids[sl] != tokenizer.pad_id, validity=validity[sl])
            out.append(state.logits.double().numpy())
    return _softmax(np.concatenate(out))


def erasure_inputs(tok: TokenizedText, model_mask: np.ndarray, tokenizer, max_len: int,
                   erasure: str = "delete") -> tuple[tuple, tuple]:
    """Inputs with the rationale removed and with only the rationale kept."""
    valid = np.asarray(tok.validity)
    content = np.asarray(tok.token_ids)[valid]
    m = np.asarray(model_mask, dtype=bool)
    if erasure == "delete":
        return (_rebuild(tokenizer, content[~m].tolist(), max_len),
                _rebuild(tokenizer, content[m].tolist(), max_len))
    if erasure == "substitute":
        mask_id = _mask_token_id(tokenizer)
        erased = np.where(m, mask_id, content).tolist()
        kept = np.where(m, content, mask_id).tolist()
        return _rebuild(tokenizer, erased, max_len), _rebuild(tokenizer, kept, max_len)
    raise ValueError(f"unknown erasure mode {erasure!r}")


def evaluate_checkpoint(
    trained: TrainedModel,
    instances: Sequence[Instance],
    strategy: str = "threshold",
    k: int | None = None,
    erasure: str = "delete",
    faithfulness: bool = True,
    batch_size: int = 64,
) -> tuple[DumpHeader, list[PredictionRecord]]:
    """Predict every instance and assemble prediction-dump records."""
    cfg = trained.config
    header = DumpHeader(task=cfg.task, model_kind=cfg.model_kind, rationale_strategy=strategy,
                        top_k=k, erasure=erasure)
    if not instances:
        return header, []
    enc = trained.encode(instances)
    logits, attention = predict_arrays(trained.model, enc, batch_size)
    probs = _softmax(logits)
    labels = HATE_LABELS if cfg.task == "hate" else MORAL_LABELS

    records = []
    for i, (inst, tok) in enumerate(zip(enc.instances, enc.tokenized)):
        valid = np.asarray(tok.validity)
        rec = PredictionRecord(
            id=inst.id,
            task=cfg.task,
            gold_hate=inst.hate_label,
            gold_moral_set=sorted(inst.moral_set, key=MORAL_LABELS.index),
            gold_moral_primary=inst.primary_moral,
            prediction=labels[int(np.argmax(logits[i]))],
            class_probs=probs[i].tolist(),
            logits=logits[i].tolist(),
            gold_mask=enc.rationale[i].numpy()[valid].astype(int).tolist(),
            subgroup_tags=inst.metadata.subgroup_tags(),
            tokens=[t for t, ok in zip(tok.tokens, tok.validity) if ok],
        )
        if attention is not None:
            att = attention[i][valid]
            rec.attention = att.tolist()
            rec.model_mask = extract_model_rationale(att, strategy, k).astype(int).tolist()
        records.append(rec)

    if faithfulness and attention is not None:
        erased, kept, kept_idx = [], [], []
        for i, (rec, tok) in enumerate(zip(records, enc.tokenized)):
            e, r = erasure_inputs(tok, np.asarray(rec.model_mask), trained.tokenizer, cfg.max_len, erasure)
            erased.append(e)
            if any(rec.model_mask):
                kept.append(r)
                kept_idx.append(i)
        p_erased = _probe_probs(trained.model, trained.tokenizer, erased, batch_size)
        p_kept = _probe_probs(trained.model, trained.tokenizer, kept, batch_size)
        for i, rec in enumerate(records):
            rec.probs_erased = p_erased[i].tolist()
        for j, i in enumerate(kept_idx):
            records[i].probs_rationale_only = p_kept[j].tolist()
    return header, records


def train(
    config: TrainConfig,
    split: DatasetSplit,
    tokenizer=None,
    on_step: Callable[[TokenClassifier, int], None] | None = None,
) -> tuple[TrainedModel, History]:
    """Train with AdamW on the joint objective and keep the best-validation weights."""
    config.validate()
    if not split.train:
        raise ValueError("training split is empty")
    set_global_seed(config.seed)
    if tokenizer is None:
        tokenizer = build_tokenizer(config, [i.text for i in split.train])
    model_cfg = model_config_for(config, tokenizer)
    model = build_model(model_cfg, seed=config.seed)
    trained = TrainedModel(model, tokenizer, config)
    history = History(seed=config.seed)
    if config.epochs == 0:
        return trained, history

    train_enc = trained.encode(split.train)
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    generator = torch.Generator().manual_seed(config.seed)
    best_f1, best_state = -1.0, None
    step = 0

    for epoch in range(1, config.epochs + 1):
        model.train()
        order = torch.randperm(len(train_enc), generator=generator)
        sums = {"ce": 0.0, "aal": 0.0, "loss": 0.0, "gated": 0, "n": 0}
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            idx = order[start:start + config.batch_size]
            state = model(**train_enc.batch(idx))
            out = joint_loss(
                state.logits,
                train_enc.labels[idx],
                state.attention,
                train_enc.rationale[idx],
                train_enc.validity[idx],
                alpha=config.alpha,
                task=config.task,
                target=config.alignment_target,
                use_alignment=config.use_alignment,
            )
            if not torch.isfinite(out.loss):
                raise NonFiniteLoss(batch_id=f"epoch {epoch} batch {b}", value=out.loss.item())
            optimizer.zero_grad()
            out.loss.backward()
            if config.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            optimizer.step()
            step += 1
            if on_step is not None:
                on_step(model, step)

            n, gated = len(idx), int(out.gate.sum())
            sums["ce"] += float(out.ce.sum())
            sums["aal"] += float((out.aal * out.gate).sum())
            sums["loss"] += float(out.total.sum())
            sums["gated"] += gated
            sums["n"] += n
            history.steps.append({
                "step": step,
                "epoch": epoch,
                "ce": float(out.ce.mean()),
                "aal": float((out.aal * out.gate).sum()) / gated if gated else 0.0,
                "gate_rate": gated / n,
                "total": out.loss.item(),
            })

        row = {
            "epoch": epoch,
            "train_ce": sums["ce"] / sums["n"],
            "train_aal": sums["aal"] / sums["gated"] if sums["gated"] else 0.0,
            "train_loss": sums["loss"] / sums["n"],
            "gate_rate": sums["gated"] / sums["n"],
            "val_macro_f1": None,
        }
        if split.validation:
            _, val_records = evaluate_checkpoint(trained, split.validation, faithfulness=False)
            row["val_macro_f1"] = macro_f1(val_records)
            # ties go to the later epoch
            if row["val_macro_f1"] >= best_f1:
                best_f1 = row["val_macro_f1"]
                best_state = copy.deepcopy(model.state_dict())
                history.best_epoch = epoch
        history.epochs.append(row)
        logger.info("epoch %d: %s", epoch, row)

    if best_state is not None:
        model.load_state_dict(best_state)
    else:
        history.best_epoch = config.epochs
    model.eval()
    return trained, history
