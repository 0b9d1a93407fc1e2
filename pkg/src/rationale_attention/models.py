"""Classifier backends exposing a per-token attention distribution.

All models take a batch dict with ``input_ids``, ``attention_mask`` (non-pad
positions, specials included) and ``validity`` (content tokens only), each of
shape ``(batch, length)``, and return a `ModelState` of tensors.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import BackendError, ConfigError, NoAttention, ShapeError

logger = logging.getLogger(__name__)

KINDS = ("transformer", "bow", "cnn", "birnn_max", "birnn_attn")
ATTENTION_KINDS = ("transformer", "birnn_attn")
# below this much valid mass the distribution is replaced by uniform
DEGENERATE_MASS = 1e-8


@dataclass
class ModelConfig:
    kind: str = "birnn_attn"
    num_classes: int = 2
    max_len: int = 128
    hidden_dim: int = 256
    encoder_id: str | None = None
    vocab_size: int | None = None
    embed_dim: int = 100
    rnn_hidden: int = 128
    cnn_widths: tuple[int, ...] = (3, 4, 5)
    cnn_filters: int = 100
    pad_id: int = 0

    def __post_init__(self):
        self.cnn_widths = tuple(self.cnn_widths)
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.num_classes not in (2, 6):
            raise ConfigError(f"num_classes must be 2 or 6, got {self.num_classes}")
        if self.max_len < 2:
            raise ConfigError(f"max_len must be >= 2, got {self.max_len}")
        if self.kind == "transformer" and not self.encoder_id:
            raise ConfigError("transformer kind needs an encoder_id")
        if self.kind != "transformer" and not self.vocab_size:
            raise ConfigError(f"{self.kind} needs vocab_size")

    @property
    def has_attention(self) -> bool:
        return self.kind in ATTENTION_KINDS

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cnn_widths"] = list(self.cnn_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class ModelState:
    logits: torch.Tensor
    hidden: torch.Tensor
    attention: torch.Tensor | None = None
    # backend-specific extras, e.g. per-head last-layer attention
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass
class ForwardOutput:
    logits: np.ndarray
    probs: np.ndarray
    prediction: int
    hidden_cls: np.ndarray
    attention: np.ndarray | None


def masked_renormalize(weights: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
    """Zero invalid positions and rescale rows to sum to one.

    Rows whose valid mass is at most `DEGENERATE_MASS` fall back to the
    uniform distribution over valid tokens; rows with no valid tokens stay
    all-zero.
    """
    valid_f = valid.to(weights.dtype)
    kept = weights * valid_f
    mass = kept.sum(-1, keepdim=True)
    n_valid = valid_f.sum(-1, keepdim=True)
    degenerate = mass <= DEGENERATE_MASS
    if bool(degenerate.any()):
        logger.warning("attention mass on valid tokens vanished for %d row(s); using uniform",
                       int(degenerate.sum()))
    uniform = valid_f / n_valid.clamp_min(1.0)
    safe_mass = torch.where(degenerate, torch.ones_like(mass), mass)
    return torch.where(degenerate, uniform, kept / safe_mass)


def masked_softmax(scores: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
    neg = torch.finfo(scores.dtype).min
    masked = scores.masked_fill(~valid, neg)
    probs = torch.softmax(masked, dim=-1) * valid.to(scores.dtype)
    total = probs.sum(-1, keepdim=True)
    return probs / torch.where(total > 0, total, torch.ones_like(total))


class TokenClassifier(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config

    @property
    def has_attention(self) -> bool:
        return self.config.has_attention


class BagOfWords(TokenClassifier):
    def __init__(self, config):
        super().__init__(config)
        self.embedding = nn.Embedding(config.vocab_size, config.embed_dim, padding_idx=config.pad_id)
        self.head = nn.Linear(config.embed_dim, config.num_classes)

    def forward(self, input_ids, attention_mask, validity):
        emb = self.embedding(input_ids)
        w = validity.to(emb.dtype).unsqueeze(-1)
        pooled = (emb * w).sum(1) / w.sum(1).clamp_min(1.0)
        return ModelState(self.head(pooled), pooled)


class CNNClassifier(TokenClassifier):
    def __init__(self, config):
        super().__init__(config)
        self.embedding = nn.Embedding(config.vocab_size, config.embed_dim, padding_idx=config.pad_id)
        self.convs = nn.ModuleList(
            nn.Conv1d(config.embed_dim, config.cnn_filters, w) for w in config.cnn_widths
        )
        self.head = nn.Linear(config.cnn_filters * len(config.cnn_widths), config.num_classes)

    def forward(self, input_ids, attention_mask, validity):
        emb = self.embedding(input_ids) * validity.unsqueeze(-1).to(self.embedding.weight.dtype)
        x = emb.transpose(1, 2)
        widest = max(self.config.cnn_widths)
        if x.shape[-1] < widest:
            x = F.pad(x, (0, widest - x.shape[-1]))
        pooled = torch.cat([F.relu(conv(x)).amax(-1) for conv in self.convs], dim=-1)
        return ModelState(self.head(pooled), pooled)


class BiRNNClassifier(TokenClassifier):
    """Single-layer bidirectional LSTM with max pooling or additive attention."""

    def __init__(self, config):
        super().__init__(config)
        self.pooling = "attention" if config.kind == "birnn_attn" else "max"
        self.embedding = nn.Embedding(config.vocab_size, config.embed_dim, padding_idx=config.pad_id)
        self.rnn = nn.LSTM(config.embed_dim, config.rnn_hidden, batch_first=True, bidirectional=True)
        out_dim = 2 * config.rnn_hidden
        if self.pooling == "attention":
            self.att_proj = nn.Linear(out_dim, out_dim)
            self.att_vector = nn.Linear(out_dim, 1, bias=False)
        self.head = nn.Linear(out_dim, config.num_classes)

    def forward(self, input_ids, attention_mask, validity):
        emb = self.embedding(input_ids)
        lengths = attention_mask.sum(1).clamp_min(1).cpu()
        packed = nn.utils.rnn.pack_padded_sequence(emb, lengths, batch_first=True, enforce_sorted=False)
        out, _ = self.rnn(packed)
        states, _ = nn.utils.rnn.pad_packed_sequence(out, batch_first=True, total_length=input_ids.shape[1])

        if self.pooling == "max":
            neg = torch.finfo(states.dtype).min
            pooled = states.masked_fill(~validity.unsqueeze(-1), neg).amax(1)
            pooled = torch.where(validity.any(1, keepdim=True), pooled, torch.zeros_like(pooled))
            return ModelState(self.head(pooled), pooled)

        scores = self.att_vector(torch.tanh(self.att_proj(states))).squeeze(-1)
        attention = masked_renormalize(masked_softmax(scores, validity), validity)
        pooled = torch.bmm(attention.unsqueeze(1), states).squeeze(1)
        return ModelState(self.head(pooled), pooled, attention)


class TransformerClassifier(TokenClassifier):
    """Pretrained encoder with a linear head on the [CLS] representation."""

    def __init__(self, config, encoder=None):
        super().__init__(config)
        if encoder is None:
            encoder = load_encoder(config.encoder_id)
        self.encoder = encoder
        self.config.hidden_dim = encoder.config.hidden_size
        self.head = nn.Linear(encoder.config.hidden_size, config.num_classes)

    def forward(self, input_ids, attention_mask, validity):
        out = self.encoder(
            input_ids=input_ids,
            attention_mask=attention_mask.long(),
            output_attentions=True,
            return_dict=True,
        )
        cls = out.last_hidden_state[:, 0]
        per_head = out.attentions[-1][:, :, 0, :]
        attention = cls_attention(per_head, validity)
        return ModelState(self.head(cls), cls, attention, {"cls_heads": per_head})


def load_encoder(encoder_id: str, pretrained: bool = True):
    from transformers import AutoConfig, AutoModel

    try:
        if pretrained:
            return AutoModel.from_pretrained(encoder_id, attn_implementation="eager")
        cfg = AutoConfig.from_pretrained(encoder_id)
        return AutoModel.from_config(cfg, attn_implementation="eager")
    except (OSError, ValueError) as exc:
        raise BackendError(f"could not load encoder {encoder_id!r}: {exc}") from exc


def cls_attention(per_head: torch.Tensor, validity: torch.Tensor) -> torch.Tensor:
    """Average [CLS]-query rows over heads, then mask and renormalize.

    ``per_head`` has shape ``(batch, heads, length)``.
    """
    return masked_renormalize(per_head.mean(1), validity)


_BUILDERS = {
    "bow": BagOfWords,
    "cnn": CNNClassifier,
    "birnn_max": BiRNNClassifier,
    "birnn_attn": BiRNNClassifier,
    "transformer": TransformerClassifier,
}


def build_model(config: ModelConfig, seed: int = 0) -> TokenClassifier:
    config.validate()
    torch.manual_seed(seed)
    model = _BUILDERS[config.kind](config)
    if config.kind != "transformer":
        config.hidden_dim = model.head.in_features
    return model


def as_tensors(batch: dict) -> dict:
    out = {}
    for key in ("input_ids", "attention_mask", "validity"):
        value = batch[key]
        if not isinstance(value, torch.Tensor):
            value = torch.as_tensor(np.asarray(value))
        out[key] = value.long() if key == "input_ids" else value.bool()
    shapes = {v.shape for v in out.values()}
    if len(shapes) != 1 or len(next(iter(shapes))) != 2:
        raise ShapeError(f"batch arrays must share one (batch, length) shape, got {shapes}")
    return out


def forward_classify(model: TokenClassifier, batch: dict) -> list[ForwardOutput]:
    tensors = as_tensors(batch)
    was_training = model.training
    model.eval()
    with torch.no_grad():
        state = model(**tensors)
    model.train(was_training)
    logits = state.logits.double()
    probs = torch.softmax(logits, -1)
    outputs = []
    for i in range(logits.shape[0]):
        att = None if state.attention is None else state.attention[i].double().numpy()
        outputs.append(ForwardOutput(
            logits=logits[i].numpy(),
            probs=probs[i].numpy(),
            prediction=int(torch.argmax(logits[i])),
            hidden_cls=state.hidden[i].double().numpy(),
            attention=att,
        ))
    return outputs


def extract_attention(model: TokenClassifier, state: ModelState, validity=None) -> torch.Tensor:
    """Attention distribution over valid tokens from a forward state.

    Transformer states are re-derived from the stored per-head [CLS] rows when
    ``validity`` is given; otherwise the distribution computed in forward is
    returned.
    """
    if not model.has_attention:
        raise NoAttention(f"model kind {model.config.kind!r} has no attention output")
    if validity is not None and "cls_heads" in state.extras:
        return cls_attention(state.extras["cls_heads"], torch.as_tensor(validity).bool())
    return state.attention


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: TokenClassifier, directory, seed: int, extra: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), directory / "weights.pt")
    sidecar = {"config": model.config.to_dict(), "seed": seed}
    if extra:
        sidecar.update(extra)
    if model.config.kind == "transformer":
        model.encoder.config.save_pretrained(str(directory / "encoder"))
    (directory / "model.json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
    return directory


def load_checkpoint(directory, expected: ModelConfig | None = None) -> tuple[TokenClassifier, dict]:
    directory = Path(directory)
    sidecar = json.loads((directory / "model.json").read_text(encoding="utf-8"))
    config = ModelConfig.from_dict(sidecar["config"])
    if expected is not None and expected.to_dict() != config.to_dict():
        raise ConfigError("checkpoint config does not match the expected config")
    if config.kind == "transformer":
        encoder = load_encoder(str(directory / "encoder"), pretrained=False)
        model = TransformerClassifier(config, encoder=encoder)
    else:
        model = _BUILDERS[config.kind](config)
    state = torch.load(directory / "weights.pt", map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, sidecar
