"""scikit-learn style wrapper around the training loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import DatasetSplit
from .evaluation.rationale import extract_model_rationale
from .models import ATTENTION_KINDS
from .errors import NoAttention
from .trainer import TrainConfig, _softmax, predict_arrays, train
from .validation import as_instances, check_task


class RationaleAttentionClassifier(ClassifierMixin, BaseEstimator):
    """Text classifier whose attention can be supervised with human rationales.

    Parameters mirror the training configuration. ``lr=None`` picks 2e-5 for
    transformer encoders and 1e-3 otherwise. ``validation_fraction`` of the
    training data is held out for best-epoch selection; 0 keeps the last epoch.

    ``fit`` accepts raw texts with labels and optional character spans, or
    corpus ``Instance`` objects.
    """

    def __init__(self, model_kind="birnn_attn", task="hate", alpha=0.001, epochs=20, batch_size=16,
                 lr=None, max_len=128, embed_dim=100, rnn_hidden=128, cnn_filters=100,
                 encoder_id=None, weight_decay=0.01, grad_clip=1.0, alignment_target="normalized",
                 min_freq=1, validation_fraction=0.1, rationale_strategy="threshold", top_k=None,
                 random_state=0):
        self.model_kind = model_kind
        self.task = task
        self.alpha = alpha
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.max_len = max_len
        self.embed_dim = embed_dim
        self.rnn_hidden = rnn_hidden
        self.cnn_filters = cnn_filters
        self.encoder_id = encoder_id
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.alignment_target = alignment_target
        self.min_freq = min_freq
        self.validation_fraction = validation_fraction
        self.rationale_strategy = rationale_strategy
        self.top_k = top_k
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        lr = self.lr
        if lr is None:
            lr = 2e-5 if self.model_kind == "transformer" else 1e-3
        return TrainConfig(
            batch_size=self.batch_size, lr=lr, max_len=self.max_len, epochs=self.epochs,
            alpha=self.alpha, weight_decay=self.weight_decay, seed=self.random_state, task=self.task,
            model_kind=self.model_kind, encoder_id=self.encoder_id, embed_dim=self.embed_dim,
            rnn_hidden=self.rnn_hidden, cnn_filters=self.cnn_filters, min_freq=self.min_freq,
            grad_clip=self.grad_clip, alignment_target=self.alignment_target,
        )

    def fit(self, X, y=None, rationales=None):
        """Train on texts ``X`` with labels ``y`` and optional rationale spans."""
        self.classes_ = np.array(check_task(self.task))
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")
        instances = as_instances(X, y, rationales, self.task)
        config = self._train_config()

        rng = np.random.default_rng(self.random_state)
        order = rng.permutation(len(instances))
        n_val = int(round(self.validation_fraction * len(instances)))
        if n_val >= len(instances):
            n_val = 0
        val = [instances[i] for i in order[:n_val]]
        tr = [instances[i] for i in order[n_val:]]
        split = DatasetSplit(tr, val, [], seed=self.random_state)

        self.model_, self.history_ = train(config, split)
        return self

    def _forward(self, X):
        check_is_fitted(self, "model_")
        instances = as_instances(X, task=self.task)
        enc = self.model_.encode(instances)
        logits, attention = predict_arrays(self.model_.model, enc)
        return enc, logits, attention

    def predict_proba(self, X) -> np.ndarray:
        _, logits, _ = self._forward(X)
        return _softmax(logits)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def explain(self, X) -> list[dict]:
        """Per-text content tokens, attention weights and extracted rationale."""
        if self.model_kind not in ATTENTION_KINDS:
            raise NoAttention(f"{self.model_kind} has no attention layer")
        enc, logits, attention = self._forward(X)
        out = []
        for i, tok in enumerate(enc.tokenized):
            valid = np.asarray(tok.validity)
            att = attention[i][valid]
            mask = extract_model_rationale(att, self.rationale_strategy, self.top_k)
            out.append({
                "tokens": [t for t, ok in zip(tok.tokens, tok.validity) if ok],
                "offsets": [o for o, ok in zip(tok.offsets, tok.validity) if ok],
                "attention": att,
                "rationale": mask.astype(bool),
                "prediction": str(self.classes_[int(np.argmax(logits[i]))]),
            })
        return out
