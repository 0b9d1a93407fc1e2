"""Cross-entropy plus gated attention-alignment loss.

Per instance::

    total = ce + alpha * gate * aal

where ``aal`` is the mean squared error between the model's attention and
the normalized rationale mask, averaged over the V valid (content) tokens,
and ``gate`` switches the term on only for instances that carry a moral
rationale. Batch loss is the mean of the per-instance totals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .corpus import HATE_LABELS, MORAL_LABELS
from .errors import EmptyRationale, ShapeError
from .span_align import RationaleMask

TASKS = ("hate", "moral")
NN_INDEX = MORAL_LABELS.index("NN")
HATE_INDEX = HATE_LABELS.index("Hate")


@dataclass
class LossBreakdown:
    ce: float
    aal: float
    gate: int
    alpha: float
    total: float


@dataclass
class BatchLoss:
    loss: torch.Tensor
    ce: torch.Tensor
    aal: torch.Tensor
    gate: torch.Tensor
    total: torch.Tensor

    @property
    def gate_rate(self) -> float:
        return float(self.gate.float().mean()) if self.gate.numel() else 0.0


def _label_index(label, task: str) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    labels = HATE_LABELS if task == "hate" else MORAL_LABELS
    return labels.index(str(label))


def _values(x) -> np.ndarray:
    if isinstance(x, RationaleMask):
        return np.asarray(x.values, dtype=np.float64)
    if isinstance(x, torch.Tensor):
        return x.detach().double().numpy()
    return np.asarray(x, dtype=np.float64)


def alignment_terms(attention: torch.Tensor, rationale: torch.Tensor, validity: torch.Tensor,
                    target: str = "normalized") -> torch.Tensor:
    """Per-row alignment MSE for batched tensors of shape ``(batch, length)``.

    Rows with an empty rationale or no valid tokens yield 0; gating decides
    whether they count. ``target="binary"`` compares against the raw 0/1 mask.
    """
    if attention.shape != rationale.shape or attention.shape != validity.shape:
        raise ShapeError(
            f"attention {tuple(attention.shape)}, rationale {tuple(rationale.shape)} and "
            f"validity {tuple(validity.shape)} must match"
        )
    valid = validity.to(attention.dtype)
    r = rationale.to(attention.dtype) * valid
    if target == "normalized":
        rsum = r.sum(-1, keepdim=True)
        r = r / torch.where(rsum > 0, rsum, torch.ones_like(rsum))
    elif target != "binary":
        raise ValueError(f"unknown alignment target {target!r}")
    n_valid = valid.sum(-1)
    sq = ((attention - r) ** 2 * valid).sum(-1)
    return sq / torch.where(n_valid > 0, n_valid, torch.ones_like(n_valid))


def gate_tensor(labels: torch.Tensor, rationale_sum: torch.Tensor, task: str) -> torch.Tensor:
    if task == "moral":
        labelled = labels != NN_INDEX
    elif task == "hate":
        labelled = labels == HATE_INDEX
    else:
        raise ValueError(f"unknown task {task!r}")
    return (labelled & (rationale_sum > 0)).long()


def joint_loss(
    logits: torch.Tensor,
    labels: torch.Tensor,
    attention: torch.Tensor | None,
    rationale: torch.Tensor,
    validity: torch.Tensor,
    alpha: float,
    task: str,
    target: str = "normalized",
    use_alignment: bool = True,
) -> BatchLoss:
    """Batch objective; ``use_alignment=False`` is the plain cross-entropy build."""
    ce = F.cross_entropy(logits, labels, reduction="none")
    valid_r = rationale.bool() & validity.bool()
    gate = gate_tensor(labels, valid_r.sum(-1), task)
    if not use_alignment:
        zeros = torch.zeros_like(ce)
        return BatchLoss(ce.mean(), ce.detach(), zeros, torch.zeros_like(gate), ce.detach())
    if attention is None:
        aal = torch.zeros_like(ce)
        gate = torch.zeros_like(gate)
        total = ce
    else:
        aal = alignment_terms(attention, rationale, validity, target)
        total = ce + alpha * gate.to(ce.dtype) * aal
    return BatchLoss(total.mean(), ce.detach(), aal.detach(), gate, total.detach())


# ---------------------------------------------------------------------------
# single-instance API


def attention_alignment_loss(a, r, validity=None, target: str = "normalized") -> float:
    """Alignment MSE between one attention vector and one rationale mask.

    ``validity`` defaults to all positions valid. Raises `EmptyRationale`
    when the mask has no positive valid entry.
    """
    a = _values(a)
    rv = _values(r)
    if a.shape != rv.shape:
        raise ShapeError(f"attention length {a.shape} != rationale length {rv.shape}")
    valid = np.ones_like(a, dtype=bool) if validity is None else np.asarray(validity, dtype=bool)
    if valid.shape != a.shape:
        raise ShapeError("validity must match attention length")
    if (rv * valid).sum() <= 0:
        raise EmptyRationale("alignment loss needs a non-empty rationale")
    out = alignment_terms(
        torch.as_tensor(a)[None], torch.as_tensor(rv)[None], torch.as_tensor(valid)[None], target
    )
    return float(out[0])


def gate(y, r, task: str) -> int:
    rsum = float(_values(r).sum()) if r is not None else 0.0
    idx = _label_index(y, task)
    return int(gate_tensor(torch.tensor([idx]), torch.tensor([rsum]), task)[0])


def total_loss(logits, gold, a=None, r=None, alpha: float = 0.001, task: str = "hate",
               validity=None, target: str = "normalized") -> LossBreakdown:
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    logits_t = torch.as_tensor(np.asarray(logits, dtype=np.float64))[None]
    label = torch.tensor([_label_index(gold, task)])
    ce = float(F.cross_entropy(logits_t, label))
    g = gate(gold, r, task) if r is not None else 0
    aal = 0.0
    if g and a is not None:
        aal = attention_alignment_loss(a, r, validity, target)
    elif a is None:
        g = 0
    return LossBreakdown(ce=ce, aal=aal, gate=g, alpha=alpha, total=ce + alpha * g * aal)
