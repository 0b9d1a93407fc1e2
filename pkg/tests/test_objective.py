import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from rationale_attention.errors import EmptyRationale, ShapeError
from rationale_attention.objective import (
    attention_alignment_loss,
    gate,
    joint_loss,
    total_loss,
)


def test_alignment_examples():
    assert attention_alignment_loss([0.5, 0.5], [1, 0]) == 0.25
    assert attention_alignment_loss([0.0, 0.5, 0.5], [0, 1, 1]) == 0.0


def test_alignment_ignores_invalid_positions():
    # padding must change neither the sum nor the denominator
    padded = attention_alignment_loss([0.0, 0.5, 0.5, 0.0, 0.0], [0, 1, 0, 0, 0],
                                      validity=[False, True, True, False, False])
    assert padded == 0.25


def test_alignment_errors():
    with pytest.raises(ShapeError):
        attention_alignment_loss([0.5, 0.5], [1, 0, 0])
    with pytest.raises(EmptyRationale):
        attention_alignment_loss([0.5, 0.5], [0, 0])


def test_raw_binary_target():
    # unnormalized target: ((0.5 - 1)^2 + (0.5 - 1)^2) / 2
    assert attention_alignment_loss([0.5, 0.5], [1, 1], target="binary") == 0.25


@pytest.mark.parametrize("task,y,r,expected", [
    ("moral", "NN", [1, 1], 0),
    ("moral", "HN", [0, 0], 0),
    ("moral", "HN", [0, 1], 1),
    ("moral", "PN", [1, 0], 1),
    ("hate", "Hate", [1, 0], 1),
    ("hate", "NonHate", [1, 0], 0),
    ("hate", "Hate", [0, 0], 0),
])
def test_gate(task, y, r, expected):
    assert gate(y, r, task) == expected


def test_total_loss_arithmetic():
    # two equal logits give ce = ln 2, and a=[.5,.5] vs r=[1,0] gives aal = 0.25
    out = total_loss([0.0, 0.0], "Hate", a=[0.5, 0.5], r=[1, 0], alpha=0.001, task="hate")
    assert out.ce == pytest.approx(math.log(2), abs=1e-15)
    assert out.aal == 0.25 and out.gate == 1
    assert out.total == out.ce + 0.001 * 1 * 0.25
    assert 0.7 + 0.001 * 0.25 == pytest.approx(0.70025, abs=1e-15)


def test_total_loss_reduces_to_ce():
    assert total_loss([1.0, -1.0], "Hate", [0.5, 0.5], [1, 0], alpha=0.0).total == \
        total_loss([1.0, -1.0], "Hate", [0.5, 0.5], [1, 0], alpha=0.0).ce
    off = total_loss([1.0, -1.0], "NonHate", [0.5, 0.5], [1, 0], alpha=1.0)
    assert off.gate == 0 and off.total == off.ce
    absent = total_loss([1.0, -1.0], "Hate", None, [1, 0], alpha=1.0)
    assert absent.total == absent.ce


def test_empty_rationale_only_when_gated():
    # NN with no rationale is legal
    out = total_loss(np.zeros(6), "NN", [0.5, 0.5], [0, 0], task="moral")
    assert out.gate == 0
    # a moral label with an empty mask gates off rather than raising
    assert total_loss(np.zeros(6), "HN", [0.5, 0.5], [0, 0], task="moral").gate == 0


def test_negative_alpha():
    with pytest.raises(ValueError):
        total_loss([0.0, 0.0], "Hate", alpha=-1)


def test_joint_loss_batch_mean_and_gate():
    logits = torch.tensor([[0.0, 0.0], [2.0, -1.0]])
    labels = torch.tensor([1, 0])
    attention = torch.tensor([[0.0, 0.5, 0.5, 0.0], [0.0, 0.5, 0.5, 0.0]])
    rationale = torch.tensor([[0, 1, 0, 0], [0, 1, 0, 0]])
    validity = torch.tensor([[False, True, True, False]] * 2)
    out = joint_loss(logits, labels, attention, rationale, validity, alpha=0.5, task="hate")
    assert out.gate.tolist() == [1, 0]
    assert out.gate_rate == 0.5
    assert out.aal.tolist() == [0.25, 0.25]
    assert torch.equal(out.loss.detach(), out.total.mean())
    assert out.total[1] == out.ce[1]
    assert out.total[0] == out.ce[0] + 0.5 * 1 * out.aal[0]


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12), st.data())
def test_alignment_monotone_along_path(n, data):
    r = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    if r.sum() == 0 or r.sum() == n:
        r[0], r[-1] = 1, 0
    start = np.array(data.draw(st.lists(st.floats(0.01, 1), min_size=n, max_size=n)))
    start = start * (1 - r)
    start = start / start.sum()
    target = r / r.sum()
    losses = [attention_alignment_loss((1 - t) * start + t * target, r) for t in np.linspace(0, 1, 6)]
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert losses[-1] == pytest.approx(0.0, abs=1e-15)
