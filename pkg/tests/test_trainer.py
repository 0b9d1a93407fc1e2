import numpy as np
import pytest
import torch

from rationale_attention.corpus import split_dataset
from rationale_attention.errors import NonFiniteLoss
from rationale_attention.evaluation import classification
from rationale_attention.evaluation.records import read_dump, write_dump
from rationale_attention.evaluation.report import evaluate_dump
from rationale_attention.synthetic import SyntheticSpec, make_corpus
from rationale_attention.trainer import (
    TrainConfig,
    TrainedModel,
    evaluate_checkpoint,
    predict_arrays,
    set_global_seed,
    train,
)

SMALL = dict(lr=1e-2, max_len=20, embed_dim=16, rnn_hidden=16, cnn_filters=8, batch_size=16)


@pytest.fixture(scope="module")
def separable():
    # no distractors: the keyword alone decides the label
    spec = SyntheticSpec(n=200, seed=1, filler_size=60, distractor_rate=(0.0, 0.0), min_len=5, max_len=10)
    return split_dataset(make_corpus(spec), seed=0)


@pytest.fixture(scope="module")
def attn_run(separable):
    cfg = TrainConfig(model_kind="birnn_attn", epochs=4, **SMALL)
    return train(cfg, separable)


def _train_accuracy(trained, instances):
    enc = trained.encode(instances)
    logits, _ = predict_arrays(trained.model, enc)
    return float(np.mean(logits.argmax(1) == enc.labels.numpy()))


def test_epochs_zero(separable):
    trained, history = train(TrainConfig(model_kind="bow", epochs=0, **SMALL), separable)
    assert history.epochs == [] and history.steps == []
    assert isinstance(trained, TrainedModel)


@pytest.mark.parametrize("kind", ["bow", "cnn", "birnn_max", "birnn_attn"])
def test_baselines_fit_separable_corpus(separable, kind):
    cfg = TrainConfig(model_kind=kind, epochs=20, **SMALL)
    trained, history = train(cfg, separable)
    assert _train_accuracy(trained, separable.train) >= 0.95
    assert history.epochs[-1]["train_loss"] < history.epochs[0]["train_loss"]


def test_history_fields(attn_run):
    _, history = attn_run
    assert history.seed == 0
    assert len(history.epochs) == 4
    assert set(history.epochs[0]) >= {"epoch", "train_ce", "train_aal", "val_macro_f1", "gate_rate"}
    assert 1 <= history.best_epoch <= 4


def test_gate_rate_matches_corpus(attn_run, separable):
    _, history = attn_run
    expected = sum(i.is_hate and bool(i.moral_spans()) for i in separable.train) / len(separable.train)
    for row in history.epochs:
        assert row["gate_rate"] == pytest.approx(expected, abs=1e-12)


def test_reproducible(separable, attn_run):
    _, first = attn_run
    _, second = train(TrainConfig(model_kind="birnn_attn", epochs=4, **SMALL), separable)
    assert first.epochs == second.epochs
    assert first.steps == second.steps


def test_seed_changes_init():
    set_global_seed(1)
    a = torch.rand(3)
    set_global_seed(2)
    b = torch.rand(3)
    set_global_seed(1)
    assert torch.equal(torch.rand(3), a) and not torch.equal(a, b)


def test_dump_rescores_to_logged_f1(attn_run, separable, tmp_path):
    trained, history = attn_run
    header, records = evaluate_checkpoint(trained, separable.validation, faithfulness=False)
    logged = history.epochs[history.best_epoch - 1]["val_macro_f1"]
    path = tmp_path / "val.jsonl"
    write_dump(path, header, records)
    _, back = read_dump(path)
    assert classification.macro_f1(back) == logged
    assert evaluate_dump(back, header).macro_f1 == logged


def test_dump_contents(attn_run, separable):
    trained, _ = attn_run
    header, records = evaluate_checkpoint(trained, separable.test)
    assert header.task == "hate" and len(records) == len(separable.test)
    for rec in records:
        assert len(rec.attention) == len(rec.gold_mask) == len(rec.tokens) == len(rec.model_mask)
        assert abs(sum(rec.attention) - 1) <= 1e-6
        assert abs(sum(rec.class_probs) - 1) <= 1e-9
        assert rec.probs_erased is not None
        assert rec.prediction == rec.labels[int(np.argmax(rec.logits))]


def test_empty_dump(attn_run):
    header, records = evaluate_checkpoint(attn_run[0], [])
    assert records == [] and header.task == "hate"


def test_attention_free_dump(separable):
    trained, _ = train(TrainConfig(model_kind="cnn", epochs=1, **SMALL), separable)
    _, records = evaluate_checkpoint(trained, separable.test)
    assert all(r.attention is None and r.model_mask is None for r in records)


def test_checkpoint_round_trip(attn_run, separable, tmp_path):
    trained, _ = attn_run
    trained.save(tmp_path / "ck")
    loaded = TrainedModel.load(tmp_path / "ck")
    assert loaded.config == trained.config
    a, _ = predict_arrays(trained.model, trained.encode(separable.test))
    b, _ = predict_arrays(loaded.model, loaded.encode(separable.test))
    assert np.array_equal(a, b)


def test_non_finite_loss(separable):
    def poison(model, step):
        with torch.no_grad():
            for p in model.parameters():
                p.fill_(float("nan"))

    with pytest.raises(NonFiniteLoss) as exc:
        train(TrainConfig(model_kind="bow", epochs=1, **SMALL), separable, on_step=poison)
    assert "batch 1" in str(exc.value.batch_id)


def test_empty_train_split(separable):
    from rationale_attention.corpus import DatasetSplit

    with pytest.raises(ValueError):
        train(TrainConfig(model_kind="bow", **SMALL), DatasetSplit([], separable.validation, [], seed=0))


def test_config_defaults():
    cfg = TrainConfig()
    assert (cfg.batch_size, cfg.lr, cfg.max_len, cfg.epochs, cfg.alpha) == (16, 2e-5, 128, 20, 0.001)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"nope": 1})
