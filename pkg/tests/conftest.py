import os
from pathlib import Path

import pytest

from rationale_attention.fixtures import load_agreement_fixture, load_fixture_corpus

_criteria: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = dict(report.user_properties).get("criterion")
    if marker is None:
        return
    outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
    detail = dict(report.user_properties).get("detail", "")
    _criteria.setdefault(marker, []).append((report.nodeid.split("::")[-1], outcome, detail))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.user_properties.append(("criterion", m.args[0]))
        detail = getattr(item, "_criterion_detail", "")
        if detail:
            rep.user_properties.append(("detail", detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        rows = _criteria[n]
        outcomes = {o for _, o, _ in rows}
        verdict = "FAIL" if "FAIL" in outcomes else ("PASS" if "PASS" in outcomes else "SKIP")
        details = "; ".join(d for _, _, d in rows if d)
        names = ", ".join(name for name, _, _ in rows)
        terminalreporter.write_line(f"criterion {n}: {verdict}  [{names}]" + (f"  {details}" if details else ""))


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance summary."""
    def record(text: str):
        request.node._criterion_detail = text
    return record


@pytest.fixture(scope="session")
def fixture_corpus():
    return load_fixture_corpus()


@pytest.fixture(scope="session")
def agreement_corpus():
    return load_agreement_fixture()


@pytest.fixture(scope="session")
def tiny_bert(tmp_path_factory):
    """A randomly initialized two-layer BERT with a word-level vocab, saved locally."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    path = tmp_path_factory.mktemp("tiny_bert")
    words = sorted({w for inst in load_fixture_corpus() for w in inst.text.lower().replace("?", " ").split()})
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "?", ".", ",", "!"] + words
    vocab = list(dict.fromkeys(vocab))
    (path / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    BertTokenizerFast(vocab=str(path / "vocab.txt")).save_pretrained(str(path))
    torch.manual_seed(0)
    cfg = BertConfig(vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2, num_attention_heads=2,
                     intermediate_size=64, max_position_embeddings=64)
    BertModel(cfg).save_pretrained(str(path))
    return str(path)
