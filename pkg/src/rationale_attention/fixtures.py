"""Paths to the small corpora shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .corpus import Instance, load_corpus

FIXTURE_CORPUS = "fixture_corpus.jsonl"
AGREEMENT_FIXTURE = "agreement_fixture.jsonl"


def fixture_path(name: str = FIXTURE_CORPUS) -> Path:
    return Path(str(resources.files("rationale_attention") / "data" / name))


def load_fixture_corpus() -> list[Instance]:
    """30 hand-built comments with moral rationales and metadata."""
    return load_corpus(fixture_path(FIXTURE_CORPUS))


def load_agreement_fixture() -> list[Instance]:
    """Two-annotator corpus used to check the per-class kappa values."""
    return load_corpus(fixture_path(AGREEMENT_FIXTURE))
