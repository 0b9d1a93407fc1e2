from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

from ..corpus import HATE_LABELS, MORAL_LABELS, Instance
from ..errors import ClientError
from ..evaluation.classification import INVALID, macro_f1
from ..evaluation.records import PredictionRecord
from .parsing import ParsedPrediction, parse_response
from .templates import get_template, render_prompt

logger = logging.getLogger(__name__)

API_KEY_ENV = "LLM_API_KEY"
BASE_URL_ENV = "LLM_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


class ChatClient(Protocol):
    def complete(self, model_id: str, prompt: str, temperature: float = 0.0) -> str: ...


class OpenAICompatibleClient:
    """Minimal client for any ``/chat/completions`` endpoint."""

    def __init__(self, api_key: str | None = None, base_url: str | None = None, timeout: float = 60.0):
        self.api_key = api_key or os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise ClientError(f"no API key; set {API_KEY_ENV}")
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self.timeout = timeout

    def complete(self, model_id: str, prompt: str, temperature: float = 0.0) -> str:
        import httpx

        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                headers={"Authorization": f"Bearer {self.api_key}"},
                json={"model": model_id, "temperature": temperature,
                      "messages": [{"role": "user", "content": prompt}]},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise ClientError(str(exc)) from exc


def with_retries(fn: Callable[[], str], attempts: int = 3, base_delay: float = 1.0,
                 sleep: Callable[[float], None] = time.sleep) -> str:
    """Call ``fn`` up to ``attempts`` times, doubling the delay between tries."""
    for i in range(attempts):
        try:
            return fn()
        except ClientError as exc:
            if i == attempts - 1:
                raise
            delay = base_delay * 2 ** i
            logger.warning("client error (%s); retrying in %.1fs", exc, delay)
            sleep(delay)
    raise AssertionError("unreachable")


class ResponseCache:
    """One JSON file per (model, template fingerprint, instance) key."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model_id: str, template_id: str, instance_id: str) -> str:
        fp = get_template(template_id).fingerprint
        raw = json.dumps([model_id, template_id, fp, instance_id])
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()

    def path(self, key: str) -> Path:
        return self.dir / f"{key}.json"

    def get(self, key: str) -> dict | None:
        p = self.path(key)
        if not p.exists():
            return None
        return json.loads(p.read_text(encoding="utf-8"))

    def put(self, key: str, entry: dict) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(entry, fh, sort_keys=True, ensure_ascii=False)
        os.replace(tmp, self.path(key))


@dataclass
class LLMEvalResult:
    template_id: str
    model_id: str
    records: list[PredictionRecord]
    parsed: list[ParsedPrediction]
    hate_f1: float | None = None
    moral_f1: float | None = None
    n_invalid: int = 0
    # parse index for each record (a joint template yields two records per instance)
    record_parse: list[int] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)

    def scores(self) -> dict:
        return {"template_id": self.template_id, "model_id": self.model_id, "n": len(self.records),
                "hate_f1": self.hate_f1, "moral_f1": self.moral_f1, "n_invalid": self.n_invalid}


def _record(inst: Instance, task: str, pred: str) -> PredictionRecord:
    labels = HATE_LABELS if task == "hate" else MORAL_LABELS
    probs = [1.0 if lab == pred else 0.0 for lab in labels]
    return PredictionRecord(
        id=inst.id, task=task, gold_hate=inst.hate_label,
        gold_moral_set=sorted(inst.moral_set, key=MORAL_LABELS.index),
        gold_moral_primary=inst.primary_moral,
        prediction=pred, class_probs=probs,
        subgroup_tags=list(inst.metadata.subgroup_tags()),
    )


def run_eval(client: ChatClient | None, instances: Sequence[Instance], template_id: str, cache_dir,
             model_id: str, max_in_flight: int = 4, attempts: int = 3, base_delay: float = 1.0,
             sleep: Callable[[float], None] = time.sleep) -> LLMEvalResult:
    """Query (or replay from cache) every instance and score the parsed labels.

    With ``client=None`` only cached responses are used; uncached instances are
    reported in ``missing`` and scored as invalid.
    """
    cache = ResponseCache(cache_dir)
    fields = get_template(template_id).fields

    def fetch(inst: Instance) -> str | None:
        key = cache.key(model_id, template_id, inst.id)
        hit = cache.get(key)
        if hit is not None:
            return hit["response"]
        if client is None:
            return None
        prompt = render_prompt(template_id, inst.text)
        text = with_retries(lambda: client.complete(model_id, prompt, 0.0), attempts, base_delay, sleep)
        cache.put(key, {"model_id": model_id, "template_id": template_id, "instance_id": inst.id,
                        "prompt": prompt, "response": text})
        return text

    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        responses = list(pool.map(fetch, instances))

    result = LLMEvalResult(template_id, model_id, [], [])
    hate_recs, moral_recs = [], []
    for inst, text in zip(instances, responses):
        if text is None:
            result.missing.append(inst.id)
        parsed = parse_response(text or "", template_id)
        result.parsed.append(parsed)
        if not parsed.parse_ok:
            result.n_invalid += 1
        if "hate_label" in fields:
            pred = INVALID if parsed.hate is None else ("Hate" if parsed.hate == "YES" else "NonHate")
            hate_recs.append(_record(inst, "hate", pred))
        if "moral_value" in fields:
            label = parsed.moral_label
            moral_recs.append(_record(inst, "moral", INVALID if label is None else label.value))
    if hate_recs:
        result.hate_f1 = macro_f1(hate_recs, "strict")
    if moral_recs:
        result.moral_f1 = macro_f1(moral_recs, "adapted")
    result.records = hate_recs + moral_recs
    n = len(instances)
    result.record_parse = [i for i in range(n) if hate_recs] + [i for i in range(n) if moral_recs]
    return result


def write_result(result: LLMEvalResult, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / "llm_predictions.jsonl").open("w", encoding="utf-8") as fh:
        for rec, i in zip(result.records, result.record_parse):
            fh.write(json.dumps({**rec.to_dict(), "parsed": result.parsed[i].to_dict()},
                                ensure_ascii=False) + "\n")
    (directory / "llm_scores.json").write_text(json.dumps(result.scores(), indent=2, sort_keys=True),
                                               encoding="utf-8")
