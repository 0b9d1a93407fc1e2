"""Parse chat-model responses in the fixed key: value output format."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from ..corpus import MoralLabel
from .templates import MORAL_WORDS, get_template

logger = logging.getLogger(__name__)

NONE = "None"

MORAL_WORD_TO_LABEL: dict[str, MoralLabel] = {
    "care": MoralLabel.HN,
    "harm": MoralLabel.HN,
    "fairness": MoralLabel.FN,
    "cheating": MoralLabel.FN,
    "loyalty": MoralLabel.LN,
    "betrayal": MoralLabel.LN,
    "authority": MoralLabel.AN,
    "subversion": MoralLabel.AN,
    "sanctity": MoralLabel.PN,
    "degradation": MoralLabel.PN,
    NONE: MoralLabel.NN,
}

_KEYS = ("hate_label", "moral_value", "explanation")
_LINE = re.compile(r"^\s*[*_`\-]*\s*(hate_label|moral_value|explanation)\s*[*_`]*\s*[:=]\s*(.*)$",
                   re.IGNORECASE)


@dataclass(frozen=True)
class ParsedPrediction:
    """``hate`` is "YES"/"NO"/None, ``moral_value`` a prompt moral word,
    ``NONE`` or None; None always means the field was absent."""

    hate: str | None
    moral_value: str | None
    explanation: str | None
    parse_ok: bool
    raw: str

    @property
    def moral_label(self) -> MoralLabel | None:
        return None if self.moral_value is None else MORAL_WORD_TO_LABEL[self.moral_value]

    def to_dict(self) -> dict:
        return {
            "hate": self.hate,
            "moral_value": self.moral_value,
            "explanation": self.explanation,
            "parse_ok": self.parse_ok,
            "raw": self.raw,
        }


def _clean(value: str) -> str:
    return value.strip().strip("[]\"'*`").strip().rstrip(".").strip()


def _is_none(value: str) -> bool:
    return value.lower() in ("none", "null", "n/a")


def parse_response(raw: str, template_id: str) -> ParsedPrediction:
    fields = get_template(template_id).fields
    found: dict[str, str] = {}
    for line in (raw or "").splitlines():
        m = _LINE.match(line)
        if m:
            key = m.group(1).lower()
            found.setdefault(key, m.group(2))

    hate = moral = explanation = None
    ok = True

    if "hate_label" in fields:
        value = _clean(found.get("hate_label", "")).upper()
        if value in ("YES", "NO"):
            hate = value
        else:
            ok = False

    if "moral_value" in fields:
        if "moral_value" not in found:
            ok = False
        else:
            value = _clean(found["moral_value"]).lower()
            if _is_none(value):
                moral = NONE
            elif value in MORAL_WORDS:
                moral = value
            else:
                logger.warning("unrecognized moral value %r", value)

    if "explanation" in fields and "explanation" in found:
        value = found["explanation"].strip()
        explanation = NONE if _is_none(_clean(value)) else value

    if not ok:
        return ParsedPrediction(None, None, None, False, raw)
    return ParsedPrediction(hate, moral, explanation, True, raw)


def synthetic_response(template_id: str, hate: str | None = None, moral_value: str | None = None,
                       explanation: str | None = None) -> str:
    """Fill a template's own format block with the given values."""
    tpl = get_template(template_id)
    values = {"hate_label": hate, "moral_value": moral_value, "explanation": explanation}
    lines = []
    for line in tpl.format_block.splitlines():
        key = line.split(":", 1)[0].strip()
        if key in values and values[key] is not None:
            sep = line[len(line.split(":", 1)[0]):].split("[", 1)[0]
            lines.append(line.split(":", 1)[0] + sep + values[key])
    return "\n".join(lines)
