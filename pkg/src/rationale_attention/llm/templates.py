"""Prompt templates for hate and moral-value classification with chat models.

Texts are kept verbatim from the reference prompt set, including their
original spelling; only LaTeX line breaks were turned into newlines.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

from ..errors import MissingSlot

logger = logging.getLogger(__name__)

DEFINITION = (
    "Hate Speech can result due to some of the followings:\n"
    "- Having a term or expression with any pejorative connotation.\n"
    "- Having a sequence of swear words.\n"
    "- Having a sequence of at least two terms, or/and expressions with any pejorative "
    "connotation expressed explicitly or implicitly."
)

CONTEXT = (
    "The data was collected during the Bolsonaro government in 2019. We collected balanced data "
    "from left- and right-wing Brazilian politicians, ensuring balanced gender representation. "
    "The Jair Bolsonaro government began on 1 January 2019, after his election in late 2018 — "
    "Bolsonaro won on a wave of anti-establishment sentiment, capitalizing on widespread frustration "
    "with corruption scandals and economic stagnation. Early in his presidency, he pursued a "
    "conservative, pro-market agenda: notably, he enacted a major pension-reform in 2019 aiming to "
    "reduce social-security costs. His government was marked by sharp shifts in environmental and "
    "Indigenous-land policy — protections were scaled back, enforcement relaxed, and deforestation "
    "pressures increased, drawing both domestic and international criticism."
)

MFT_INTRO = (
    "The Moral Foundations Theory framework represents core ethical ad psychological concerns "
    "that come in paired positive vs negative expressions:"
)

MFT_BULLETS = (
    "- care vs harm: Involves concern for the well-being of others, with virtues expressed through "
    "care, protection, or nurturance, and vices involving harm, cruelty, or indifference to suffering.",
    "- fairness vs cheating: morals related to justice, rights, and reciprocity, with fairness "
    "indicating equity, rule-following, and cheating denoting exploitation, dishonesty, or manipulation.",
    "- loyalty vs betrayal: morals related to group-based morality, where loyalty refers to "
    "solidarity, allegiance, and in-group defense, while betrayal signals disloyalty or abandonment "
    "of one’s group.",
    "- authority vs subversion: morals related to respect for tradition, and legitimate hierarchies, "
    "with authority indicating respect or deference to leadership or norms, and subversion indicating "
    "rebellion, disrespect, or disobedience.",
    "- sanctity vs degradation: morals related to purity, contamination, with Purity is associated "
    "with cleanliness, modesty, or moral elevation, while degradation includes defilement, "
    "obscenity,or perceived corruption.",
)

MORAL_WORDS = (
    "care", "harm", "fairness", "cheating", "authority",
    "subversion", "sanctity", "degradation", "loyalty", "betrayal",
)

HATE_LINE = "hate_label: [YES if the text contains hate speech, NO otherwise]"
MORAL_LINE = (
    "moral_value: [the single most prominent moral foundations from: care, harm, fairness, "
    "cheating, authority, subversion, sanctity, degradation, loyalty, betrayal. If no clear moral "
    'foundation applies, write "None"]'
)
EXPLANATION_LINE = (
    "explanation: [provide a brief evidence based justification, specifically highlighting the "
    'words or phrases that triggered your moral value classification. If none, write "None"]'
)
FORMAT_HEADER = "Provide your analysis in this exact format:"
ONLY_LINE = "Provide ONLY the required output format with no additional text, explanations, or justifications."

HATE_ASK = 'Analyze the following text "{text}" for hate speech.'
HATE_MORAL_ASK = (
    'Analyze the following text "{text}" for hate speech and identify its underlying moral value dimensions:'
)
MORAL_ASK = 'Identify the underlying moral value dimensions in the following text "{text}".'

ABLATION_FORMAT = "\n".join([
    "hate_label : [YES or NO]",
    "moral_value: [care, harm, fairness, cheating, authority, subversion, sanctity, degradation, "
    "loyalty, betrayal, None]",
    "explanation: [brief justification]",
])

TEMPLATE_IDS = (
    "hate", "hate_def", "hate_context",
    "hate_moral", "hate_moral_def", "hate_moral_context",
    "moral", "moral_def", "moral_context",
    "ablation",
)


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    format_block: str
    fields: tuple[str, ...]

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(s for s in ("text", "definition", "context") if "{" + s + "}" in self.body)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()[:16]


def _mft_block() -> str:
    return MFT_INTRO + "\n" + "\n".join(MFT_BULLETS)


def _build() -> dict[str, PromptTemplate]:
    hate_fmt = HATE_LINE
    joint_fmt = "\n".join([HATE_LINE, MORAL_LINE, EXPLANATION_LINE])
    moral_fmt = "\n".join([MORAL_LINE, EXPLANATION_LINE])
    extras = {"": "", "_def": "{definition}\n", "_context": "{context}\n"}

    out = {}
    for suffix, extra in extras.items():
        out["hate" + suffix] = PromptTemplate(
            "hate" + suffix,
            f"{HATE_ASK}\n{extra}{FORMAT_HEADER}\n{hate_fmt}\n{ONLY_LINE}",
            hate_fmt,
            ("hate_label",),
        )
        out["hate_moral" + suffix] = PromptTemplate(
            "hate_moral" + suffix,
            f"{HATE_MORAL_ASK}\n{_mft_block()}\n\n{extra}{FORMAT_HEADER}\n{joint_fmt}\n{ONLY_LINE}",
            joint_fmt,
            ("hate_label", "moral_value", "explanation"),
        )
        out["moral" + suffix] = PromptTemplate(
            "moral" + suffix,
            f"{MORAL_ASK}\n{_mft_block()}\n\n{extra}{FORMAT_HEADER}\n{moral_fmt}\n\n{ONLY_LINE}",
            moral_fmt,
            ("moral_value", "explanation"),
        )
    out["ablation"] = PromptTemplate(
        "ablation",
        'Analyze the following text "{text}" for hate speech and identify its moral value:\n' + ABLATION_FORMAT,
        ABLATION_FORMAT,
        ("hate_label", "moral_value", "explanation"),
    )
    return {tid: out[tid] for tid in TEMPLATE_IDS}


TEMPLATES: dict[str, PromptTemplate] = _build()


def get_template(template_id: str) -> PromptTemplate:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise KeyError(f"unknown template {template_id!r}; expected one of {TEMPLATE_IDS}") from None


def render_prompt(template_id: str, text: str, definition: str | None = None,
                  context: str | None = None) -> str:
    """Fill a template. ``definition``/``context`` default to the stock blocks
    for templates that use them; supplied-but-unused slots are ignored with a
    warning."""
    tpl = get_template(template_id)
    values = {"text": text}
    for name, given, default in (("definition", definition, DEFINITION), ("context", context, CONTEXT)):
        if name in tpl.slots:
            values[name] = default if given is None else given
        elif given is not None:
            logger.warning("template %s has no %s slot; ignoring it", template_id, name)
    if text is None:
        raise MissingSlot("text")
    # plain replacement: user text may itself contain braces
    out = tpl.body
    for name in tpl.slots:
        out = out.replace("{" + name + "}", values[name])
    return out
