from .harness import ChatClient, LLMEvalResult, OpenAICompatibleClient, ResponseCache, run_eval, with_retries
from .parsing import MORAL_WORD_TO_LABEL, NONE, ParsedPrediction, parse_response, synthetic_response
from .templates import CONTEXT, DEFINITION, TEMPLATE_IDS, TEMPLATES, PromptTemplate, get_template, render_prompt

__all__ = [
    "CONTEXT",
    "ChatClient",
    "DEFINITION",
    "LLMEvalResult",
    "MORAL_WORD_TO_LABEL",
    "NONE",
    "OpenAICompatibleClient",
    "ParsedPrediction",
    "PromptTemplate",
    "ResponseCache",
    "TEMPLATES",
    "TEMPLATE_IDS",
    "get_template",
    "parse_response",
    "render_prompt",
    "run_eval",
    "synthetic_response",
    "with_retries",
]
