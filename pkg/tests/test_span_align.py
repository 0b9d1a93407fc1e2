import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from rationale_attention.corpus import Instance, MoralLabel, RationaleAnnotation
from rationale_attention.errors import EmptyRationale, TokenizerError
from rationale_attention.span_align import (
    WordTokenizer,
    instance_mask,
    mask_to_spans,
    normalize_mask,
    spans_to_mask,
    tokenize_with_offsets,
)

TOK = WordTokenizer(["abc", "def"])


def _content(tok, values):
    return [int(v) for v, ok in zip(values, tok.validity) if ok]


def _covered_oracle(tok, spans):
    """Brute force: a valid token is marked iff it shares a character with a span."""
    chars = {c for s, e in spans for c in range(s, e)}
    return [int(ok and any(c in chars for c in range(ts, te)))
            for (ts, te), ok in zip(tok.offsets, tok.validity)]


def test_layout_and_padding():
    tok = tokenize_with_offsets("abc def", TOK, max_len=6)
    assert tok.token_ids == [TOK.cls_id, 4, 5, TOK.sep_id, TOK.pad_id, TOK.pad_id]
    assert tok.validity == [False, True, True, False, False, False]
    assert tok.offsets[1:3] == [(0, 3), (4, 7)]
    assert not tok.truncated


def test_empty_text():
    tok = tokenize_with_offsets("", TOK, max_len=4)
    assert len(tok) == 4 and tok.n_valid == 0


def test_truncation_keeps_specials():
    tok = tokenize_with_offsets("abc def abc def", TOK, max_len=4)
    assert len(tok) == 4 and tok.truncated
    assert tok.token_ids[0] == TOK.cls_id and tok.token_ids[-1] == TOK.sep_id
    assert tok.kept_char_end == 7


def test_max_len_too_small():
    with pytest.raises(ValueError):
        tokenize_with_offsets("abc", TOK, max_len=1)


def test_missing_offsets():
    class Broken(WordTokenizer):
        def encode_content(self, text):
            return [4], None

    with pytest.raises(TokenizerError):
        tokenize_with_offsets("abc", Broken(["abc"]), max_len=8)


@pytest.mark.parametrize("span,expected", [((4, 7), [0, 1]), ((2, 5), [1, 1])])
def test_spans_to_mask_examples(span, expected):
    tok = tokenize_with_offsets("abc def", TOK, max_len=8)
    mask = spans_to_mask(tok, [span])
    assert _content(tok, mask.values) == expected
    assert list(mask.values) == _covered_oracle(tok, [span])
    assert mask.values[0] == 0 and mask.values[-1] == 0


def test_span_in_truncated_tail():
    tok = tokenize_with_offsets("abc def abc def", TOK, max_len=4)
    mask = spans_to_mask(tok, [(12, 15)])
    assert mask.total == 0 and mask.truncated_rationale


def test_mask_to_spans():
    tok = tokenize_with_offsets("abc def", TOK, max_len=8)
    assert mask_to_spans(tok, spans_to_mask(tok, [(0, 3), (4, 7)])) == [(0, 7)]
    assert mask_to_spans(tok, spans_to_mask(tok, [(4, 7)])) == [(4, 7)]
    assert mask_to_spans(tok, np.zeros(len(tok), dtype=int)) == []
    with pytest.raises(ValueError):
        mask_to_spans(tok, [1, 1])


@pytest.mark.parametrize("r,expected", [([0, 1, 0, 1], [0, 0.5, 0, 0.5]), ([1, 0, 0], [1, 0, 0])])
def test_normalize_mask(r, expected):
    assert normalize_mask(r).tolist() == expected


def test_normalize_mask_empty():
    with pytest.raises(EmptyRationale):
        normalize_mask([0, 0, 0])


def test_instance_mask_per_task():
    text = "abc def abc"
    anns = (RationaleAnnotation(MoralLabel.HN, 1, ((0, 3),)), RationaleAnnotation(MoralLabel.FN, 2, ((4, 7),)))
    inst = Instance("i", text, "Hate", anns)
    tok = tokenize_with_offsets(text, TOK, max_len=8)
    assert _content(tok, instance_mask(inst, tok, "hate").values) == [1, 1, 0]
    assert _content(tok, instance_mask(inst, tok, "moral").values) == [1, 0, 0]
    assert _content(tok, instance_mask(inst, tok, "moral", target="FN").values) == [0, 1, 0]
    assert _content(tok, instance_mask(inst, tok, "moral", target="AN").values) == [0, 0, 0]


@st.composite
def text_and_spans(draw):
    text = draw(st.text(alphabet="ab ,é", min_size=1, max_size=30))
    n = draw(st.integers(1, 3))
    spans = []
    for _ in range(n):
        s = draw(st.integers(0, len(text) - 1))
        e = draw(st.integers(s + 1, len(text)))
        spans.append((s, e))
    return text, spans


@settings(max_examples=200, deadline=None)
@given(text_and_spans())
def test_alignment_properties(data):
    text, spans = data
    tokenizer = WordTokenizer.fit([text])
    tok = tokenize_with_offsets(text, tokenizer, max_len=64)
    assume(not tok.truncated)
    mask = spans_to_mask(tok, spans)
    assert list(mask.values) == _covered_oracle(tok, spans)

    # whitespace belongs to no token, so only token characters are checked
    token_chars = {c for (s, e), ok in zip(tok.offsets, tok.validity) if ok for c in range(s, e)}
    marked = {c for (s, e), v in zip(tok.offsets, mask.values) if v for c in range(s, e)}
    span_chars = {c for s, e in spans for c in range(s, e)}
    assert span_chars & token_chars <= marked

    back = {c for s, e in mask_to_spans(tok, mask) for c in range(s, e)}
    assert span_chars & token_chars <= back

    if mask.total:
        dist = normalize_mask(mask)
        assert (dist >= 0).all() and abs(dist.sum() - 1) <= 1e-9
