import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentrag.parsing import NoJSONFound, balanced_span, extract_json


def reference_first_list(text: str):
    """Independent oracle: raw_decode at every '[' until a string list decodes."""
    dec = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch != "[":
            continue
        try:
            value, _ = dec.raw_decode(text, i)
        except ValueError:
            continue
        if isinstance(value, list) and all(isinstance(x, str) for x in value):
            return value
    return None


def is_str_list(v):
    return isinstance(v, list) and all(isinstance(x, str) for x in v)


def test_bare_json():
    assert extract_json('["a", "b"]') == ["a", "b"]
    assert extract_json('  {"x": 1}\n') == {"x": 1}


def test_fenced_block_wins_over_later_spans():
    raw = 'Here is the plan:\n```json\n["one", "two"]\n```\nAlso [1, 2].'
    assert extract_json(raw, is_str_list) == ["one", "two"]


def test_balanced_span_with_brackets_in_strings():
    raw = 'Plan follows ["step [a]", "say \\"hi]\\""] trailing'
    assert extract_json(raw, is_str_list) == ["step [a]", 'say "hi]"']
    assert balanced_span(raw, raw.index("[")) == '["step [a]", "say \\"hi]\\""]'


def test_unbalanced_returns_none():
    assert balanced_span('["never closed', 0) is None


def test_nothing_found():
    with pytest.raises(NoJSONFound):
        extract_json("no structure here at all")


def test_accept_filter_skips_wrong_shape():
    raw = 'first {"note": 1} then ["real"]'
    assert extract_json(raw, is_str_list) == ["real"]


def test_prose_and_fence_matches_reference():
    raw = (
        "Let me think about the question first. The director must be found, then the nationality.\n"
        "```\n[\"Find the director of Jaws\", \"Find that director's nationality\"]\n```"
    )
    assert extract_json(raw, is_str_list) == reference_first_list(raw)


json_str = st.text(st.characters(blacklist_categories=("Cs",)), max_size=12)
prose = st.text(st.characters(blacklist_characters="[]{}`\"\\", blacklist_categories=("Cs",)), max_size=40)


@settings(max_examples=300, deadline=None)
@given(prose, st.lists(json_str, min_size=1, max_size=5), prose, st.booleans())
def test_matches_reference_parser(before, items, after, fenced):
    body = json.dumps(items)
    raw = f"{before}\n```json\n{body}\n```\n{after}" if fenced else f"{before} {body} {after}"
    assert extract_json(raw, is_str_list) == reference_first_list(raw) == items
