import json
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from docground.geometry import PromptBox, from_prompt_box
from docground.parsing import (
    JsonExtractError,
    Prediction,
    extract_json_object,
    parse_prediction,
)

DATA = Path(__file__).parent / "data"
NOISY_CASES = json.loads((DATA / "noisy_cases.json").read_text(encoding="utf-8"))


def test_extract_json_object_passthrough():
    raw = '{"content":"42","position":[1,2,3,4]}'
    assert extract_json_object(raw) == raw


def test_extract_json_object_from_fence_and_prose():
    raw = 'Sure! ```json\n{"content":"42","position":[1,2,3,4]}\n``` hope that helps'
    assert json.loads(extract_json_object(raw)) == {"content": "42", "position": [1, 2, 3, 4]}


def test_extract_json_object_respects_string_escapes():
    raw = '{"content":"a \\"quoted\\" value","position":[0,0,1,1]}'
    assert extract_json_object(raw) == raw


def test_extract_json_object_failure():
    with pytest.raises(JsonExtractError):
        extract_json_object("no braces here")
    with pytest.raises(JsonExtractError):
        extract_json_object("{unclosed")


def test_prediction_serialization():
    p = parse_prediction('{"content": "42", "position": [10, 20, 30, 40]}')
    assert p.to_json_dict() == {
        "content": "42",
        "box": [0.01, 0.02, 0.04, 0.06],
        "status": "clean",
    }
    q = parse_prediction("just words")
    assert q.to_json_dict() == {"content": "just words", "box": None, "status": "text_only"}


@pytest.mark.parametrize("case", NOISY_CASES, ids=[c["name"] for c in NOISY_CASES])
def test_noisy_case(case):
    p = parse_prediction(case["raw"])
    assert p.status == case["status"]
    assert p.content == case["content"]
    if case["box"] is None:
        assert p.box is None
    else:
        assert p.box is not None
        assert p.box.as_list() == pytest.approx(case["box"], abs=1e-12)
    assert p.raw == case["raw"]


def test_noisy_suite_recovery_rate():
    ok = sum(1 for c in NOISY_CASES if c["status"] in ("clean", "recovered"))
    assert len(NOISY_CASES) == 50
    assert ok >= 45


def test_status_invariants_hold_on_fixture():
    for case in NOISY_CASES:
        p = parse_prediction(case["raw"])
        if p.status in ("clean", "recovered"):
            assert p.content  # nonempty by contract
        if p.box is not None:
            x1, y1, x2, y2 = p.box.as_tuple()
            assert 0 <= x1 <= x2 <= 1 and 0 <= y1 <= y2 <= 1


@given(st.text(max_size=200))
def test_parse_prediction_is_total(raw):
    p = parse_prediction(raw)
    assert isinstance(p, Prediction)
    assert p.status in ("clean", "recovered", "text_only", "failed")


@st.composite
def prompt_boxes(draw):
    x = draw(st.integers(0, 1000))
    y = draw(st.integers(0, 1000))
    w = draw(st.integers(0, 1000 - x))
    h = draw(st.integers(0, 1000 - y))
    return PromptBox(x, y, w, h)


@given(prompt_boxes(), st.text(min_size=1, max_size=40).filter(str.strip))
def test_canonical_json_round_trips_with_geometry(pb, content):
    raw = json.dumps({"content": content, "position": pb.as_list()})
    p = parse_prediction(raw)
    expected, clamped = from_prompt_box(pb)
    assert not clamped
    assert p.status == "clean"
    assert p.content == content
    assert p.box == expected
