"""
Response parsing: segment lists, procedure labels, order and missing-event verdicts
"""

import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.models.responses import RawModelResponse, Task
from src.core.services.parser import (
    extract_structured,
    parse_bool,
    parse_missing_verdict,
    parse_order_verdict,
    parse_procedure_label,
    parse_segment_list,
    parse_time,
)

ADVERSARIAL = Path(__file__).parent.parent / "fixtures" / "adversarial_responses.json"


def response(text, task=Task.DENSE_CAPTION, item="v01"):
    return RawModelResponse(request_id=f"{task.value}:{item}", task=task, video_id=item, text=text)


def adversarial_cases():
    cases = json.loads(ADVERSARIAL.read_text(encoding="utf-8"))["cases"]
    return [pytest.param(case, id=case["case_id"]) for case in cases]


class TestParseTime:
    @pytest.mark.parametrize(
        "value,seconds",
        [(12, 12.0), (12.5, 12.5), ("12.5", 12.5), ("12.5s", 12.5), ("01:05", 65.0),
         ("1:02:03", 3723.0), ("00:04.5", 4.5)],
    )
    def test_accepted(self, value, seconds):
        assert parse_time(value) == pytest.approx(seconds)

    @pytest.mark.parametrize(
        "value",
        [-1, "1,5", "abc", None, True, "", [1], 10**400, float("inf"), float("nan"), "²", "1" * 400],
    )
    def test_rejected(self, value):
        assert parse_time(value) is None


@pytest.mark.parametrize(
    "value,expected",
    [(True, True), ("yes", True), ("Correct.", True), (1, True),
     ("no", False), ("incorrect", False), (0, False), ("maybe", None), (2, None)],
)
def test_parse_bool(value, expected):
    assert parse_bool(value) is expected


class TestExtractStructured:
    def test_whole_text(self):
        assert extract_structured('{"a": 1}') == {"a": 1}

    def test_fenced_block(self):
        assert extract_structured('prose\n```json\n[1, 2]\n```\nmore') == [1, 2]

    def test_bracketed_span_inside_prose(self):
        assert extract_structured('The answer is {"is_correct": true} as shown') == {"is_correct": True}

    def test_nothing_structured(self):
        assert extract_structured("0 - 4: hand hygiene") is None

    def test_scalar_json_ignored(self):
        assert extract_structured("42") is None

    def test_integer_past_digit_limit_is_skipped(self):
        assert extract_structured('{"start": ' + "1" * 5000 + "}") is None

    def test_deep_nesting_is_skipped(self):
        assert extract_structured("[" * 100_000 + "]" * 100_000) is None


class TestSegmentList:
    def test_seconds_line(self):
        result = parse_segment_list(response("12.0 - 18.5: cleans the skin with an alcohol swab"))
        (segment,) = result.segments
        assert (segment.start, segment.end) == (12.0, 18.5)
        assert segment.caption == "cleans the skin with an alcohol swab"
        assert result.malformed == 0

    def test_clock_line(self):
        (segment,) = parse_segment_list(response("00:05 to 00:09: dons sterile gloves")).segments
        assert (segment.start, segment.end) == (5.0, 9.0)
        assert segment.caption == "dons sterile gloves"

    def test_prose_counts_one_malformed(self):
        result = parse_segment_list(response("the nurse prepares the tray"))
        assert result.segments == []
        assert result.malformed == 1
        assert result.failed

    def test_segments_sorted_by_start(self):
        result = parse_segment_list(response("5 - 8: second\n0 - 5: first"))
        assert [s.caption for s in result.segments] == ["first", "second"]

    def test_missing_text_is_empty_result(self):
        failed = RawModelResponse(
            request_id="dense_caption:v01", task=Task.DENSE_CAPTION, video_id="v01",
            status="failed", text=None, error="timeout",
        )
        result = parse_segment_list(failed)
        assert result.segments == []
        assert result.malformed == 0

    def test_rejects_verdict_tasks(self):
        with pytest.raises(ValueError):
            parse_segment_list(response("0 - 4: x", task=Task.ORDER_CORRECTION))

    def test_clock_aliases_in_structured_items(self):
        text = '{"events": [{"start_time": "00:01", "end_time": "00:04.5", "description": "hand hygiene"}]}'
        (segment,) = parse_segment_list(response(text)).segments
        assert (segment.start, segment.end) == (1.0, 4.5)


class TestProcedureLabel:
    def test_label_line(self):
        text = "Procedure: venipuncture\n0 - 4: hand hygiene"
        assert parse_procedure_label(response(text, Task.PROCEDURE_ID)) == "venipuncture"

    def test_structured_label(self):
        text = '{"procedure": "wound care", "segments": []}'
        assert parse_procedure_label(response(text, Task.PROCEDURE_ID)) == "wound care"

    def test_bare_single_line(self):
        assert parse_procedure_label(response("Wound care.", Task.PROCEDURE_ID)) == "Wound care"

    def test_no_label(self):
        text = "0 - 4: hand hygiene\n4 - 9: applies tourniquet"
        assert parse_procedure_label(response(text, Task.PROCEDURE_ID)) is None


class TestOrderVerdict:
    def test_structured_full(self):
        text = '{"is_correct": false, "misplaced": [1, 3], "corrected_order": [0, 3, 2, 1], "reasoning": "swap"}'
        verdict = parse_order_verdict(response(text, Task.ORDER_CORRECTION), segment_count=4)
        assert verdict.is_correct is False
        assert verdict.misplaced == [1, 3]
        assert verdict.corrected_order == [0, 3, 2, 1]
        assert verdict.reasoning == "swap"

    def test_correct_has_no_misplaced(self):
        text = '{"is_correct": true, "misplaced": [2]}'
        verdict = parse_order_verdict(response(text, Task.ORDER_CORRECTION), segment_count=4)
        assert verdict.is_correct is True
        assert verdict.misplaced == []

    def test_keyword_positive_yields_identity_order(self):
        verdict = parse_order_verdict(response("The sequence is correct.", Task.ORDER_CORRECTION), segment_count=3)
        assert verdict.corrected_order == [0, 1, 2]

    def test_wrong_size_permutation_dropped(self):
        text = '{"is_correct": false, "misplaced": [0, 1], "corrected_order": [1, 0]}'
        verdict = parse_order_verdict(response(text, Task.ORDER_CORRECTION), segment_count=4)
        assert verdict.corrected_order is None

    def test_abstention(self):
        verdict = parse_order_verdict(response("asdf qwerty", Task.ORDER_CORRECTION), segment_count=4)
        assert verdict.abstained
        assert verdict.reasoning == "asdf qwerty"

    @pytest.mark.parametrize(
        "text",
        ["The steps are not in chronological order.", "The sequence isn't correct.",
         "This is never in the right order.", "The segments are not ordered correctly."],
    )
    def test_negated_positive_phrases(self, text):
        verdict = parse_order_verdict(response(text, Task.ORDER_CORRECTION), segment_count=4)
        assert verdict.is_correct is False

    def test_unusable_structured_answer_abstains(self):
        text = '{"misplaced": ["²"], "note": "segments are misplaced"}'
        assert parse_order_verdict(response(text, Task.ORDER_CORRECTION), segment_count=4).abstained

    def test_oversized_segment_reference_ignored(self):
        text = "Incorrect: segments 1 and " + "9" * 5000
        verdict = parse_order_verdict(response(text, Task.ORDER_CORRECTION))
        assert verdict.misplaced == [1]


class TestMissingVerdict:
    def test_structured_with_interval(self):
        text = '{"has_missing": true, "start": 5, "end": 8, "caption": "applies tourniquet"}'
        verdict = parse_missing_verdict(response(text, Task.MISSING_EVENT))
        assert verdict.has_missing is True
        assert verdict.predicted_caption == "applies tourniquet"
        assert (verdict.predicted_interval.start, verdict.predicted_interval.end) == (5.0, 8.0)

    def test_structured_complete_flag(self):
        verdict = parse_missing_verdict(response('{"is_complete": true}', Task.MISSING_EVENT))
        assert verdict.has_missing is False

    def test_caption_without_times(self):
        verdict = parse_missing_verdict(response("Missing step: applies tourniquet", Task.MISSING_EVENT))
        assert verdict.has_missing is True
        assert verdict.predicted_caption == "applies tourniquet"
        assert verdict.predicted_interval is None

    def test_timed_line_in_prose(self):
        text = "Something is missing here.\n5 - 8: applies tourniquet"
        verdict = parse_missing_verdict(response(text, Task.MISSING_EVENT))
        assert verdict.predicted_caption == "applies tourniquet"
        assert verdict.predicted_interval.start == 5.0

    def test_claim_without_caption_abstains(self):
        assert parse_missing_verdict(response("A step is missing.", Task.MISSING_EVENT)).abstained


@pytest.mark.parametrize("case", adversarial_cases())
def test_adversarial_responses(case):
    task = Task(case["task"])
    expect = case["expect"]
    raw = response(case["text"], task)

    if task in (Task.DENSE_CAPTION, Task.PROCEDURE_ID):
        result = parse_segment_list(raw)
        assert len(result.segments) == expect["segments"]
        assert result.malformed == expect["malformed"]
        assert result.strategy == expect["strategy"]
        if "label" in expect:
            assert parse_procedure_label(raw) == expect["label"]
    elif task is Task.ORDER_CORRECTION:
        verdict = parse_order_verdict(raw, segment_count=case["segment_count"])
        assert verdict.abstained is expect["abstained"]
        assert verdict.is_correct is expect["is_correct"]
        assert verdict.misplaced == expect["misplaced"]
    else:
        verdict = parse_missing_verdict(raw)
        assert verdict.abstained is expect["abstained"]
        assert verdict.has_missing is expect["has_missing"]
        start = verdict.predicted_interval.start if verdict.predicted_interval else None
        assert start == expect["start"]


def test_adversarial_fixture_size():
    assert len(adversarial_cases()) >= 50


json_values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.floats() | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4) | st.dictionaries(
        st.sampled_from(["start", "end", "caption", "segments", "misplaced", "corrected_order",
                         "is_correct", "has_missing", "procedure", "interval"]),
        children, max_size=5,
    ),
    max_leaves=15,
)
hostile_texts = st.one_of(
    st.text(max_size=300),
    json_values.map(lambda value: json.dumps(value, ensure_ascii=False)),
    st.lists(st.sampled_from(["0 - 4:", " ", "\n", "missing", "not", "in order", "correct", "segment", "²", "{", "]",
                              "1" * 30, ":", "step:", "99999"]), max_size=30).map("".join),
)


@given(hostile_texts, st.one_of(st.none(), st.integers(1, 6)))
@settings(max_examples=500, deadline=None)
def test_parsers_never_raise_on_response_text(text, segment_count):
    for task in (Task.DENSE_CAPTION, Task.PROCEDURE_ID):
        result = parse_segment_list(response(text, task))
        assert result.malformed >= 0
    parse_procedure_label(response(text, Task.PROCEDURE_ID))
    verdict = parse_order_verdict(response(text, Task.ORDER_CORRECTION), segment_count=segment_count)
    if segment_count is not None:
        assert all(0 <= i < segment_count for i in verdict.misplaced)
    parse_missing_verdict(response(text, Task.MISSING_EVENT))
