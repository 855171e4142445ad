"""Parsing, classification, and normalization contracts."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from vqakit.errors import ConfigError, DataError
from vqakit.ingest import (
    QUESTION_TYPES,
    BBox,
    CanonicalQA,
    ImageRef,
    classify_question,
    normalize_answer,
    parse_source,
)

# Exemplar questions with their expected taxonomy labels.
LABELLED_QUESTIONS = [
    ("What kind of flowers are on the picture to the left?", "Object"),
    ("Is the sun shining?", "YesNo"),
    ("How many vases are there?", "Counting"),
    ("What color is the truck?", "Color"),
    ("What type of tree is on the right?", "Attribute"),
    ("What number is written on the sheep?", "Number"),
    ("What does the woman have on her back?", "Relation"),
    ("What are the people doing?", "Action"),
    ("What does the second sign say?", "Other"),
]


class TestClassifyQuestion:
    @pytest.mark.parametrize("question,expected", LABELLED_QUESTIONS)
    def test_labelled_exemplars(self, question, expected):
        assert classify_question(question) == expected

    def test_priority_is_fixed_for_mixed_cues(self):
        # Color cue outranks the action pattern in the documented order.
        assert classify_question("What color is the man doing?") == "Color"
        assert classify_question("How many people are doing yoga?") == "Counting"

    @given(st.text(min_size=1, max_size=80))
    def test_total_function(self, question):
        assert classify_question(question) in QUESTION_TYPES

    def test_misc_fallthrough(self):
        assert classify_question("Who is wearing the hat?") == "Other"
        assert classify_question("Where is the cat?") == "Other"
        assert classify_question("How old is this man?") == "Other"


class TestNormalizeAnswer:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("Six", "6"),
            ("roses.", "roses"),
            ("  YES ", "yes"),
            ("twenty", "20"),
            ("thirty", "30"),
            ("one hundred", "100"),
            ("twenty-one", "twenty-one"),
            ("6", "6"),
            ("No,", "no"),
        ],
    )
    def test_examples(self, raw, expected):
        assert normalize_answer(raw) == expected

    @given(st.text(max_size=60))
    def test_idempotent(self, text):
        once = normalize_answer(text)
        assert normalize_answer(once) == once

    @given(st.text(alphabet="abz912 .!?", min_size=1, max_size=30))
    def test_nonempty_when_alnum_present(self, text):
        if any(c.isalnum() for c in text):
            assert normalize_answer(text) != ""


class TestTypesInvariants:
    def test_image_ref_rejects_bad_dims(self):
        with pytest.raises(DataError):
            ImageRef(id="x", uri="x.jpg", width=0)
        with pytest.raises(DataError):
            ImageRef(id="", uri="x.jpg")

    def test_bbox_ordering(self):
        with pytest.raises(DataError):
            BBox(10, 10, 10, 20)
        with pytest.raises(DataError):
            BBox(-1, 0, 5, 5)
        BBox(0, 0, 5, 5)

    def test_bbox_must_fit_image(self):
        image = ImageRef(id="i", uri="i.jpg", width=100, height=100)
        with pytest.raises(DataError):
            CanonicalQA(
                record_id="refcoco:1",
                image=image,
                question="the thing",
                answer="the thing",
                question_type="Other",
                source="refcoco",
                bbox=BBox(0, 0, 150, 50),
            )

    def test_choices_answer_consistency(self):
        image = ImageRef(id="i", uri="i.jpg")
        with pytest.raises(DataError):
            CanonicalQA(
                record_id="aokvqa:1",
                image=image,
                question="Which one?",
                answer="b",
                question_type="Object",
                source="aokvqa",
                choices=["a", "b", "c", "d"],
                correct_index=0,
            )


def _write_lines(path, entries):
    path.write_text("".join(json.dumps(e) + "\n" for e in entries), encoding="utf-8")
    return path


class TestParseSource:
    def test_three_valid_entries_and_stable_ids(self, tmp_path):
        path = _write_lines(
            tmp_path / "src.jsonl",
            [
                {"id": f"q{i}", "image": f"im{i}.jpg", "question": f"Is the door {i} open?", "answer": "yes"}
                for i in range(3)
            ],
        )
        first = list(parse_source(path, "canonical"))
        second = list(parse_source(path, "canonical"))
        assert len(first) == 3
        assert [r.record_id for r in first] == [r.record_id for r in second]
        assert [r.to_dict() for r in first] == [r.to_dict() for r in second]

    def test_empty_answer_routed_to_error_report(self, tmp_path):
        path = _write_lines(
            tmp_path / "src.jsonl",
            [
                {"id": "a", "image": "1.jpg", "question": "Is it red?", "answer": "yes"},
                {"id": "b", "image": "2.jpg", "question": "Is it big?", "answer": ""},
                {"id": "c", "image": "3.jpg", "question": "Is it old?", "answer": "no"},
            ],
        )
        issues = []
        records = list(parse_source(path, "canonical", on_error=issues.append))
        assert len(records) == 2
        assert len(issues) == 1
        assert issues[0].line_no == 2
        assert "answer" in issues[0].message or issues[0].field == "answer"

    def test_refcoco_fixture_matches_independent_parse(self, tmp_path):
        # Independent oracle: a one-off literal parse of the same fixture line.
        entry = {
            "ref_id": 77,
            "image": {"id": "imgX", "uri": "imgX.jpg", "width": 500, "height": 400},
            "expression": "the red mug on the table",
            "bbox": [10, 20, 110, 220],
        }
        path = _write_lines(tmp_path / "ref.jsonl", [entry])
        [record] = list(parse_source(path, "refcoco"))

        oracle = json.loads(path.read_text().splitlines()[0])
        assert record.record_id == f"refcoco:{oracle['ref_id']}"
        assert record.bbox.to_list() == [float(v) for v in oracle["bbox"]]
        assert record.bbox.to_list() == [10.0, 20.0, 110.0, 220.0]
        assert record.image.width == 500 and record.image.height == 400
        assert record.question == oracle["expression"]

    def test_unknown_format_is_config_error(self, tmp_path):
        path = _write_lines(tmp_path / "x.jsonl", [])
        with pytest.raises(ConfigError):
            list(parse_source(path, "nope"))

    def test_missing_file_is_data_error(self, tmp_path):
        with pytest.raises(DataError):
            list(parse_source(tmp_path / "absent.jsonl", "canonical"))

    def test_duplicate_ids_reported(self, tmp_path):
        path = _write_lines(
            tmp_path / "dup.jsonl",
            [
                {"id": "same", "image": "1.jpg", "question": "Is it;?", "answer": "yes"},
                {"id": "same", "image": "2.jpg", "question": "Is it?", "answer": "no"},
            ],
        )
        issues = []
        records = list(parse_source(path, "canonical", on_error=issues.append))
        assert len(records) == 1
        assert len(issues) == 1

    def test_vqa2_and_aokvqa_adapters(self, tmp_path):
        vqa_path = _write_lines(
            tmp_path / "vqa.jsonl",
            [{"question_id": 5, "image": "COCO_5.jpg", "question": "How many dogs?", "answer": "two"}],
        )
        [record] = list(parse_source(vqa_path, "vqa2"))
        assert record.record_id == "vqa2:5"
        assert record.question_type == "Counting"

        mc_path = _write_lines(
            tmp_path / "mc.jsonl",
            [
                {
                    "question_id": 9,
                    "image": "m.jpg",
                    "question": "Which fruit is shown?",
                    "choices": ["apple", "pear", "plum", "fig"],
                    "correct_choice_idx": 2,
                }
            ],
        )
        [mc] = list(parse_source(mc_path, "aokvqa"))
        assert mc.answer == "plum"
        assert mc.choices == ["apple", "pear", "plum", "fig"]
