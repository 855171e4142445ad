"""Shared fixture corpus builders: deterministic desk-scale synthetic data."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from vqakit.evalqa import NegativeCandidate
from vqakit.ingest import BBox, CanonicalQA, ImageRef, classify_question

NOUNS = ("vase", "plate", "cup", "window", "door", "pillow", "towel", "box")
PEOPLE = ("man", "woman", "boy", "girl")
COLORS = ("red", "blue", "green", "yellow", "silver", "white", "black", "brown")
HELD_OBJECTS = ("phone", "book", "ball", "pen", "camera", "remote", "toy", "brush")
ACTIONS = ("reading", "cooking", "painting", "jumping", "dancing", "sleeping", "surfing", "typing")
TREE_TYPES = ("cherry", "palm", "oak", "pine", "maple", "birch", "willow", "cedar")


def make_image(i: int, width: int = 640, height: int = 480, split: str = "train") -> ImageRef:
    return ImageRef(id=f"{split}-img{i}", uri=f"images/{split}-img{i}.jpg", width=width, height=height)


def make_record(i: int, split: str = "train", questions_per_image: int = 2) -> CanonicalQA:
    """One synthetic generic-VQA record; question style cycles through the taxonomy."""
    image = make_image(i // questions_per_image, split=split)
    style = i % 8
    noun = NOUNS[i % len(NOUNS)]
    person = PEOPLE[i % len(PEOPLE)]
    if style == 0:
        question = f"How many {noun}s are there?"
        answer = str(i % 12)
    elif style == 1:
        question = f"Is the {noun} open?"
        answer = "yes" if i % 2 == 0 else "no"
    elif style == 2:
        question = f"What color is the {noun}?"
        answer = COLORS[i % len(COLORS)]
    elif style == 3:
        question = f"What is the {person} holding?"
        answer = HELD_OBJECTS[i % len(HELD_OBJECTS)]
    elif style == 4:
        question = f"What is the {person} doing?"
        answer = ACTIONS[i % len(ACTIONS)]
    elif style == 5:
        question = f"What number is written on the {noun}?"
        answer = str(i % 10)
    elif style == 6:
        question = f"What type of tree is behind the {noun}?"
        answer = TREE_TYPES[i % len(TREE_TYPES)]
    else:
        question = f"What does the {noun} label say?"
        answer = f"brand{i % 5}"
    return CanonicalQA(
        record_id=f"canonical:{split}-{i:04d}",
        image=image,
        question=question,
        answer=answer,
        question_type=classify_question(question),
        source="canonical",
        split=split,
    )


def make_corpus(n: int, split: str = "train", questions_per_image: int = 2) -> list[CanonicalQA]:
    return [make_record(i, split=split, questions_per_image=questions_per_image) for i in range(n)]


def make_mc_record(i: int, split: str = "train") -> CanonicalQA:
    choices = [HELD_OBJECTS[(i + k) % len(HELD_OBJECTS)] for k in range(4)]
    correct = i % 4
    question = f"Which item is on the shelf number {i}?"
    return CanonicalQA(
        record_id=f"aokvqa:mc-{split}-{i:04d}",
        image=make_image(1000 + i, split=split),
        question=question,
        answer=choices[correct],
        question_type=classify_question(question),
        source="aokvqa",
        choices=choices,
        correct_index=correct,
        split=split,
    )


def make_grounding_record(i: int, split: str = "train") -> CanonicalQA:
    width, height = 640, 480
    x1, y1 = 10 + (i * 7) % 300, 20 + (i * 11) % 200
    box = BBox(x1, y1, x1 + 100 + i % 50, y1 + 80 + i % 40)
    expression = f"the {COLORS[i % len(COLORS)]} {NOUNS[i % len(NOUNS)]} near the edge"
    return CanonicalQA(
        record_id=f"refcoco:g-{split}-{i:04d}",
        image=make_image(2000 + i, width=width, height=height, split=split),
        question=expression,
        answer=expression,
        question_type="Other",
        source="refcoco",
        bbox=box,
        split=split,
    )


def make_approved_candidate(record: CanonicalQA, negative: str | None = None) -> NegativeCandidate:
    """Approved candidate shortcut for split-assembly tests."""
    if negative is None:
        if record.question_type == "YesNo":
            negative = "yes" if record.answer == "no" else "no"
        elif record.question_type in ("Counting", "Number"):
            negative = str((int(record.answer) + 3) % 21)
        else:
            negative = f"not-{record.answer}"
    return NegativeCandidate(
        candidate_id=f"cand:{record.record_id}",
        base=record,
        negative_answer=negative,
        raw_generation=negative,
        feedback=f"No, the answer is {record.answer}.",
        status="Approved",
        provenance={"positive_statement": f"the answer is {record.answer}"},
    )


def write_canonical_fixture(records: list[CanonicalQA], path: Path) -> Path:
    """Write records in the canonical line-delimited ingest format."""
    lines = []
    for record in records:
        entry = {
            "id": record.record_id.split(":", 1)[1],
            "image": record.image.to_dict(),
            "question": record.question,
            "answer": record.answer,
            "split": record.split,
        }
        if record.bbox is not None:
            entry["bbox"] = record.bbox.to_list()
            entry["source"] = record.source
        if record.choices is not None:
            entry["choices"] = record.choices
            entry["correct_index"] = record.correct_index
        lines.append(json.dumps(entry, ensure_ascii=False))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


@pytest.fixture
def small_corpus() -> list[CanonicalQA]:
    return make_corpus(24)


@pytest.fixture
def grounded_corpus() -> list[CanonicalQA]:
    return [make_grounding_record(i) for i in range(8)]
