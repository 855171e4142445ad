"""Source-corpus ingestion into canonical image-question-answer records.

Each supported source family has its own line-delimited fixture schema (one
JSON object per line) so that desk-scale fixtures stand in for the multi-GB
originals. All adapters converge on :class:`CanonicalQA`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

from .errors import ConfigError, DataError

QUESTION_TYPES = (
    "Object",
    "YesNo",
    "Counting",
    "Color",
    "Attribute",
    "Number",
    "Relation",
    "Action",
    "Other",
)

SOURCE_FORMATS = ("vqa2", "gqa", "ocrvqa", "aokvqa", "refcoco", "vg", "canonical")
GROUNDING_SOURCES = ("refcoco", "vg")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ImageRef:
    """Opaque reference to an image; pixels are never touched."""

    id: str
    uri: str
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        if not self.id:
            raise DataError("image id must be non-empty")
        for name, value in (("width", self.width), ("height", self.height)):
            if value is not None and value <= 0:
                raise DataError(f"image {name} must be positive, got {value}")

    def to_dict(self) -> dict:
        out = {"id": self.id, "uri": self.uri}
        if self.width is not None:
            out["width"] = self.width
        if self.height is not None:
            out["height"] = self.height
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ImageRef":
        return cls(id=d["id"], uri=d.get("uri", d["id"]), width=d.get("width"), height=d.get("height"))


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, corners (x1, y1) < (x2, y2)."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (0 <= self.x1 < self.x2 and 0 <= self.y1 < self.y2):
            raise DataError(f"degenerate bbox ({self.x1}, {self.y1}, {self.x2}, {self.y2})")

    def check_bounds(self, width: int | None, height: int | None) -> None:
        if width is not None and self.x2 > width:
            raise DataError(f"bbox x2={self.x2} exceeds image width {width}")
        if height is not None and self.y2 > height:
            raise DataError(f"bbox y2={self.y2} exceeds image height {height}")

    def to_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


@dataclass
class CanonicalQA:
    """One normalized image-question-answer record."""

    record_id: str
    image: ImageRef
    question: str
    answer: str
    question_type: str
    source: str
    bbox: BBox | None = None
    choices: list[str] | None = None
    correct_index: int | None = None
    split: str = "train"

    def __post_init__(self):
        if not self.question.strip():
            raise DataError(f"{self.record_id}: empty question")
        if not self.answer.strip():
            raise DataError(f"{self.record_id}: empty answer")
        if self.question_type not in QUESTION_TYPES:
            raise DataError(f"{self.record_id}: unknown question type {self.question_type!r}")
        if self.split not in SPLITS:
            raise DataError(f"{self.record_id}: unknown split {self.split!r}")
        if self.choices is not None:
            if len(self.choices) != 4:
                raise DataError(f"{self.record_id}: expected 4 choices, got {len(self.choices)}")
            if self.correct_index is None or not 0 <= self.correct_index <= 3:
                raise DataError(f"{self.record_id}: correct_index must be in [0, 3]")
            if self.answer != self.choices[self.correct_index]:
                raise DataError(f"{self.record_id}: answer does not match choices[{self.correct_index}]")
        if (self.source in GROUNDING_SOURCES) != (self.bbox is not None):
            raise DataError(f"{self.record_id}: bbox present iff source is a grounding corpus")
        if self.bbox is not None:
            self.bbox.check_bounds(self.image.width, self.image.height)

    def to_dict(self) -> dict:
        out = {
            "record_id": self.record_id,
            "image": self.image.to_dict(),
            "question": self.question,
            "answer": self.answer,
            "question_type": self.question_type,
            "source": self.source,
            "split": self.split,
        }
        if self.bbox is not None:
            out["bbox"] = self.bbox.to_list()
        if self.choices is not None:
            out["choices"] = list(self.choices)
            out["correct_index"] = self.correct_index
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CanonicalQA":
        bbox = BBox(*d["bbox"]) if d.get("bbox") else None
        return cls(
            record_id=d["record_id"],
            image=ImageRef.from_dict(d["image"]),
            question=d["question"],
            answer=d["answer"],
            question_type=d["question_type"],
            source=d["source"],
            bbox=bbox,
            choices=d.get("choices"),
            correct_index=d.get("correct_index"),
            split=d.get("split", "train"),
        )


@dataclass
class ParseIssue:
    """One malformed entry, reported instead of silently dropped."""

    path: str
    line_no: int
    field: str
    message: str

    def to_dict(self) -> dict:
        return {"path": self.path, "line_no": self.line_no, "field": self.field, "message": self.message}


# ---------------------------------------------------------------------------
# answer normalization

_NUMBER_WORDS = {
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4",
    "five": "5", "six": "6", "seven": "7", "eight": "8", "nine": "9",
    "ten": "10", "eleven": "11", "twelve": "12", "thirteen": "13",
    "fourteen": "14", "fifteen": "15", "sixteen": "16", "seventeen": "17",
    "eighteen": "18", "nineteen": "19", "twenty": "20",
    "thirty": "30", "forty": "40", "fifty": "50", "sixty": "60",
    "seventy": "70", "eighty": "80", "ninety": "90",
    "hundred": "100", "one hundred": "100",
}

_TERMINAL_PUNCT = ".!?,;:\"' \t\n\r"


def normalize_answer(text: str) -> str:
    """Lowercase, trim, strip trailing punctuation, map small numerals to digits.

    Idempotent by construction; numerals outside the table pass through.
    """
    out = text.strip().lower().rstrip(_TERMINAL_PUNCT)
    return _NUMBER_WORDS.get(out, out)


# ---------------------------------------------------------------------------
# question classification

_AUX_VERBS = {
    "is", "are", "was", "were", "am",
    "do", "does", "did",
    "can", "could", "will", "would", "shall", "should",
    "has", "have", "had", "may", "might", "must",
}

# Single-token place prepositions; multiword ones are matched on the raw text.
_PLACE_PREPOSITIONS = {
    "on", "in", "under", "behind", "beside", "near", "above", "below",
    "between", "inside", "outside", "atop", "underneath", "beneath",
}
_PLACE_PHRASES = ("next to", "in front of", "on top of", "close to")

_COPULAS = {"is", "are", "was", "were"}


def _tokens(question: str) -> list[str]:
    return normalize_answer(question).replace("?", " ").replace(",", " ").split()


def classify_question(question: str) -> str:
    """Assign one of the nine question types via fixed-priority keyword rules.

    Total: anything the rules do not recognize lands in Other.
    """
    text = normalize_answer(question)
    toks = _tokens(question)
    if not toks:
        return "Other"
    if text.startswith("how many"):
        return "Counting"
    if toks[0] in _AUX_VERBS:
        return "YesNo"
    if "what color" in text or "what colour" in text:
        return "Color"
    if "what number" in text or "what time" in text:
        return "Number"
    if toks[0] == "what" and len(toks) > 1 and toks[1] in _COPULAS and "doing" in toks:
        return "Action"
    if "what type of" in text or "what types of" in text:
        return "Attribute"
    # "what/which <head> ..." asks for a thing; auxiliary-fronted "what does/do/did"
    # questions ask about contents or placement instead and fall through.
    if toks[0] in ("what", "which") and len(toks) > 1 and toks[1] not in ("does", "do", "did"):
        return "Object"
    if any(t in _PLACE_PREPOSITIONS for t in toks) or any(p in text for p in _PLACE_PHRASES):
        return "Relation"
    return "Other"


# ---------------------------------------------------------------------------
# source adapters

def _require(entry: dict, key: str) -> object:
    if key not in entry or entry[key] in (None, ""):
        raise DataError(f"missing field {key!r}")
    return entry[key]


def _image_from_entry(entry: dict, default_id: str) -> ImageRef:
    image = entry.get("image")
    if isinstance(image, dict):
        return ImageRef.from_dict(image)
    if isinstance(image, str) and image:
        return ImageRef(
            id=entry.get("image_id") or Path(image).stem,
            uri=image,
            width=entry.get("width"),
            height=entry.get("height"),
        )
    image_id = str(entry.get("image_id") or default_id)
    return ImageRef(id=image_id, uri=str(image or image_id), width=entry.get("width"), height=entry.get("height"))


def _adapt_generic_vqa(source: str, id_key: str) -> Callable[[dict, str], CanonicalQA]:
    def adapt(entry: dict, split: str) -> CanonicalQA:
        orig_id = _require(entry, id_key)
        question = str(_require(entry, "question"))
        answer = str(_require(entry, "answer"))
        return CanonicalQA(
            record_id=f"{source}:{orig_id}",
            image=_image_from_entry(entry, str(orig_id)),
            question=question,
            answer=answer,
            question_type=classify_question(question),
            source=source,
            split=entry.get("split", split),
        )

    return adapt


def _adapt_aokvqa(entry: dict, split: str) -> CanonicalQA:
    orig_id = _require(entry, "question_id")
    question = str(_require(entry, "question"))
    choices = _require(entry, "choices")
    idx = entry.get("correct_choice_idx", entry.get("correct_index"))
    if not isinstance(choices, list) or idx is None:
        raise DataError("choices and correct_choice_idx are required")
    return CanonicalQA(
        record_id=f"aokvqa:{orig_id}",
        image=_image_from_entry(entry, str(orig_id)),
        question=question,
        answer=str(choices[idx]) if 0 <= idx < len(choices) else "",
        question_type=classify_question(question),
        source="aokvqa",
        choices=[str(c) for c in choices],
        correct_index=idx,
        split=entry.get("split", split),
    )


def _adapt_grounding(source: str, id_key: str, text_key: str) -> Callable[[dict, str], CanonicalQA]:
    def adapt(entry: dict, split: str) -> CanonicalQA:
        orig_id = _require(entry, id_key)
        expression = str(_require(entry, text_key))
        box = _require(entry, "bbox")
        if not isinstance(box, list) or len(box) != 4:
            raise DataError("bbox must be [x1, y1, x2, y2]")
        return CanonicalQA(
            record_id=f"{source}:{orig_id}",
            image=_image_from_entry(entry, str(orig_id)),
            question=expression,
            answer=expression,
            question_type="Other",
            source=source,
            bbox=BBox(*[float(v) for v in box]),
            split=entry.get("split", split),
        )

    return adapt


def _adapt_canonical(entry: dict, split: str) -> CanonicalQA:
    orig_id = _require(entry, "id")
    question = str(_require(entry, "question"))
    answer = str(_require(entry, "answer"))
    box = entry.get("bbox")
    source = entry.get("source", "canonical")
    return CanonicalQA(
        record_id=f"{source}:{orig_id}",
        image=_image_from_entry(entry, str(orig_id)),
        question=question,
        answer=answer,
        question_type=entry.get("question_type") or classify_question(question),
        source=source,
        bbox=BBox(*[float(v) for v in box]) if box else None,
        choices=[str(c) for c in entry["choices"]] if entry.get("choices") else None,
        correct_index=entry.get("correct_index"),
        split=entry.get("split", split),
    )


_ADAPTERS: dict[str, Callable[[dict, str], CanonicalQA]] = {
    "vqa2": _adapt_generic_vqa("vqa2", "question_id"),
    "gqa": _adapt_generic_vqa("gqa", "id"),
    "ocrvqa": _adapt_generic_vqa("ocrvqa", "id"),
    "aokvqa": _adapt_aokvqa,
    "refcoco": _adapt_grounding("refcoco", "ref_id", "expression"),
    "vg": _adapt_grounding("vg", "id", "phrase"),
    "canonical": _adapt_canonical,
}


def parse_source(
    path: str | Path,
    fmt: str,
    split: str = "train",
    on_error: Callable[[ParseIssue], None] | None = None,
) -> Iterator[CanonicalQA]:
    """Stream canonical records from a line-delimited source file.

    Malformed entries are routed to ``on_error`` (with line number) and
    skipped; parsing of the remaining lines continues. Duplicate record ids
    within one file are reported as malformed.
    """
    if fmt not in _ADAPTERS:
        raise ConfigError(f"unknown source format {fmt!r}; expected one of {SOURCE_FORMATS}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"source file not found: {path}")
    adapt = _ADAPTERS[fmt]
    seen: set[str] = set()

    def report(line_no: int, field_name: str, message: str) -> None:
        if on_error is not None:
            on_error(ParseIssue(path=str(path), line_no=line_no, field=field_name, message=message))

    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                report(line_no, "-", f"invalid JSON: {exc}")
                continue
            try:
                record = adapt(entry, split)
            except (DataError, KeyError, TypeError, ValueError) as exc:
                report(line_no, _guess_field(exc), str(exc))
                continue
            if record.record_id in seen:
                report(line_no, "record_id", f"duplicate record id {record.record_id}")
                continue
            seen.add(record.record_id)
            yield record


def _guess_field(exc: Exception) -> str:
    text = str(exc)
    for name in ("question", "answer", "bbox", "choices", "image", "id"):
        if name in text:
            return name
    return "-"
