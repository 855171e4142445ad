"""Instruction-template rendering and the JSONL training-file format.

The unified flat template is::

    <s>USER: <image> {instruction}\n ASSISTANT: {response} </s>

and the conversation JSONL layout mirrors the common instruction-tuning
schema (id, image, conversations with from/value fields).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError
from .ingest import ImageRef

TASK_TAGS = ("VQA", "GenQA", "EvalQA")
IMAGE_PLACEHOLDER = "<image>"

EVALQA_INSTRUCTION_SUFFIX = (
    "Please examine the correctness of this question and answer "
    "according to the image content. Output Yes or No with the feedback"
)

_UNIFIED_RE = re.compile(
    r"\A<s>USER: <image> (.*?)\n ASSISTANT: (.*) </s>\Z", re.DOTALL
)


@dataclass
class InstructionSample:
    """One rendered (image, instruction, response) training triple."""

    id: str
    image: ImageRef
    instruction: str
    response: str
    task_tag: str

    def __post_init__(self):
        if not self.instruction:
            raise DataError(f"{self.id}: empty instruction")
        if not self.response:
            raise DataError(f"{self.id}: empty response")
        if self.task_tag not in TASK_TAGS:
            raise DataError(f"{self.id}: unknown task tag {self.task_tag!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "image": self.image.to_dict(),
            "instruction": self.instruction,
            "response": self.response,
            "task_tag": self.task_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InstructionSample":
        return cls(
            id=d["id"],
            image=ImageRef.from_dict(d["image"]),
            instruction=d["instruction"],
            response=d["response"],
            task_tag=d["task_tag"],
        )


@dataclass
class ConversationRecord:
    """Conversation-file row: alternating human/assistant turns."""

    id: str
    image: str
    conversations: list[dict]

    def __post_init__(self):
        if not self.conversations or len(self.conversations) % 2 != 0:
            raise DataError(f"{self.id}: turn count must be even and non-zero")
        first = self.conversations[0]
        if first.get("from") != "human" or not first.get("value", "").startswith(IMAGE_PLACEHOLDER):
            raise DataError(f"{self.id}: first turn must be human and begin with {IMAGE_PLACEHOLDER}")

    def to_dict(self) -> dict:
        return {"id": self.id, "image": self.image, "conversations": self.conversations}


def render_evalqa_instruction(question: str, answer_under_test: str) -> str:
    """Render the assessment instruction for one question/answer pair."""
    if not question or not answer_under_test:
        raise DataError("question and answer_under_test must be non-empty")
    return f"{question}\nAnswer: {answer_under_test}. \n{EVALQA_INSTRUCTION_SUFFIX}"


def render_unified(sample: InstructionSample) -> str:
    """Flatten a sample into the single-string training template."""
    return f"<s>USER: {IMAGE_PLACEHOLDER} {sample.instruction}\n ASSISTANT: {sample.response} </s>"


def parse_unified(text: str) -> tuple[str, str]:
    """Recover (instruction, response) from a flat training string.

    Splits on the first turn delimiter, so instructions containing the
    literal "\\n ASSISTANT: " marker are not round-trippable.
    """
    m = _UNIFIED_RE.match(text)
    if m is None:
        raise DataError("string does not match the unified template")
    return m.group(1), m.group(2)


def validate_rendered(text: str) -> bool:
    m = _UNIFIED_RE.match(text)
    return m is not None and bool(m.group(1)) and bool(m.group(2))


def to_conversation(sample: InstructionSample) -> ConversationRecord:
    return ConversationRecord(
        id=sample.id,
        image=sample.image.uri,
        conversations=[
            {"from": "human", "value": f"{IMAGE_PLACEHOLDER}\n{sample.instruction}"},
            {"from": "gpt", "value": sample.response},
        ],
    )


# ---------------------------------------------------------------------------
# JSONL I/O

def write_jsonl(records: Iterable[dict], path: str | Path) -> int:
    """Write one JSON object per line (UTF-8, stable field order). Returns count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> Iterator[dict]:
    """Yield JSON objects per line; a corrupt line raises with its line number.

    Records before the corrupt line are yielded first.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc


def write_samples(samples: Iterable[InstructionSample], path: str | Path) -> int:
    return write_jsonl((s.to_dict() for s in samples), path)


def read_samples(path: str | Path) -> Iterator[InstructionSample]:
    for line_no, record in enumerate(read_jsonl(path), start=1):
        try:
            yield InstructionSample.from_dict(record)
        except (KeyError, DataError) as exc:
            raise DataError(f"{path}:{line_no}: bad sample record ({exc})") from exc
