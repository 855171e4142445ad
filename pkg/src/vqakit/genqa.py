"""Builders for the five question-asking task formats.

Each builder turns canonical records into a GenQA training sample whose
target text teaches the model to emit a question *and* its answer: plain
QA pairs, four-option multiple choice, multi-turn conversations, and the
two grounding directions (expression -> box, box -> expression).
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import yaml

from .errors import ConfigError, DataError
from .ingest import CanonicalQA, ImageRef
from .render import InstructionSample
from .seeding import derive_rng

TASKS = ("Generic", "MultiChoice", "MultiTurn", "REC", "REG")

# Task-description sentences that every suffix must carry verbatim.
REQUIRED_SUFFIX_SENTENCES = {
    "mc": "This is a Multi-choice VQA task.",
    "rec": "This is a Referring Expression Comprehension (REC) task.",
    "reg": "This is a Referring Expression Generation (REG) task.",
}

_SUFFIX_KEY = {"MultiChoice": "mc", "REC": "rec", "REG": "reg"}
_OPTION_LETTERS = "ABCD"
_COORD_RE = re.compile(r"\[\d\.\d{3}, \d\.\d{3}, \d\.\d{3}, \d\.\d{3}\]")

REG_QUESTION_TEMPLATE = "What is located in the region {coords}?"

DEFAULT_MAX_ANSWER_WORDS = 200
DEFAULT_MIN_TURNS = 2
DEFAULT_MAX_TURNS = 10


@dataclass
class PromptPool:
    """Instruction prompt inventory: generic prompts plus task suffixes."""

    generic: list[str]
    multiturn: list[str]
    suffixes: dict[str, str]

    def __post_init__(self):
        if not self.generic:
            raise ConfigError("prompt pool needs at least one generic prompt")
        if not self.multiturn:
            raise ConfigError("prompt pool needs at least one multi-turn prompt")
        for key, sentence in REQUIRED_SUFFIX_SENTENCES.items():
            suffix = self.suffixes.get(key, "")
            if sentence not in suffix:
                raise ConfigError(f"suffix.{key} must contain {sentence!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptPool":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"prompt pool file not found: {path}")
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        suffixes = raw.get("suffix") or {}
        return cls(
            generic=list(raw.get("generic") or []),
            multiturn=list(raw.get("multiturn") or []),
            suffixes={k: str(v) for k, v in suffixes.items()},
        )

    @classmethod
    def default(cls) -> "PromptPool":
        return cls.from_file(Path(__file__).parent / "data" / "prompts.yaml")


@dataclass
class GenQASample:
    """One question-asking training sample before template rendering."""

    sample_id: str
    image: ImageRef
    instruction: str
    target: str
    task: str
    provenance: list[str] = field(default_factory=list)

    def to_instruction_sample(self) -> InstructionSample:
        return InstructionSample(
            id=self.sample_id,
            image=self.image,
            instruction=self.instruction,
            response=self.target,
            task_tag="GenQA",
        )


def select_prompt(pool: PromptPool, task: str, rng: random.Random) -> str:
    """Draw an instruction prompt for the task; suffixed tasks get their suffix."""
    if task not in TASKS:
        raise ConfigError(f"unknown GenQA task {task!r}")
    if task == "MultiTurn":
        return rng.choice(pool.multiturn)
    base = rng.choice(pool.generic)
    key = _SUFFIX_KEY.get(task)
    if key is None:
        return base
    return f"{base}\n{pool.suffixes[key]}"


def format_box(bbox, width: int, height: int) -> str:
    """Normalize pixel corners to 0-1 and render as "[x1, y1, x2, y2]" (3 decimals)."""
    if not width or not height:
        raise DataError("image dimensions required for coordinate formatting")
    return "[{:.3f}, {:.3f}, {:.3f}, {:.3f}]".format(
        bbox.x1 / width, bbox.y1 / height, bbox.x2 / width, bbox.y2 / height
    )


def build_generic(record: CanonicalQA, instruction: str) -> GenQASample:
    question = record.question.strip()
    answer = record.answer.strip()
    if not question or not answer:
        raise DataError(f"{record.record_id}: empty question or answer")
    return GenQASample(
        sample_id=f"genqa-generic:{record.record_id}",
        image=record.image,
        instruction=instruction,
        target=f"Question: {question}\nAnswer: {answer}",
        task="Generic",
        provenance=[record.record_id],
    )


def build_mc(record: CanonicalQA, instruction: str) -> GenQASample:
    if record.choices is None or len(record.choices) != 4:
        raise DataError(f"{record.record_id}: multi-choice build needs exactly 4 choices")
    if record.correct_index is None:
        raise DataError(f"{record.record_id}: missing correct index")
    lines = [f"Question: {record.question.strip()}"]
    for letter, choice in zip(_OPTION_LETTERS, record.choices):
        lines.append(f"({letter}) {choice}")
    lines.append(f"Answer: ({_OPTION_LETTERS[record.correct_index]})")
    return GenQASample(
        sample_id=f"genqa-mc:{record.record_id}",
        image=record.image,
        instruction=instruction,
        target="\n".join(lines),
        task="MultiChoice",
        provenance=[record.record_id],
    )


def shuffle_choices(record: CanonicalQA, rng: random.Random) -> CanonicalQA:
    """Permute the options of a multi-choice record, re-pointing the correct index."""
    if record.choices is None or record.correct_index is None:
        raise DataError(f"{record.record_id}: not a multi-choice record")
    order = list(range(len(record.choices)))
    rng.shuffle(order)
    return CanonicalQA(
        record_id=record.record_id,
        image=record.image,
        question=record.question,
        answer=record.answer,
        question_type=record.question_type,
        source=record.source,
        bbox=record.bbox,
        choices=[record.choices[i] for i in order],
        correct_index=order.index(record.correct_index),
        split=record.split,
    )


def build_multiturn(records: list[CanonicalQA], instruction: str, max_turns: int = DEFAULT_MAX_TURNS) -> GenQASample:
    if len(records) < DEFAULT_MIN_TURNS:
        raise DataError("multi-turn build needs at least 2 records")
    image_ids = {r.image.id for r in records}
    if len(image_ids) != 1:
        raise DataError(f"multi-turn records must share one image, got {sorted(image_ids)}")
    records = records[:max_turns]
    blocks = [f"Question: {r.question.strip()}\nAnswer: {r.answer.strip()}" for r in records]
    return GenQASample(
        sample_id=f"genqa-mt:{records[0].image.id}",
        image=records[0].image,
        instruction=instruction,
        target="\n".join(blocks),
        task="MultiTurn",
        provenance=[r.record_id for r in records],
    )


def build_rec(record: CanonicalQA, instruction: str) -> GenQASample:
    coords = _grounding_coords(record)
    return GenQASample(
        sample_id=f"genqa-rec:{record.record_id}",
        image=record.image,
        instruction=instruction,
        target=f"Question: {record.question.strip()}\nAnswer: {coords}",
        task="REC",
        provenance=[record.record_id],
    )


def build_reg(record: CanonicalQA, instruction: str) -> GenQASample:
    coords = _grounding_coords(record)
    question = REG_QUESTION_TEMPLATE.format(coords=coords)
    return GenQASample(
        sample_id=f"genqa-reg:{record.record_id}",
        image=record.image,
        instruction=instruction,
        target=f"Question: {question}\nAnswer: {record.answer.strip()}",
        task="REG",
        provenance=[record.record_id],
    )


def _grounding_coords(record: CanonicalQA) -> str:
    if record.bbox is None:
        raise DataError(f"{record.record_id}: grounding build needs a bbox")
    if not record.image.width or not record.image.height:
        raise DataError(f"{record.record_id}: grounding build needs image dimensions")
    return format_box(record.bbox, record.image.width, record.image.height)


def filter_long_response(record: CanonicalQA, max_words: int = DEFAULT_MAX_ANSWER_WORDS) -> bool:
    """Keep a record unless its answer reaches the word cap. True means keep."""
    if max_words <= 0:
        raise ConfigError("max_words must be positive")
    return len(record.answer.split()) < max_words


def group_by_image(
    records: Iterable[CanonicalQA],
    min_turns: int = DEFAULT_MIN_TURNS,
    max_turns: int = DEFAULT_MAX_TURNS,
) -> list[list[CanonicalQA]]:
    """Group records by image id (input order), keeping groups with enough turns."""
    groups: dict[str, list[CanonicalQA]] = {}
    order: list[str] = []
    for record in records:
        if record.image.id not in groups:
            groups[record.image.id] = []
            order.append(record.image.id)
        groups[record.image.id].append(record)
    return [groups[i][:max_turns] for i in order if len(groups[i]) >= min_turns]


def validate_sample(sample: GenQASample) -> None:
    """Raise DataError unless the sample satisfies its task's target shape."""
    if not sample.instruction or not sample.target:
        raise DataError(f"{sample.sample_id}: empty instruction or target")
    if sample.task not in TASKS:
        raise DataError(f"{sample.sample_id}: unknown task {sample.task!r}")
    if sample.task == "MultiTurn":
        if sample.target.count("Question: ") < 2 or sample.target.count("Answer: ") < 2:
            raise DataError(f"{sample.sample_id}: multi-turn target needs >= 2 turns")
    elif sample.task == "MultiChoice":
        options = re.findall(r"^\([A-D]\) ", sample.target, flags=re.MULTILINE)
        if len(options) != 4 or not re.search(r"Answer: \([A-D]\)$", sample.target):
            raise DataError(f"{sample.sample_id}: multi-choice target must list 4 options and name one answer")
    elif sample.task == "REC":
        answer = sample.target.rsplit("Answer: ", 1)[-1]
        if not _COORD_RE.search(answer):
            raise DataError(f"{sample.sample_id}: REC answer must contain a coordinate string")
    elif sample.task == "REG":
        question = sample.target.split("\nAnswer: ", 1)[0]
        if not _COORD_RE.search(question):
            raise DataError(f"{sample.sample_id}: REG question must embed a coordinate string")
    else:
        if not sample.target.startswith("Question: ") or "\nAnswer: " not in sample.target:
            raise DataError(f"{sample.sample_id}: generic target must be a question/answer pair")


# ---------------------------------------------------------------------------
# corpus-level build

def plan_quotas(quotas: Mapping[str, Mapping[str, int]]) -> dict:
    """Sum configured per-task, per-source quotas into a manifest (no data touched)."""
    tasks: dict[str, int] = {}
    for task, sources in quotas.items():
        if task not in TASKS:
            raise ConfigError(f"unknown GenQA task {task!r} in quotas")
        tasks[task] = sum(int(v) for v in sources.values())
    return {"tasks": tasks, "total": sum(tasks.values())}


def _eligible(records: list[CanonicalQA], task: str, max_answer_words: int) -> list:
    if task == "Generic":
        return [r for r in records if r.bbox is None and r.choices is None and filter_long_response(r, max_answer_words)]
    if task == "MultiChoice":
        return [r for r in records if r.choices is not None]
    if task == "MultiTurn":
        return group_by_image([r for r in records if r.bbox is None])
    return [r for r in records if r.bbox is not None]


def _sample_to_quota(items: list, quota: int | None, rng: random.Random, task: str) -> list:
    if quota is None:
        return items
    if quota > len(items):
        raise DataError(f"GenQA quota for {task} ({quota}) exceeds eligible pool ({len(items)})")
    picked = set(rng.sample(range(len(items)), quota))
    return [item for i, item in enumerate(items) if i in picked]


def build_corpus(
    records: Iterable[CanonicalQA],
    pool: PromptPool,
    seed: int,
    quotas: Mapping[str, int] | None = None,
    max_answer_words: int = DEFAULT_MAX_ANSWER_WORDS,
    max_turns: int = DEFAULT_MAX_TURNS,
) -> tuple[list[GenQASample], dict]:
    """Build all five task formats over a corpus; returns (samples, manifest).

    Prompt draws are keyed by (seed, task, sample id) so the build is
    deterministic regardless of iteration scheduling; `quotas` maps task
    name to a per-task sample count (omitted task = take everything).
    """
    records = list(records)
    builders = {
        "Generic": build_generic,
        "MultiChoice": build_mc,
        "REC": build_rec,
        "REG": build_reg,
    }
    samples: list[GenQASample] = []
    per_task: dict[str, int] = {}
    for task in TASKS:
        eligible = _eligible(records, task, max_answer_words)
        quota = None if quotas is None else quotas.get(task)
        chosen = _sample_to_quota(eligible, quota, derive_rng(seed, "genqa-quota", task), task)
        for item in chosen:
            if task == "MultiTurn":
                key = item[0].image.id
                instruction = select_prompt(pool, task, derive_rng(seed, "genqa-prompt", task, key))
                sample = build_multiturn(item, instruction, max_turns=max_turns)
            else:
                instruction = select_prompt(pool, task, derive_rng(seed, "genqa-prompt", task, item.record_id))
                sample = builders[task](item, instruction)
            validate_sample(sample)
            samples.append(sample)
        per_task[task] = len(chosen)
    manifest = {"tasks": per_task, "total": len(samples), "seed": seed}
    return samples, manifest
