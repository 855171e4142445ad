"""Construction of assessment data: negative answers, feedback, balanced splits.

The pipeline is staged: generate wrong answers with a vision-capable
client, auto-filter and correct them, generate one-sentence feedback with
a text client, filter that, then pair every approved negative with its
ground-truth twin so labels come out exactly balanced.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .clients import COLOR_MODIFIERS, COLOR_WORDS, GenerationRequest
from .errors import ConfigError, DataError
from .ingest import CanonicalQA, ImageRef, classify_question, normalize_answer
from .seeding import content_hash, derive_rng

STATUSES = (
    "Generated",
    "AutoFiltered",
    "Corrected",
    "AwaitingReview",
    "Approved",
    "Rejected",
    "FeedbackFiltered",
)

FILTER_FLAGS = ("EchoesQuestion", "EqualsGroundTruth", "CategoryMismatch", "MalformedOutput")

_ALLOWED_TRANSITIONS = {
    "Generated": {"AutoFiltered", "Corrected", "AwaitingReview"},
    "Corrected": {"AwaitingReview", "FeedbackFiltered"},
    "AwaitingReview": {"Approved", "Rejected", "FeedbackFiltered"},
    "AutoFiltered": set(),
    "Approved": set(),
    "Rejected": set(),
    "FeedbackFiltered": set(),
}

DEFAULT_MAX_FEEDBACK_WORDS = 50
DEFAULT_MAX_NEGATIVE_WORDS = 5
COUNTING_RANDOM_RANGE = (0, 20)

YES_FEEDBACK_FALLBACK = "Yes, the answer is {answer}."


def check_transition(current: str, new: str) -> None:
    if new not in _ALLOWED_TRANSITIONS.get(current, set()):
        raise DataError(f"illegal status transition {current} -> {new}")


@dataclass
class NegativeCandidate:
    """One negative-answer work item moving through the curation funnel."""

    candidate_id: str
    base: CanonicalQA
    negative_answer: str
    raw_generation: str = ""
    feedback: str | None = None
    status: str = "Generated"
    filter_flags: set[str] = field(default_factory=set)
    corrected: bool = False
    human_edited: bool = False
    revision: int = 0
    provenance: dict = field(default_factory=dict)

    def positive_statement(self) -> str | None:
        return self.provenance.get("positive_statement")

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "base": self.base.to_dict(),
            "negative_answer": self.negative_answer,
            "raw_generation": self.raw_generation,
            "feedback": self.feedback,
            "status": self.status,
            "filter_flags": sorted(self.filter_flags),
            "corrected": self.corrected,
            "human_edited": self.human_edited,
            "revision": self.revision,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NegativeCandidate":
        return cls(
            candidate_id=d["candidate_id"],
            base=CanonicalQA.from_dict(d["base"]),
            negative_answer=d["negative_answer"],
            raw_generation=d.get("raw_generation", ""),
            feedback=d.get("feedback"),
            status=d.get("status", "Generated"),
            filter_flags=set(d.get("filter_flags", [])),
            corrected=d.get("corrected", False),
            human_edited=d.get("human_edited", False),
            revision=d.get("revision", 0),
            provenance=dict(d.get("provenance", {})),
        )


@dataclass
class EvalQASample:
    """One labelled assessment sample; twins share a pair_id."""

    sample_id: str
    image: ImageRef
    question: str
    answer_under_test: str
    label: str
    feedback: str
    pair_id: str
    question_type: str = "Other"

    def __post_init__(self):
        if self.label not in ("Yes", "No"):
            raise DataError(f"{self.sample_id}: label must be Yes or No")
        if not self.feedback:
            raise DataError(f"{self.sample_id}: empty feedback")

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "pair_id": self.pair_id,
            "image": self.image.to_dict(),
            "question": self.question,
            "question_type": self.question_type,
            "answer_under_test": self.answer_under_test,
            "label": self.label,
            "feedback": self.feedback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalQASample":
        return cls(
            sample_id=d["sample_id"],
            image=ImageRef.from_dict(d["image"]),
            question=d["question"],
            answer_under_test=d["answer_under_test"],
            label=d["label"],
            feedback=d["feedback"],
            pair_id=d["pair_id"],
            question_type=d.get("question_type") or classify_question(d["question"]),
        )


@dataclass
class FunnelReport:
    """Stage counts through the curation funnel."""

    raw: int = 0
    generation_ok: int = 0
    after_auto_filter: int = 0
    corrected: int = 0
    after_feedback_filter: int = 0
    approved: int = 0

    def validate(self) -> None:
        chain = (self.raw, self.generation_ok, self.after_auto_filter, self.after_feedback_filter, self.approved)
        if any(a < b for a, b in zip(chain, chain[1:])):
            raise DataError(f"funnel counts must be monotone non-increasing: {chain}")
        if self.corrected > self.after_auto_filter:
            raise DataError("corrected items must be a subset of the auto-filter survivors")

    def to_dict(self) -> dict:
        return {
            "raw": self.raw,
            "generation_ok": self.generation_ok,
            "after_auto_filter": self.after_auto_filter,
            "corrected": self.corrected,
            "after_feedback_filter": self.after_feedback_filter,
            "approved": self.approved,
        }


# ---------------------------------------------------------------------------
# prompts

def gen_negative_prompt(question: str) -> str:
    """Prompt asking the vision model for a deliberately wrong answer."""
    if not question.strip():
        raise DataError("question must be non-empty")
    return (
        f"This is the question: {question}. Please give me the wrong answer "
        "to this question. The answer should be a single word or phrase.\n"
    )


def gen_feedback_prompt(question: str, ground_truth: str) -> str:
    """Prompt asking the text model to restate the true QA pair as one sentence."""
    if not question.strip() or not ground_truth.strip():
        raise DataError("question and ground-truth answer must be non-empty")
    return f"Please rephrase the question and answer: {question}\n{ground_truth} into one short description."


# ---------------------------------------------------------------------------
# filters and corrections

def _is_numeric_answer(text: str) -> bool:
    return normalize_answer(text).isdigit()


def _is_color_answer(text: str) -> bool:
    tokens = normalize_answer(text).split()
    palette = set(COLOR_WORDS) | set(COLOR_MODIFIERS)
    return bool(tokens) and all(t in palette for t in tokens)


def _is_token_subsequence(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    it = iter(haystack)
    return all(tok in it for tok in needle)


def question_tokens(question: str) -> list[str]:
    return normalize_answer(question).replace("?", " ").replace(",", " ").split()


def heuristic_filter(base: CanonicalQA, candidate_answer: str, max_words: int = DEFAULT_MAX_NEGATIVE_WORDS) -> set[str]:
    """Flag a generated answer; an empty set means it passed."""
    flags: set[str] = set()
    normalized = normalize_answer(candidate_answer)
    if not normalized or len(candidate_answer.split()) > max_words or "wrong answer" in candidate_answer.lower():
        flags.add("MalformedOutput")
    if normalized and normalized == normalize_answer(base.answer):
        flags.add("EqualsGroundTruth")
    if normalized and _is_token_subsequence(normalized.split(), question_tokens(base.question)):
        flags.add("EchoesQuestion")
    if normalized:
        if base.question_type == "Counting" and not _is_numeric_answer(candidate_answer):
            flags.add("CategoryMismatch")
        elif base.question_type == "YesNo" and normalized not in ("yes", "no"):
            flags.add("CategoryMismatch")
        elif base.question_type == "Color" and not _is_color_answer(candidate_answer):
            flags.add("CategoryMismatch")
    return flags


def correct_candidate(base: CanonicalQA, candidate_answer: str, rng: random.Random) -> str | None:
    """Repair a flagged answer for the two correctable question types.

    Returns the corrected answer, or None when the rules do not apply.
    """
    gt = normalize_answer(base.answer)
    if base.question_type == "YesNo":
        if gt not in ("yes", "no"):
            return None
        return "yes" if gt == "no" else "no"
    if base.question_type == "Counting":
        if not gt.isdigit():
            return None
        if normalize_answer(candidate_answer) != gt:
            return None
        lo, hi = COUNTING_RANDOM_RANGE
        options = [v for v in range(lo, hi + 1) if v != int(gt)]
        return str(rng.choice(options))
    return None


def filter_feedback(text: str, max_words: int = DEFAULT_MAX_FEEDBACK_WORDS) -> bool:
    """Keep feedback unless empty, overlong, or echoing the generation prompt."""
    if max_words <= 0:
        raise ConfigError("max_words must be positive")
    trimmed = text.strip()
    if not trimmed:
        return False
    if len(trimmed.split()) > max_words:
        return False
    if "Please rephrase the question and answer" in trimmed:
        return False
    return True


def compose_feedback(verdict: str, statement: str) -> str:
    """Prefix a declarative statement with its verdict unless already present."""
    stripped = statement.strip()
    first = stripped.split(",")[0].split()[0].lower() if stripped else ""
    if first in ("yes", "no"):
        return stripped
    return f"{verdict}, {stripped}"


# ---------------------------------------------------------------------------
# pairing and splits

def make_positive_twin(candidate: NegativeCandidate, statement: str | None = None) -> EvalQASample:
    """Build the Yes-labelled twin carrying the ground-truth answer."""
    base = candidate.base
    if statement is None:
        feedback = YES_FEEDBACK_FALLBACK.format(answer=base.answer)
    else:
        feedback = compose_feedback("Yes", statement)
    return EvalQASample(
        sample_id=f"{candidate.candidate_id}#yes",
        image=base.image,
        question=base.question,
        answer_under_test=base.answer,
        label="Yes",
        feedback=feedback,
        pair_id=candidate.candidate_id,
        question_type=base.question_type,
    )


def make_negative_sample(candidate: NegativeCandidate) -> EvalQASample:
    if candidate.status != "Approved":
        raise DataError(f"{candidate.candidate_id}: only Approved candidates become samples")
    if not candidate.feedback:
        raise DataError(f"{candidate.candidate_id}: approved candidate lacks feedback")
    base = candidate.base
    return EvalQASample(
        sample_id=f"{candidate.candidate_id}#no",
        image=base.image,
        question=base.question,
        answer_under_test=candidate.negative_answer,
        label="No",
        feedback=compose_feedback("No", candidate.feedback),
        pair_id=candidate.candidate_id,
        question_type=base.question_type,
    )


def check_approvable(candidate: NegativeCandidate) -> None:
    """Raise DataError if the candidate violates the approval invariants."""
    gt = normalize_answer(candidate.base.answer)
    negative = normalize_answer(candidate.negative_answer)
    if not negative:
        raise DataError(f"{candidate.candidate_id}: empty negative answer")
    if negative == gt:
        raise DataError(f"{candidate.candidate_id}: negative answer equals ground truth")
    if not (candidate.feedback or "").strip():
        raise DataError(f"{candidate.candidate_id}: approval requires feedback")
    if candidate.base.question_type == "YesNo" and gt in ("yes", "no"):
        if negative != ("yes" if gt == "no" else "no"):
            raise DataError(f"{candidate.candidate_id}: YesNo negatives must be the opposite of the ground truth")


def assemble_splits(
    approved: Sequence[NegativeCandidate],
    sizes: Mapping[str, int],
    seed: int,
    by_source_split: bool = False,
) -> dict[str, list[EvalQASample]]:
    """Draw disjoint negative sets per split and pair each with its Yes twin.

    sizes maps split name to the NEGATIVE count; each output split holds
    twice that many samples. With by_source_split, train negatives come
    from train-pool records and val/test negatives from the val pool.
    """
    for split, size in sizes.items():
        if split not in ("train", "val", "test"):
            raise ConfigError(f"unknown split {split!r}")
        if size < 0:
            raise ConfigError("split sizes must be non-negative")
    for candidate in approved:
        if candidate.status != "Approved":
            raise DataError(f"{candidate.candidate_id}: assemble_splits only accepts Approved candidates")

    if by_source_split:
        eval_pool = [c for c in approved if c.base.split == "val"]
        pools = {
            "train": [c for c in approved if c.base.split == "train"],
            "val": eval_pool,
            "test": eval_pool,
        }
    else:
        shared = list(approved)
        pools = {"train": shared, "val": shared, "test": shared}

    taken: set[str] = set()
    out: dict[str, list[EvalQASample]] = {}
    for split in ("train", "val", "test"):
        if split not in sizes:
            continue
        size = sizes[split]
        available = [c for c in pools[split] if c.candidate_id not in taken]
        if size > len(available):
            raise DataError(
                f"split {split!r} wants {size} negatives but only {len(available)} approved candidates remain"
            )
        rng = derive_rng(seed, "assemble", split)
        chosen = rng.sample(available, size)
        taken.update(c.candidate_id for c in chosen)
        samples: list[EvalQASample] = []
        for candidate in chosen:
            check_approvable(candidate)
            samples.append(make_negative_sample(candidate))
            samples.append(make_positive_twin(candidate, candidate.positive_statement()))
        derive_rng(seed, "assemble-shuffle", split).shuffle(samples)
        out[split] = samples
    return out


def funnel_report(candidates: Iterable[NegativeCandidate]) -> FunnelReport:
    """Tally the funnel stages from candidate statuses."""
    report = FunnelReport()
    passed_filter = {"Corrected", "AwaitingReview", "Approved", "Rejected", "FeedbackFiltered"}
    for candidate in candidates:
        report.raw += 1
        if candidate.raw_generation.strip():
            report.generation_ok += 1
        if candidate.status in passed_filter:
            report.after_auto_filter += 1
        if candidate.corrected:
            report.corrected += 1
        if candidate.status in passed_filter and candidate.status != "FeedbackFiltered" and (candidate.feedback or "").strip():
            report.after_feedback_filter += 1
        if candidate.status == "Approved":
            report.approved += 1
    return report


# ---------------------------------------------------------------------------
# staged pipeline over a candidate store

def candidate_id_for(record: CanonicalQA) -> str:
    return f"cand:{record.record_id}"


def generate_candidates(records, client, store, model_id: str = "negative-model", concurrency: int = 4) -> int:
    """Query the vision client for a wrong answer per record; log in id order."""
    records = sorted(records, key=lambda r: r.record_id)
    prompts = {r.record_id: gen_negative_prompt(r.question) for r in records}

    def call(record):
        request = GenerationRequest(model_id=model_id, prompt=prompts[record.record_id], image=record.image)
        return record, client.complete(request)

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        results = list(pool.map(call, records))

    created = 0
    for record, response in results:
        candidate = NegativeCandidate(
            candidate_id=candidate_id_for(record),
            base=record,
            negative_answer=response.text.strip(),
            raw_generation=response.text,
            provenance={
                "negative_model": model_id,
                "negative_prompt_hash": content_hash(prompts[record.record_id]),
            },
        )
        store.append("created", candidate.candidate_id, candidate.to_dict())
        created += 1
    return created


def filter_candidates(store, seed: int) -> dict[str, int]:
    """Run the heuristic filter plus corrections over all Generated candidates."""
    counts = {"passed": 0, "corrected": 0, "auto_filtered": 0, "to_review": 0}
    for candidate in store.candidates(status="Generated"):
        if not candidate.raw_generation.strip():
            store.append("status", candidate.candidate_id, {"status": "AutoFiltered", "flags": ["MalformedOutput"]})
            counts["auto_filtered"] += 1
            continue
        flags = heuristic_filter(candidate.base, candidate.negative_answer)
        if not flags:
            store.append("status", candidate.candidate_id, {"status": "AwaitingReview", "flags": []})
            counts["passed"] += 1
            continue
        if candidate.base.question_type in ("YesNo", "Counting"):
            rng = derive_rng(seed, "correction", candidate.candidate_id)
            corrected = correct_candidate(candidate.base, candidate.negative_answer, rng)
            if corrected is not None and not heuristic_filter(candidate.base, corrected):
                store.append(
                    "corrected",
                    candidate.candidate_id,
                    {"negative_answer": corrected, "flags": sorted(flags)},
                )
                counts["corrected"] += 1
                continue
        if flags <= {"EchoesQuestion", "CategoryMismatch"}:
            # Semantic-relevance judgements stay human: route to review instead of dropping.
            store.append("status", candidate.candidate_id, {"status": "AwaitingReview", "flags": sorted(flags)})
            counts["to_review"] += 1
        else:
            store.append("status", candidate.candidate_id, {"status": "AutoFiltered", "flags": sorted(flags)})
            counts["auto_filtered"] += 1
    return counts


def generate_feedback(
    store,
    client,
    model_id: str = "feedback-model",
    max_words: int = DEFAULT_MAX_FEEDBACK_WORDS,
    concurrency: int = 4,
) -> dict[str, int]:
    """Generate and filter feedback for every candidate past the auto filter."""
    eligible = [c for c in store.candidates() if c.status in ("AwaitingReview", "Corrected") and c.feedback is None]
    prompts = {c.candidate_id: gen_feedback_prompt(c.base.question, c.base.answer) for c in eligible}

    def call(candidate):
        request = GenerationRequest(model_id=model_id, prompt=prompts[candidate.candidate_id], image=None)
        return candidate, client.complete(request)

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        results = list(pool.map(call, eligible))

    counts = {"kept": 0, "feedback_filtered": 0}
    for candidate, response in results:
        statement = response.text.strip()
        if not filter_feedback(statement, max_words):
            store.append("status", candidate.candidate_id, {"status": "FeedbackFiltered"})
            counts["feedback_filtered"] += 1
            continue
        store.append(
            "feedback_set",
            candidate.candidate_id,
            {
                "feedback": compose_feedback("No", statement),
                "positive_statement": statement,
                "feedback_model": model_id,
                "feedback_prompt_hash": content_hash(prompts[candidate.candidate_id]),
            },
        )
        if candidate.status == "Corrected":
            store.append("status", candidate.candidate_id, {"status": "AwaitingReview"})
        counts["kept"] += 1
    return counts


def auto_approve(store) -> int:
    """Promote every reviewable candidate that satisfies the approval invariants."""
    approved = 0
    for candidate in store.candidates(status="AwaitingReview"):
        if not (candidate.feedback or "").strip():
            continue
        try:
            check_approvable(candidate)
        except DataError:
            store.append("reject", candidate.candidate_id, {}, reviewer="auto")
            continue
        store.append("approve", candidate.candidate_id, {}, reviewer="auto")
        approved += 1
    return approved
