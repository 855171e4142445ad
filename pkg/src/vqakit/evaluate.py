"""Scoring of Yes/No assessment verdicts: Accuracy, Precision, F1, No%.

The positive class is label Yes (the answer under test is correct).
Percentages are reported to two decimals with half-up rounding. Outputs
that match neither verdict are Invalid and, under the default policy,
count as a wrong prediction on their gold class.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .clients import GenerationRequest
from .errors import ClientError, ConfigError, DataError
from .evalqa import EvalQASample
from .render import read_jsonl, render_evalqa_instruction, write_jsonl

INVALID_POLICIES = ("error", "exclude")

_FIRST_WORD_RE = re.compile(r"[A-Za-z]+")


@dataclass
class Prediction:
    sample_id: str
    raw_text: str
    verdict: str


@dataclass
class ConfusionMatrix:
    """Tallies with Yes (answer-is-correct) as the positive class."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    invalid: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn, "invalid": self.invalid}


@dataclass
class EvalReport:
    matrix: ConfusionMatrix
    accuracy: float
    precision: float
    f1: float
    no_pct: float
    policy: str
    flags: list[str] = field(default_factory=list)
    per_type: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.to_dict(),
            "accuracy": self.accuracy,
            "precision": self.precision,
            "f1": self.f1,
            "no_pct": self.no_pct,
            "policy": self.policy,
            "flags": self.flags,
            "per_type": self.per_type,
        }


def round2(value: float) -> float:
    """Two-decimal percentage rounding, half up."""
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def extract_verdict(raw_text: str) -> str:
    """Map model output to Yes/No/Invalid via its first alphabetic token."""
    m = _FIRST_WORD_RE.search(raw_text or "")
    if m is None:
        return "Invalid"
    token = m.group(0).lower()
    if token == "yes":
        return "Yes"
    if token == "no":
        return "No"
    return "Invalid"


def score(
    predictions: Sequence[Prediction],
    gold: Mapping[str, str],
    policy: str = "error",
) -> ConfusionMatrix:
    """Tally predictions against gold labels.

    policy "error" folds Invalid outputs into the wrong cell of their gold
    class; "exclude" drops them from the matrix. Either way the invalid
    count is tracked.
    """
    if policy not in INVALID_POLICIES:
        raise ConfigError(f"unknown invalid policy {policy!r}")
    matrix = ConfusionMatrix()
    seen: set[str] = set()
    for pred in predictions:
        if pred.sample_id in seen:
            raise DataError(f"duplicate prediction for sample {pred.sample_id}")
        seen.add(pred.sample_id)
        if pred.sample_id not in gold:
            raise DataError(f"prediction for unknown sample {pred.sample_id}")
        label = gold[pred.sample_id]
        verdict = pred.verdict
        if verdict == "Invalid":
            matrix.invalid += 1
            if policy == "exclude":
                continue
            verdict = "No" if label == "Yes" else "Yes"
        if label == "Yes":
            if verdict == "Yes":
                matrix.tp += 1
            else:
                matrix.fn += 1
        else:
            if verdict == "Yes":
                matrix.fp += 1
            else:
                matrix.tn += 1
    return matrix


def metrics(matrix: ConfusionMatrix) -> tuple[dict, list[str]]:
    """Derive the four headline percentages (rounded) plus degeneracy flags."""
    flags: list[str] = []
    total = matrix.total
    if total == 0:
        return {"accuracy": 0.0, "precision": 0.0, "f1": 0.0, "no_pct": 0.0}, ["empty"]
    accuracy = 100.0 * (matrix.tp + matrix.tn) / total
    predicted_yes = matrix.tp + matrix.fp
    if predicted_yes == 0:
        precision = 0.0
        flags.append("precision_undefined")
    else:
        precision = 100.0 * matrix.tp / predicted_yes
    f1_denominator = 2 * matrix.tp + matrix.fp + matrix.fn
    if f1_denominator == 0:
        f1 = 0.0
        flags.append("f1_undefined")
    else:
        f1 = 100.0 * 2 * matrix.tp / f1_denominator
    no_pct = 100.0 * (matrix.tn + matrix.fn) / total
    values = {
        "accuracy": round2(accuracy),
        "precision": round2(precision),
        "f1": round2(f1),
        "no_pct": round2(no_pct),
    }
    return values, flags


def build_report(
    predictions: Sequence[Prediction],
    samples: Sequence[EvalQASample],
    policy: str = "error",
) -> EvalReport:
    gold = {s.sample_id: s.label for s in samples}
    matrix = score(predictions, gold, policy)
    values, flags = metrics(matrix)
    per_type: dict[str, dict] = {}
    types = sorted({s.question_type for s in samples})
    by_id = {s.sample_id: s for s in samples}
    for qtype in types:
        subset = [p for p in predictions if by_id[p.sample_id].question_type == qtype]
        sub_matrix = score(subset, gold, policy)
        sub_values, _ = metrics(sub_matrix)
        per_type[qtype] = {"matrix": sub_matrix.to_dict(), **sub_values}
    return EvalReport(
        matrix=matrix,
        accuracy=values["accuracy"],
        precision=values["precision"],
        f1=values["f1"],
        no_pct=values["no_pct"],
        policy=policy,
        flags=flags,
        per_type=per_type,
    )


def load_testset(path: str | Path) -> list[EvalQASample]:
    samples = [EvalQASample.from_dict(d) for d in read_jsonl(path)]
    if not samples:
        raise DataError(f"empty testset: {path}")
    return samples


def run_eval(
    client,
    testset_path: str | Path,
    out_path: str | Path | None = None,
    concurrency: int = 4,
    policy: str = "error",
    model_id: str = "eval-model",
) -> EvalReport:
    """Render each sample's assessment instruction, query the client, and score.

    Client failures beyond the retry budget mark the sample Invalid and are
    listed in the report flags. Writes report JSON plus a prediction log
    when out_path is given.
    """
    samples = load_testset(testset_path)

    def call(sample: EvalQASample) -> Prediction:
        instruction = render_evalqa_instruction(sample.question, sample.answer_under_test)
        request = GenerationRequest(
            model_id=model_id,
            prompt=instruction,
            image=sample.image,
            metadata={"sample_id": sample.sample_id, "gold": sample.label},
        )
        try:
            response = client.complete(request)
        except ClientError as exc:
            return Prediction(sample_id=sample.sample_id, raw_text=f"<client-error: {exc}>", verdict="Invalid")
        return Prediction(sample_id=sample.sample_id, raw_text=response.text, verdict=extract_verdict(response.text))

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        predictions = list(pool.map(call, samples))
    predictions.sort(key=lambda p: p.sample_id)

    report = build_report(predictions, samples, policy)
    errored = sorted(p.sample_id for p in predictions if p.raw_text.startswith("<client-error:"))
    if errored:
        report.flags.append(f"client_errors:{len(errored)}")

    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        log_path = out_path.with_suffix(".predictions.jsonl")
        write_jsonl(
            ({"sample_id": p.sample_id, "raw_text": p.raw_text, "verdict": p.verdict} for p in predictions),
            log_path,
        )
    return report
