"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings. Every tolerance is pinned here, not configured.
"""

from __future__ import annotations

import json
import os
import random
import time
from collections import Counter
from pathlib import Path

import yaml

from conftest import (
    make_approved_candidate,
    make_corpus,
    make_grounding_record,
    make_mc_record,
    write_canonical_fixture,
)
from vqakit.cli import main
from vqakit.clients import MockFeedbackClient, MockVisionClient
from vqakit.evalqa import (
    NegativeCandidate,
    auto_approve,
    assemble_splits,
    correct_candidate,
    filter_candidates,
    funnel_report,
    generate_candidates,
    generate_feedback,
    heuristic_filter,
)
from vqakit.evaluate import ConfusionMatrix, metrics
from vqakit.genqa import plan_quotas
from vqakit.ingest import CanonicalQA, ImageRef, classify_question, normalize_answer
from vqakit.render import InstructionSample, parse_unified, render_evalqa_instruction, render_unified
from vqakit.store import CandidateStore

PAPER_SCALE_QUOTAS = {
    "Generic": {"vqa2": 100_000, "gqa": 100_000, "ocrvqa": 80_000, "counting": 20_000, "longform": 250_000},
    "MultiChoice": {"aokvqa": 17_000},
    "MultiTurn": {"vqa2": 83_000, "gqa": 72_000},
    "REC": {"vg": 30_000, "refcoco": 30_000},
    "REG": {"vg": 30_000, "refcoco": 30_000},
}

# Exemplar curation rows: question, ground truth, published negative, type.
EXEMPLAR_ROWS = [
    ("What kind of flowers are on the picture to the left?", "roses", "pansy", "Object"),
    ("Is the sun shining?", "no", "yes", "YesNo"),
    ("How many vases are there?", "6", "5", "Counting"),
    ("What color is the truck?", "silver", "white", "Color"),
    ("What type of tree is on the right?", "cherry", "palm", "Attribute"),
    ("What number is written on the sheep?", "3", "5", "Number"),
    ("What does the woman have on her back?", "backpack", "jacket", "Relation"),
    ("What are the people doing?", "motorcycling", "riding bikes", "Action"),
    ("What does the second sign say?", "all-war", "stop", "Other"),
]


def _report(name: str, started: float, limit: float) -> None:
    elapsed = time.monotonic() - started
    assert elapsed < limit, f"{name} took {elapsed:.2f}s, limit {limit}s"
    print(f"ACCEPTANCE {name}: PASS ({elapsed:.2f}s < {limit:.0f}s)")


def _record(question, answer, qtype, rid):
    return CanonicalQA(
        record_id=rid,
        image=ImageRef(id=f"img-{rid}", uri=f"img-{rid}.jpg"),
        question=question,
        answer=answer,
        question_type=qtype,
        source="canonical",
    )


def test_metric_reconstruction():
    """Published baseline row regenerates from its confusion matrix within 0.01."""
    started = time.monotonic()
    matrix = ConfusionMatrix(tp=505, fp=105, fn=1995, tn=2395)
    values, flags = metrics(matrix)
    assert abs(values["accuracy"] - 58.00) <= 0.01
    assert abs(values["precision"] - 82.79) <= 0.01
    assert abs(values["f1"] - 32.47) <= 0.01
    assert abs(values["no_pct"] - 87.80) <= 0.01
    assert not flags
    _report("metric-reconstruction", started, 1.0)


def test_balance_invariant():
    """Every assembled split is exactly 50% No and pairs share image+question."""
    started = time.monotonic()
    pool = [make_approved_candidate(r) for r in make_corpus(200)]
    for seed in range(20):
        splits = assemble_splits(pool, {"train": 100, "val": 10, "test": 10}, seed=seed)
        assert len(splits["train"]) == 200
        assert len(splits["val"]) == 20
        assert len(splits["test"]) == 20
        for samples in splits.values():
            labels = Counter(s.label for s in samples)
            assert labels["No"] == labels["Yes"] == len(samples) // 2
            twins = {}
            for sample in samples:
                twins.setdefault(sample.pair_id, []).append(sample)
            for pair in twins.values():
                assert len(pair) == 2
                no = next(s for s in pair if s.label == "No")
                yes = next(s for s in pair if s.label == "Yes")
                assert no.image.id == yes.image.id
                assert no.question == yes.question
    _report("balance-invariant", started, 5.0)


def test_filter_and_correction_suite():
    """Exemplar curation rows and every filter flag behave as published."""
    started = time.monotonic()
    # All published negatives pass the automated filter unflagged.
    for i, (question, answer, negative, qtype) in enumerate(EXEMPLAR_ROWS):
        base = _record(question, answer, qtype, f"ex-{i}")
        assert classify_question(question) == qtype
        assert heuristic_filter(base, negative) == set(), (question, negative)

    # Correction rules: GT "no" with an echoed "no" becomes "yes".
    sun = _record("Is the sun shining?", "no", "YesNo", "sun")
    assert correct_candidate(sun, "no", random.Random(0)) == "yes"

    # Counting GT "6" never equals its negative after correction.
    vases = _record("How many vases are there?", "6", "Counting", "vases")
    for seed in range(100):
        corrected = correct_candidate(vases, "six", random.Random(seed))
        assert corrected is not None
        assert normalize_answer(corrected) != "6"

    # Each flag has a dedicated trigger fixture.
    flowers = _record("What kind of flowers are on the picture to the left?", "roses", "Object", "fl")
    assert "EqualsGroundTruth" in heuristic_filter(flowers, "roses")
    sheep = _record("What number is written on the sheep?", "3", "Number", "sh")
    assert "EchoesQuestion" in heuristic_filter(sheep, "sheep")
    assert "CategoryMismatch" in heuristic_filter(vases, "blue")
    assert "MalformedOutput" in heuristic_filter(flowers, "the wrong answer is tulip")

    # YesNo negatives are always the boolean opposite after the pipeline runs.
    records = [r for r in make_corpus(120) if r.question_type == "YesNo"]
    for record in records:
        for candidate_answer in ("no", "yes", "maybe", ""):
            flags = heuristic_filter(record, candidate_answer)
            if not flags:
                assert normalize_answer(candidate_answer) != normalize_answer(record.answer)
                continue
            corrected = correct_candidate(record, candidate_answer, random.Random(1))
            expected = "yes" if normalize_answer(record.answer) == "no" else "no"
            assert corrected == expected
    _report("filter-correction-suite", started, 5.0)


def test_funnel_replay(tmp_path):
    """Paper-scale status replay hits the published stage counts exactly."""
    started = time.monotonic()
    shared = _record("Is the funnel right?", "yes", "YesNo", "funnel-base")

    def candidate(i, status, *, generated=True, corrected=False, feedback=None):
        return NegativeCandidate(
            candidate_id=f"c{i:06d}",
            base=shared,
            negative_answer="no" if generated else "",
            raw_generation="no" if generated else "",
            feedback=feedback,
            status=status,
            corrected=corrected,
        )

    candidates = []
    i = 0
    for _ in range(2):  # generation failures
        candidates.append(candidate(i, "AutoFiltered", generated=False)); i += 1
    for _ in range(38_904):  # removed by manual filtering
        candidates.append(candidate(i, "AutoFiltered")); i += 1
    for _ in range(19_502):  # feedback-format rejects (uncorrected pool)
        candidates.append(candidate(i, "FeedbackFiltered")); i += 1
    for _ in range(26_778):  # approved, never needed correction
        candidates.append(candidate(i, "Approved", feedback="No, f.")); i += 1
    for _ in range(14_814):  # corrected then approved
        candidates.append(candidate(i, "Approved", corrected=True, feedback="No, f.")); i += 1
    assert len(candidates) == 100_000

    report = funnel_report(candidates)
    report.validate()
    assert report.raw == 100_000
    assert report.generation_ok == 99_998
    assert report.after_auto_filter == 61_094
    assert report.corrected == 14_814
    assert report.after_feedback_filter == 41_592
    assert report.approved == 41_592

    # Desk run: 500 records through the mock pipeline equals a recount oracle.
    records = make_corpus(500)
    store = CandidateStore(tmp_path / "funnel-store")
    generate_candidates(records, MockVisionClient(records, seed=42, error_rate=0.3), store)
    filter_candidates(store, seed=42)
    generate_feedback(store, MockFeedbackClient(seed=42, error_rate=0.15))
    auto_approve(store)
    produced = funnel_report(store.candidates())
    produced.validate()
    snapshot = store.candidates()
    statuses = Counter(c.status for c in snapshot)
    survivors = ("Corrected", "AwaitingReview", "Approved", "Rejected", "FeedbackFiltered")
    assert produced.raw == 500
    assert produced.generation_ok == sum(1 for c in snapshot if c.raw_generation.strip())
    assert produced.after_auto_filter == sum(statuses[s] for s in survivors)
    assert produced.corrected == sum(1 for c in snapshot if c.corrected)
    assert produced.after_feedback_filter == sum(
        1 for c in snapshot
        if c.status in ("Corrected", "AwaitingReview", "Approved", "Rejected") and (c.feedback or "").strip()
    )
    assert produced.approved == statuses["Approved"]
    _report("funnel-replay", started, 30.0)


def test_template_exactness():
    """Assessment instruction matches the published exemplar byte-for-byte."""
    started = time.monotonic()
    rendered = render_evalqa_instruction("What kind of flowers are on the picture to the left?", "pansy")
    assert rendered == (
        "What kind of flowers are on the picture to the left?\n"
        "Answer: pansy. \n"
        "Please examine the correctness of this question and answer "
        "according to the image content. Output Yes or No with the feedback"
    )

    rng = random.Random(99)
    alphabet = "abcdefgh ijKLM.?!,:'019\n"
    for i in range(1000):
        instruction = ("".join(rng.choice(alphabet) for _ in range(rng.randint(1, 50)))).strip() or "q"
        response = ("".join(rng.choice(alphabet) for _ in range(rng.randint(1, 50)))).strip() or "a"
        sample = InstructionSample(
            id=f"rt{i}", image=ImageRef(id=f"i{i}", uri=f"i{i}.jpg"),
            instruction=instruction, response=response, task_tag="EvalQA",
        )
        assert parse_unified(render_unified(sample)) == (instruction, response)
    _report("template-exactness", started, 5.0)


def _run_desk_pipeline(root: Path) -> Path:
    """Run the whole desk pipeline under `root` with a relative-path config.

    Paths in the config and CLI flags stay relative so two runs in different
    roots execute with byte-identical configuration.
    """
    root.mkdir(parents=True, exist_ok=True)
    write_canonical_fixture(make_corpus(300), root / "fixtures" / "vqa.jsonl")
    extra = [make_mc_record(i) for i in range(8)] + [make_grounding_record(i) for i in range(8)]
    write_canonical_fixture(extra, root / "fixtures" / "extra.jsonl")
    (root / "desk.yaml").write_text(
        yaml.safe_dump(
            {
                "seed": 42,
                "out_dir": "out",
                "sources": [
                    {"path": "fixtures/vqa.jsonl", "format": "canonical", "split": "train"},
                    {"path": "fixtures/extra.jsonl", "format": "canonical", "split": "train"},
                ],
                "evalqa": {"sizes": {"train": 100, "val": 10, "test": 10}, "auto_approve": True},
                "client": {"mode": "mock", "error_rate": 0.1},
            }
        ),
        encoding="utf-8",
    )
    steps = [
        ["--config", "desk.yaml", "ingest"],
        ["--config", "desk.yaml", "genqa"],
        ["--config", "desk.yaml", "evalqa", "all", "--auto-approve"],
        ["--config", "desk.yaml", "render", "--in", "out/canonical.jsonl", "--kind", "canonical",
         "--out", "out/vqa_rendered.jsonl"],
        ["--config", "desk.yaml", "render", "--in", "out/genqa.jsonl", "--kind", "genqa",
         "--out", "out/genqa_rendered.jsonl"],
        ["--config", "desk.yaml", "render", "--in", "out/evalqa_train.jsonl", "--kind", "evalqa",
         "--out", "out/evalqa_rendered.jsonl"],
        ["--config", "desk.yaml", "mix", "--inputs",
         "out/vqa_rendered.jsonl:200", "out/genqa_rendered.jsonl:100", "out/evalqa_rendered.jsonl:100",
         "--out", "out/combined.jsonl"],
        ["--config", "desk.yaml", "evaluate", "--testset", "out/evalqa_test.jsonl",
         "--client", "mock", "--out", "out/report.json"],
    ]
    previous = os.getcwd()
    os.chdir(root)
    try:
        for argv in steps:
            assert main(argv) == 0, argv
    finally:
        os.chdir(previous)
    return root / "out"


def test_end_to_end_determinism(tmp_path, capsys):
    """Seed-42 desk pipeline is byte-identical and the oracle eval is perfect."""
    started = time.monotonic()
    out_a = _run_desk_pipeline(tmp_path / "a")
    out_b = _run_desk_pipeline(tmp_path / "b")
    capsys.readouterr()
    artifacts = [
        "canonical.jsonl", "ingest_issues.jsonl", "genqa.jsonl", "genqa_manifest.json",
        "evalqa_train.jsonl", "evalqa_val.jsonl", "evalqa_test.jsonl", "evalqa_funnel.json",
        "vqa_rendered.jsonl", "genqa_rendered.jsonl", "evalqa_rendered.jsonl",
        "combined.jsonl", "combined.manifest.json", "report.json", "report.predictions.jsonl",
    ]
    for name in artifacts:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name

    report = json.loads((out_a / "report.json").read_text())
    assert report["accuracy"] == 100.0
    assert report["no_pct"] == 50.0
    _report("end-to-end-determinism", started, 60.0)


def test_genqa_quota_check(tmp_path, capsys):
    """Paper-scale quota plan sums to 842K; desk counts equal configuration."""
    started = time.monotonic()
    manifest = plan_quotas(PAPER_SCALE_QUOTAS)
    assert manifest["tasks"]["Generic"] == 550_000
    assert manifest["tasks"]["MultiChoice"] == 17_000
    assert manifest["tasks"]["MultiTurn"] == 155_000
    assert manifest["tasks"]["REC"] == 60_000
    assert manifest["tasks"]["REG"] == 60_000
    assert manifest["total"] == 842_000

    # Desk-scale: realized per-task counts equal the configured quotas exactly.
    from vqakit.genqa import PromptPool, build_corpus

    records = make_corpus(40) + [make_mc_record(i) for i in range(5)] + [
        make_grounding_record(i) for i in range(6)
    ]
    desk_quotas = {"Generic": 12, "MultiChoice": 3, "MultiTurn": 4, "REC": 5, "REG": 5}
    _, desk_manifest = build_corpus(records, PromptPool.default(), seed=1, quotas=desk_quotas)
    assert desk_manifest["tasks"] == desk_quotas
    _report("genqa-quota-check", started, 1.0)
