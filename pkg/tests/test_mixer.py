"""Quota sampling, shuffling, manifests."""

from __future__ import annotations

import json
from collections import Counter

import pytest

from vqakit.errors import DataError
from vqakit.mixer import MixInput, mix, plan


def _source(tmp_path, name, n):
    path = tmp_path / name
    rows = [json.dumps({"id": f"{name}:{i}", "text": f"row {i}"}) for i in range(n)]
    path.write_text("".join(r + "\n" for r in rows), encoding="utf-8")
    return path


class TestPlan:
    def test_paper_scale_totals(self):
        manifest = plan(
            [
                MixInput("vqa.jsonl", 665_000),
                MixInput("genqa.jsonl", 842_000),
                MixInput("evalqa.jsonl", 64_000),
            ]
        )
        assert manifest["total"] == 1_571_000

    def test_plan_requires_quotas(self):
        with pytest.raises(DataError):
            plan([MixInput("a.jsonl", None)])


class TestMix:
    def test_desk_counts_and_manifest(self, tmp_path):
        a = _source(tmp_path, "a.jsonl", 150)
        b = _source(tmp_path, "b.jsonl", 120)
        c = _source(tmp_path, "c.jsonl", 40)
        out = tmp_path / "combined.jsonl"
        manifest = mix(
            [MixInput(str(a), 100), MixInput(str(b), 100), MixInput(str(c), 20)],
            out,
            seed=5,
            manifest_path=tmp_path / "manifest.json",
        )
        lines = out.read_text().splitlines()
        assert len(lines) == 220
        assert manifest["total"] == 220
        assert [s["count"] for s in manifest["sources"]] == [100, 100, 20]
        saved = json.loads((tmp_path / "manifest.json").read_text())
        assert saved["sha256"] == manifest["sha256"]

    def test_same_seed_byte_identical(self, tmp_path):
        a = _source(tmp_path, "a.jsonl", 60)
        out1, out2 = tmp_path / "c1.jsonl", tmp_path / "c2.jsonl"
        mix([MixInput(str(a), 50)], out1, seed=9)
        mix([MixInput(str(a), 50)], out2, seed=9)
        assert out1.read_bytes() == out2.read_bytes()

    def test_different_seeds_permute_same_multiset(self, tmp_path):
        a = _source(tmp_path, "a.jsonl", 80)
        out1, out2 = tmp_path / "s1.jsonl", tmp_path / "s2.jsonl"
        mix([MixInput(str(a), None)], out1, seed=1)
        mix([MixInput(str(a), None)], out2, seed=2)
        lines1 = out1.read_text().splitlines()
        lines2 = out2.read_text().splitlines()
        assert lines1 != lines2
        assert Counter(lines1) == Counter(lines2)

    def test_multiset_preserved_under_quota(self, tmp_path):
        a = _source(tmp_path, "a.jsonl", 30)
        b = _source(tmp_path, "b.jsonl", 30)
        out = tmp_path / "c.jsonl"
        mix([MixInput(str(a), 20), MixInput(str(b), None)], out, seed=3)
        combined_ids = Counter(json.loads(l)["id"] for l in out.read_text().splitlines())
        assert sum(combined_ids.values()) == 50
        assert all(count == 1 for count in combined_ids.values())
        b_ids = {f"b.jsonl:{i}" for i in range(30)}
        assert b_ids <= set(combined_ids)

    def test_quota_exceeding_source_names_it(self, tmp_path):
        a = _source(tmp_path, "small.jsonl", 5)
        with pytest.raises(DataError) as err:
            mix([MixInput(str(a), 10)], tmp_path / "x.jsonl", seed=1)
        assert "small.jsonl" in str(err.value)

    def test_missing_input_rejected(self, tmp_path):
        with pytest.raises(DataError):
            mix([MixInput(str(tmp_path / "ghost.jsonl"), None)], tmp_path / "x.jsonl", seed=1)

    def test_cli_spec_parsing(self):
        assert MixInput.parse("a.jsonl:100") == MixInput("a.jsonl", 100)
        assert MixInput.parse("b.jsonl") == MixInput("b.jsonl", None)
        assert MixInput.parse("dir:with:colons.jsonl:7") == MixInput("dir:with:colons.jsonl", 7)
