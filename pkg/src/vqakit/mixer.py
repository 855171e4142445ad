"""Combine per-task training files into one shuffled corpus with a manifest.

Mixing is line-oriented and schema-agnostic: per-source quota sampling,
concatenation in source order, then one seeded in-memory shuffle. The
manifest records sources, quotas, realized counts, the seed, and a digest
of the combined file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError
from .seeding import derive_rng


@dataclass
class MixInput:
    path: str
    quota: int | None = None

    @classmethod
    def parse(cls, spec: str) -> "MixInput":
        """Parse "path" or "path:quota" CLI shorthand."""
        if ":" in spec and spec.rsplit(":", 1)[1].isdigit():
            path, quota = spec.rsplit(":", 1)
            return cls(path=path, quota=int(quota))
        return cls(path=spec)


def plan(inputs: list[MixInput]) -> dict:
    """Quota arithmetic only; no file is touched (all quotas must be set)."""
    sources = []
    for item in inputs:
        if item.quota is None:
            raise DataError(f"plan requires an explicit quota for {item.path}")
        sources.append({"path": item.path, "quota": item.quota})
    return {"sources": sources, "total": sum(s["quota"] for s in sources)}


def mix(inputs: list[MixInput], out_path: str | Path, seed: int, manifest_path: str | Path | None = None) -> dict:
    """Sample each source to quota, shuffle the union, write corpus + manifest."""
    out_path = Path(out_path)
    selected: list[str] = []
    sources = []
    for index, item in enumerate(inputs):
        path = Path(item.path)
        if not path.is_file():
            raise DataError(f"mix input not found: {path}")
        lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        if item.quota is not None:
            if item.quota > len(lines):
                raise DataError(
                    f"quota {item.quota} for source {path} exceeds its {len(lines)} records"
                )
            rng = derive_rng(seed, "mix-quota", index)
            picked = sorted(rng.sample(range(len(lines)), item.quota))
            lines = [lines[i] for i in picked]
        sources.append({"path": str(path), "quota": item.quota, "count": len(lines)})
        selected.extend(lines)

    derive_rng(seed, "mix-shuffle").shuffle(selected)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    body = "".join(line + "\n" for line in selected)
    out_path.write_text(body, encoding="utf-8")

    manifest = {
        "sources": sources,
        "total": len(selected),
        "seed": seed,
        "output": str(out_path),
        "sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
    }
    if manifest_path is not None:
        manifest_path = Path(manifest_path)
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
