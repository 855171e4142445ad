"""Corpus statistics: type distribution, token frequencies, length histograms.

Outputs are plain rows for CSV/JSON so external tooling does the plotting.
The noun/verb split uses a small bundled lexicon - deterministic and
dependency-free, at the cost of coverage.
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from pathlib import Path
from typing import Iterable

from .errors import ConfigError
from .evaluate import round2

_TOKEN_RE = re.compile(r"[a-z]+(?:'[a-z]+)?")

# Compact part-of-speech lexicon tuned to feedback-style sentences.
NOUN_LEXICON = frozenset(
    """picture image photo answer question man woman person people child children boy girl
    dog cat animal bird horse sheep cow elephant bear zebra giraffe
    truck car bus train boat plane airplane bicycle bike motorcycle
    tree flower flowers plant grass leaf leaves rose roses pansy
    table chair bench couch bed desk shelf lamp clock mirror window door wall floor
    kitchen room bathroom street road sidewalk building house sign

    food pizza cake sandwich fruit apple banana orange oranges vase vases bag
    number color colour side left right top bottom front back region
    shirt jacket hat pants dress shoe shoes backpack umbrella
    sun sky cloud water snow rain beach mountain field park
    sink plate bowl cup glass bottle fork knife spoon pot
    ball bat racket kite board phone laptop computer screen television tv
    """.split()
)

VERB_LEXICON = frozenset(
    """is are was were be been being shows show showing says say saying
    has have had holds hold holding wears wear wearing stands stand standing
    sits sit sitting walks walk walking runs run running rides ride riding
    plays play playing eats eat eating drinks drink drinking looks look looking
    appears appear appearing contains contain containing depicts depict depicting
    hangs hang hanging flies fly flying jumps jump jumping sleeps sleep sleeping
    reads read reading writes write writing written points point pointing
    parked park parking placed place placing located locate
    motorcycling skiing surfing skateboarding swimming
    """.split()
)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def type_distribution(question_types: Iterable[str]) -> list[dict]:
    """Per-type counts and computed proportions (percent, two decimals)."""
    counts = Counter(question_types)
    total = sum(counts.values())
    rows = []
    for qtype in sorted(counts, key=lambda t: (-counts[t], t)):
        rows.append(
            {
                "type": qtype,
                "count": counts[qtype],
                "proportion": round2(100.0 * counts[qtype] / total) if total else 0.0,
            }
        )
    return rows


def token_frequency(texts: Iterable[str], top_k: int) -> list[tuple[str, int]]:
    """Ranked (token, count), most frequent first, lexicographic tie-break."""
    if top_k < 1:
        raise ConfigError("top_k must be >= 1")
    counts = Counter()
    for text in texts:
        counts.update(tokenize(text))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_k]


def pos_frequency(texts: Iterable[str], top_k: int, pos: str) -> list[tuple[str, int]]:
    """token_frequency restricted to the bundled noun or verb lexicon."""
    lexicon = {"noun": NOUN_LEXICON, "verb": VERB_LEXICON}.get(pos)
    if lexicon is None:
        raise ConfigError(f"unknown part of speech {pos!r}; expected noun or verb")
    if top_k < 1:
        raise ConfigError("top_k must be >= 1")
    counts = Counter()
    for text in texts:
        counts.update(t for t in tokenize(text) if t in lexicon)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_k]


def length_histogram(texts: Iterable[str], bucket: int) -> dict[str, int]:
    """Histogram of whitespace word counts in [k*bucket, (k+1)*bucket) buckets."""
    if bucket <= 0:
        raise ConfigError("bucket size must be positive")
    counts: Counter = Counter()
    for text in texts:
        length = len(text.split())
        counts[length // bucket] += 1
    return {
        f"[{k * bucket},{(k + 1) * bucket})": counts[k]
        for k in sorted(counts)
    }


def write_rows(rows: list[dict], path: str | Path) -> None:
    """Write rows as CSV, or JSON when the path ends in .json."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".json":
        path.write_text(json.dumps(rows, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return
    if not rows:
        path.write_text("", encoding="utf-8")
        return
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
