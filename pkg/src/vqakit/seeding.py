"""Stable sub-seed derivation.

Every stochastic stage draws from an rng seeded by the run seed plus the
identifiers of the item it is working on, so parallel scheduling or
resumption never changes the output.
"""

import hashlib
import random


def derive_seed(*parts: object) -> int:
    """Collapse (seed, stage, record_id, ...) into a stable 64-bit seed."""
    key = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(*parts: object) -> random.Random:
    return random.Random(derive_seed(*parts))


def content_hash(text: str) -> str:
    """Stable short hash used for prompt provenance and cache keys."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
