"""Curation pipeline and benchmark harness for VQA answering/asking/assessment data."""

from .errors import ClientError, ConfigError, DataError, VqakitError
from .ingest import BBox, CanonicalQA, ImageRef, classify_question, normalize_answer, parse_source

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "CanonicalQA",
    "ClientError",
    "ConfigError",
    "DataError",
    "ImageRef",
    "VqakitError",
    "classify_question",
    "normalize_answer",
    "parse_source",
    "__version__",
]
