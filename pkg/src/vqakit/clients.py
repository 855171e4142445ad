"""Generation clients: an OpenAI-compatible HTTP client plus deterministic mocks.

All clients share one contract: ``complete(GenerationRequest) -> GenerationResponse``.
Responses can be cached in a content-addressed directory keyed by the
request hash, which makes long generation runs resumable and replays
byte-identical.
"""

from __future__ import annotations

import base64
import json
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import ClientError, ConfigError
from .ingest import CanonicalQA, ImageRef, normalize_answer
from .seeding import content_hash, derive_rng

DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 128

NEGATIVE_PROMPT_MARKER = "This is the question: "
FEEDBACK_PROMPT_MARKER = "Please rephrase the question and answer: "

COLOR_WORDS = (
    "red", "orange", "yellow", "green", "blue", "purple", "pink", "brown",
    "black", "white", "gray", "grey", "silver", "gold", "beige", "tan",
    "maroon", "teal", "navy", "cyan",
)
COLOR_MODIFIERS = ("light", "dark", "pale", "bright", "deep")

_WRONG_OBJECTS = (
    "table", "chair", "dog", "cat", "bicycle", "umbrella", "lamp", "bottle",
    "guitar", "ladder", "kite", "hat", "clock", "mirror", "basket", "bench",
)


@dataclass
class GenerationRequest:
    """One generation call; the key is a pure function of the content fields."""

    model_id: str
    prompt: str
    image: ImageRef | None = None
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")

    @property
    def request_key(self) -> str:
        image_id = self.image.id if self.image else ""
        return content_hash(f"{self.model_id}\x1f{self.prompt}\x1f{image_id}")


@dataclass
class GenerationResponse:
    text: str
    finish_reason: str = "stop"
    latency: float = 0.0
    from_cache: bool = False


class ResponseCache:
    """Content-addressed response store; writes are atomic renames."""

    def __init__(self, cache_dir: str | Path):
        self.dir = Path(cache_dir)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.dir / key[:2] / f"{key}.json"

    def get(self, key: str) -> str | None:
        path = self._path(key)
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["text"]

    def put(self, key: str, text: str) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump({"key": key, "text": text}, fh, ensure_ascii=False)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)


class _CachingClient:
    """Shared cache/counter plumbing for every client implementation."""

    def __init__(self, cache: ResponseCache | None = None):
        self.cache = cache
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, request: GenerationRequest) -> GenerationResponse:
        if self.cache is not None:
            cached = self.cache.get(request.request_key)
            if cached is not None:
                return GenerationResponse(text=cached, from_cache=True)
        started = time.monotonic()
        text = self._generate(request)
        with self._lock:
            self.calls += 1
        if self.cache is not None:
            self.cache.put(request.request_key, text)
        return GenerationResponse(text=text, latency=time.monotonic() - started)

    def _generate(self, request: GenerationRequest) -> str:
        raise NotImplementedError


class HttpChatClient(_CachingClient):
    """OpenAI-compatible chat-completions client with retries and backoff."""

    RETRYABLE_STATUS = (429, 500, 502, 503, 504)

    def __init__(
        self,
        endpoint: str,
        model_id: str,
        api_key: str | None = None,
        api_key_env: str = "VQAKIT_API_KEY",
        supports_images: bool = True,
        max_attempts: int = 4,
        backoff_base: float = 0.5,
        timeout: float = 60.0,
        cache: ResponseCache | None = None,
        sleep=time.sleep,
    ):
        super().__init__(cache)
        self.endpoint = endpoint.rstrip("/")
        self.model_id = model_id
        self.api_key = api_key if api_key is not None else os.environ.get(api_key_env)
        self.supports_images = supports_images
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.retries = 0
        self._sleep = sleep

    def _payload(self, request: GenerationRequest) -> dict:
        if request.image is not None and not self.supports_images:
            raise ClientError("request carries an image but the endpoint is text-only")
        if request.image is None:
            content: object = request.prompt
        else:
            content = [
                {"type": "text", "text": request.prompt},
                {"type": "image_url", "image_url": {"url": self._image_url(request.image)}},
            ]
        return {
            "model": request.model_id or self.model_id,
            "messages": [{"role": "user", "content": content}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }

    @staticmethod
    def _image_url(image: ImageRef) -> str:
        if image.uri.startswith(("http://", "https://", "data:")):
            return image.uri
        path = Path(image.uri)
        if path.is_file():
            encoded = base64.b64encode(path.read_bytes()).decode("ascii")
            return f"data:image/jpeg;base64,{encoded}"
        return image.uri

    def _generate(self, request: GenerationRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = self._payload(request)
        last_error = "exhausted retries"
        for attempt in range(self.max_attempts):
            if attempt > 0:
                self.retries += 1
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                resp = requests.post(
                    f"{self.endpoint}/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise ClientError(f"endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                body = resp.json()
                return body["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ClientError(f"malformed endpoint reply: {exc}") from exc
        raise ClientError(f"gave up after {self.max_attempts} attempts ({last_error})")


# ---------------------------------------------------------------------------
# deterministic mocks

def _parse_negative_prompt(prompt: str) -> str:
    m = re.match(
        r"\AThis is the question: (.*)\. Please give me the wrong answer", prompt, re.DOTALL
    )
    if m is None:
        raise ClientError("mock client got an unrecognized negative-answer prompt")
    return m.group(1)


def _parse_feedback_prompt(prompt: str) -> tuple[str, str]:
    m = re.match(
        r"\APlease rephrase the question and answer: (.*)\n(.*) into one short description\.\Z",
        prompt,
        re.DOTALL,
    )
    if m is None:
        raise ClientError("mock client got an unrecognized feedback prompt")
    return m.group(1), m.group(2)


def mock_negative(base: CanonicalQA, seed: int, error_rate: float = 0.0) -> str:
    """Emit a type-consistent wrong answer for `base`, deterministic in the seed.

    With probability `error_rate` the output instead reproduces one of the
    known generation failure patterns (echoed question word, ground-truth
    copy, category mix-up, malformed text) so downstream filters are exercised.
    """
    rng = derive_rng(seed, "mock-negative", base.record_id)
    gt = normalize_answer(base.answer)
    if error_rate > 0 and rng.random() < error_rate:
        return _inject_error(base, gt, rng)

    qtype = base.question_type
    if qtype == "YesNo":
        return "no" if gt == "yes" else "yes"
    if qtype in ("Counting", "Number"):
        try:
            value = int(gt)
        except ValueError:
            value = None
        if value is None:
            pick = rng.randint(0, 20)
            return str(pick)
        candidates = [v for v in range(max(0, value - 3), value + 4) if v != value]
        return str(rng.choice(candidates))
    if qtype == "Color":
        options = [c for c in COLOR_WORDS if c != gt]
        return rng.choice(options)
    options = [w for w in _WRONG_OBJECTS if w != gt]
    return rng.choice(options)


def _inject_error(base: CanonicalQA, gt: str, rng) -> str:
    patterns = ["equals_gt", "echo", "malformed"]
    if base.question_type in ("Counting", "YesNo", "Color"):
        patterns.append("mismatch")
    pattern = rng.choice(patterns)
    if pattern == "equals_gt":
        return base.answer
    if pattern == "echo":
        words = [w for w in normalize_answer(base.question).replace("?", " ").split() if len(w) > 3]
        return rng.choice(words) if words else base.question
    if pattern == "mismatch":
        if base.question_type == "Counting":
            return rng.choice([c for c in COLOR_WORDS if c != gt])
        if base.question_type == "YesNo":
            return rng.choice(_WRONG_OBJECTS)
        return str(rng.randint(0, 20))
    malformed = [
        "",
        "The wrong answer to this question is unknowable",
        "it could be one of many different things here",
    ]
    return rng.choice(malformed)


def mock_feedback(question: str, answer: str, seed: int, error_rate: float = 0.0) -> str:
    """Emit a short declarative restatement of (question, answer)."""
    rng = derive_rng(seed, "mock-feedback", question, answer)
    if error_rate > 0 and rng.random() < error_rate:
        pattern = rng.choice(["empty", "overlength", "prompt_echo"])
        if pattern == "empty":
            return ""
        if pattern == "overlength":
            return "the answer " * 30
        return f"Please rephrase the question and answer: {question}\n{answer} into one short description."
    return f"the answer to \"{question.rstrip('?').strip()}\" is {answer}"


class MockVisionClient(_CachingClient):
    """Stand-in for the vision model that generates negative answers.

    The real model sees the image; the mock instead looks the record up in
    the corpus it was constructed with, so its wrong answers can stay
    type-consistent with the ground truth.
    """

    def __init__(self, records, seed: int, error_rate: float = 0.0, cache: ResponseCache | None = None):
        super().__init__(cache)
        self.seed = seed
        self.error_rate = error_rate
        self._index: dict[tuple[str, str], CanonicalQA] = {}
        for record in records:
            self._index[(record.image.id, normalize_answer(record.question))] = record

    def _generate(self, request: GenerationRequest) -> str:
        question = _parse_negative_prompt(request.prompt)
        image_id = request.image.id if request.image else ""
        record = self._index.get((image_id, normalize_answer(question)))
        if record is None:
            raise ClientError(f"mock vision client has no record for image {image_id!r}")
        return mock_negative(record, self.seed, self.error_rate)


class MockFeedbackClient(_CachingClient):
    """Stand-in for the text model that rephrases QA pairs into feedback."""

    def __init__(self, seed: int, error_rate: float = 0.0, cache: ResponseCache | None = None):
        super().__init__(cache)
        self.seed = seed
        self.error_rate = error_rate

    def _generate(self, request: GenerationRequest) -> str:
        question, answer = _parse_feedback_prompt(request.prompt)
        return mock_feedback(question, answer, self.seed, self.error_rate)


class OracleClient(_CachingClient):
    """Echoes the gold label carried in request metadata; for harness tests."""

    def _generate(self, request: GenerationRequest) -> str:
        gold = request.metadata.get("gold")
        if gold not in ("Yes", "No"):
            raise ClientError("oracle client needs a gold label in request metadata")
        return gold


class FlipClient(_CachingClient):
    """Answers the gold label but flips it at a fixed rate, per-sample seeded."""

    def __init__(self, flip_rate: float, seed: int, cache: ResponseCache | None = None):
        super().__init__(cache)
        self.flip_rate = flip_rate
        self.seed = seed

    def _generate(self, request: GenerationRequest) -> str:
        gold = request.metadata.get("gold")
        if gold not in ("Yes", "No"):
            raise ClientError("flip client needs a gold label in request metadata")
        rng = derive_rng(self.seed, "flip", request.metadata.get("sample_id", request.request_key))
        if rng.random() < self.flip_rate:
            return "No" if gold == "Yes" else "Yes"
        return gold
