"""Pluggable chat, rewrite and embedding backends with record/replay.

Every provider call is a JSON request/response pair. Requests are
fingerprinted by hashing their canonical serialization, which makes
recorded transcripts stable across runs and platforms and lets any
pipeline run be replayed bit-for-bit with zero network access.

Wire contracts:
  chat     {"messages": [{"role", "content"}], "temperature", "max_tokens"}
           -> {"content": str}
  rewrite  {"mode": "question" | "sentence", "text": str}
           -> {"outputs": [str]}
  embed    {"texts": [str]} -> {"vectors": [[float]]}
"""
from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

logger = logging.getLogger(__name__)

EMBED_DIM = 4096
EMBED_NGRAM = 3


class ProviderError(RuntimeError):
    """Transport or contract failure of a provider backend."""


class ReplayMissError(ProviderError):
    """A replay transcript has no entry for the request fingerprint."""

    def __init__(self, fp: str):
        super().__init__(
            f"no recorded response for request fingerprint {fp}; "
            "refusing to fall through to the network"
        )
        self.fingerprint = fp


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def request_fingerprint(payload) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


@dataclass
class Transcript:
    """Recorded request/response pairs keyed by request fingerprint."""

    entries: dict[str, dict] = field(default_factory=dict)
    requests: dict[str, dict] = field(default_factory=dict)  # kept for auditing
    provider: str = ""
    captured: str = ""

    def record(self, request: dict, response: dict) -> None:
        fp = request_fingerprint(request)
        self.entries[fp] = response
        self.requests[fp] = request

    def lookup(self, request: dict) -> dict:
        fp = request_fingerprint(request)
        if fp not in self.entries:
            raise ReplayMissError(fp)
        return self.entries[fp]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        lines = [canonical_json({"meta": {"provider": self.provider, "captured": self.captured}})]
        for fp in sorted(self.entries):
            lines.append(
                canonical_json(
                    {
                        "fingerprint": fp,
                        "request": self.requests.get(fp),
                        "response": self.entries[fp],
                    }
                )
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Transcript:
        transcript = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "meta" in record:
                transcript.provider = record["meta"].get("provider", "")
                transcript.captured = record["meta"].get("captured", "")
                continue
            transcript.entries[record["fingerprint"]] = record["response"]
            if record.get("request") is not None:
                transcript.requests[record["fingerprint"]] = record["request"]
        return transcript


class JsonProvider(Protocol):
    def call(self, request: dict) -> dict: ...


class ScriptedProvider:
    """Test/backfill backend: a plain function produces the response."""

    def __init__(self, handler: Callable[[dict], dict]):
        self._handler = handler

    def call(self, request: dict) -> dict:
        return self._handler(request)


class ReplayProvider:
    """Serves recorded responses only; replay misses fail loudly."""

    def __init__(self, transcript: Transcript):
        self.transcript = transcript

    def call(self, request: dict) -> dict:
        return self.transcript.lookup(request)


class RecordingProvider:
    """Delegates to an inner provider and appends to a transcript."""

    def __init__(self, inner: JsonProvider, transcript: Transcript):
        self.inner = inner
        self.transcript = transcript
        self._lock = threading.Lock()

    def call(self, request: dict) -> dict:
        response = self.inner.call(request)
        with self._lock:
            self.transcript.record(request, response)
        return response


class HttpProvider:
    """POSTs the request as JSON with retry, backoff and rate limiting."""

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        max_in_flight: int | None = None,
        requests_per_second: float | None = None,
        session=None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._slots = threading.Semaphore(max_in_flight) if max_in_flight else None
        self._min_interval = 1.0 / requests_per_second if requests_per_second else 0.0
        self._last_request = 0.0
        self._rate_lock = threading.Lock()
        if session is None:
            import requests  # deferred so offline modes never import it

            session = requests.Session()
        self._session = session

    def _throttle(self) -> None:
        if not self._min_interval:
            return
        with self._rate_lock:
            wait = self._last_request + self._min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()

    def call(self, request: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            if self._slots:
                self._slots.acquire()
            try:
                self._throttle()
                response = self._session.post(
                    self.endpoint, json=request, headers=headers, timeout=self.timeout
                )
                response.raise_for_status()
                return response.json()
            except Exception as exc:  # transport and HTTP errors alike
                last_error = exc
                logger.warning("provider call failed (attempt %d): %s", attempt + 1, exc)
                time.sleep(self.backoff * 2**attempt)
            finally:
                if self._slots:
                    self._slots.release()
        raise ProviderError(f"provider at {self.endpoint} failed after {self.max_retries} attempts: {last_error}")


class ChatProvider:
    """Role wrapper for the chat wire contract."""

    def __init__(self, backend: JsonProvider, temperature: float = 0.0, max_tokens: int = 2048):
        self.backend = backend
        self.temperature = temperature
        self.max_tokens = max_tokens

    def complete(self, messages: list[dict]) -> str:
        request = {
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        response = self.backend.call(request)
        if "content" not in response:
            raise ProviderError(f"chat response missing 'content': {response}")
        return response["content"]


class Rewriter:
    """Role wrapper for the rewrite wire contract."""

    def __init__(self, backend: JsonProvider):
        self.backend = backend

    def rewrite(self, mode: str, text: str) -> list[str]:
        response = self.backend.call({"mode": mode, "text": text})
        outputs = response.get("outputs")
        if not isinstance(outputs, list):
            raise ProviderError(f"rewrite response missing 'outputs': {response}")
        return [str(o) for o in outputs]


class IdentityRewriteBackend:
    """Offline default: every text rewrites to itself."""

    def call(self, request: dict) -> dict:
        return {"outputs": [request["text"]]}


def identity_rewriter() -> Rewriter:
    return Rewriter(IdentityRewriteBackend())


class HashingEmbedder:
    """Deterministic offline embedder: character 3-gram feature hashing.

    Texts are whitespace-collapsed and padded with one boundary space on
    each side; each 3-gram is counted into one of 4096 buckets chosen by a
    stable blake2b hash, and the vector is L2-normalized. Empty texts map
    to the zero vector, whose cosine against anything is defined as 0.
    """

    dim = EMBED_DIM

    def embed(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            padded = " " + " ".join(text.split()) + " "
            if len(padded) < EMBED_NGRAM + 1:  # nothing but padding
                continue
            for j in range(len(padded) - EMBED_NGRAM + 1):
                gram = padded[j : j + EMBED_NGRAM]
                digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
                out[i, int.from_bytes(digest, "big") % self.dim] += 1.0
            norm = np.linalg.norm(out[i])
            if norm > 0:
                out[i] /= norm
        return out


class HttpEmbedder:
    """Embedding over the HTTP wire contract; enforces constant dimension."""

    def __init__(self, backend: JsonProvider):
        self.backend = backend

    def embed(self, texts: list[str]) -> np.ndarray:
        response = self.backend.call({"texts": list(texts)})
        vectors = response.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderError("embedding response malformed or wrong length")
        dims = {len(v) for v in vectors}
        if len(dims) > 1:
            raise ProviderError(f"embedding dimension drift within batch: {sorted(dims)}")
        out = np.asarray(vectors, dtype=np.float64)
        norms = np.linalg.norm(out, axis=1)
        nonzero = norms > 0
        out[nonzero] = out[nonzero] / norms[nonzero, None]
        return out


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine between two vectors; 0.0 when either is the zero vector."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
