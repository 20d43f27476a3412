"""Text-to-vector embedders.

``LocalEmbedder`` is a deterministic hashed bag-of-tokens used for tests and
offline runs. ``RemoteEmbedder`` talks to an OpenAI-compatible
``/v1/embeddings`` endpoint and caches vectors by exact text.
"""

from __future__ import annotations

import hashlib
import math
import re
import threading
import time
from abc import ABC, abstractmethod
from typing import Callable

import httpx

from expmem import _http
from expmem.errors import InvalidInput, ProtocolViolation

DEFAULT_LOCAL_DIMENSION = 1024
DEFAULT_REMOTE_MODEL = "text-embedding-3-large"

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def _check_text(text: str) -> None:
    if not text or not text.strip():
        raise InvalidInput("cannot embed empty text")


class Embedder(ABC):
    name: str
    dimension: int | None

    @abstractmethod
    def embed(self, text: str) -> tuple[float, ...]:
        """Return the embedding of ``text``."""


class LocalEmbedder(Embedder):
    """Signed feature hashing over lowercase alphanumeric tokens, L2-normalised.

    The default dimension is 1024: at 256 the few dozen scenario words
    already collide often enough to reorder nearest neighbours.
    """

    def __init__(self, dimension: int = DEFAULT_LOCAL_DIMENSION, hash_seed: int = 0) -> None:
        if dimension < 16:
            raise InvalidInput(f"local embedder needs dimension >= 16, got {dimension}")
        self.dimension = dimension
        self.hash_seed = hash_seed
        self.name = f"local-hash-{dimension}-{hash_seed}"
        self._key = hash_seed.to_bytes(8, "little", signed=True)

    def token_hash(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
        return int.from_bytes(digest, "little")

    def bucket(self, token: str) -> tuple[int, float]:
        h = self.token_hash(token)
        return h % self.dimension, (-1.0 if (h >> 63) & 1 else 1.0)

    def embed(self, text: str) -> tuple[float, ...]:
        _check_text(text)
        vec = [0.0] * self.dimension
        for token in tokenize(text):
            idx, sign = self.bucket(token)
            vec[idx] += sign
        norm = math.sqrt(math.fsum(v * v for v in vec))
        if norm == 0.0:
            raise InvalidInput(f"text {text!r} has no embeddable tokens")
        return tuple(v / norm for v in vec)


class RemoteEmbedder(Embedder):
    """OpenAI-compatible embeddings client with an exact-text cache."""

    def __init__(
        self,
        base_url: str | None = None,
        model_name: str = DEFAULT_REMOTE_MODEL,
        api_key: str | None = None,
        client: httpx.Client | None = None,
        timeout: float = _http.DEFAULT_TIMEOUT,
        attempts: int = _http.DEFAULT_ATTEMPTS,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.base_url = _http.resolve_base_url(base_url)
        self.model_name = model_name
        self.name = f"remote-{model_name}"
        self.dimension: int | None = None
        self._headers = _http.auth_headers(api_key)
        self._client = client or httpx.Client(timeout=timeout)
        self._attempts = attempts
        self._backoff = backoff
        self._sleep = sleep
        self._cache: dict[str, tuple[float, ...]] = {}
        self._lock = threading.Lock()
        self.remote_calls = 0

    def embed(self, text: str) -> tuple[float, ...]:
        _check_text(text)
        with self._lock:
            hit = self._cache.get(text)
        if hit is not None:
            return hit
        vec = self._fetch(text)
        with self._lock:
            if self.dimension is None:
                self.dimension = len(vec)
            elif len(vec) != self.dimension:
                raise InvalidInput(f"remote returned dimension {len(vec)}, expected {self.dimension}")
            return self._cache.setdefault(text, vec)

    def _fetch(self, text: str) -> tuple[float, ...]:
        self.remote_calls += 1
        body = _http.post_json(
            self._client,
            f"{self.base_url}/v1/embeddings",
            {"model": self.model_name, "input": text},
            self._headers,
            attempts=self._attempts,
            backoff=self._backoff,
            sleep=self._sleep,
        )
        try:
            raw = body["data"][0]["embedding"]
            vec = tuple(float(x) for x in raw)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProtocolViolation(f"malformed embeddings response: {exc}") from exc
        if not vec:
            raise ProtocolViolation("embeddings response carried an empty vector")
        return vec


def local_embedder(dimension: int = DEFAULT_LOCAL_DIMENSION, hash_seed: int = 0) -> LocalEmbedder:
    return LocalEmbedder(dimension, hash_seed)


def remote_embedder(
    base_url: str | None = None, model_name: str = DEFAULT_REMOTE_MODEL, auth: str | None = None, **kwargs
) -> RemoteEmbedder:
    return RemoteEmbedder(base_url, model_name, auth, **kwargs)
