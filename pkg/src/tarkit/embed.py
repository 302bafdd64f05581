"""Sentence embedding providers and cosine similarity."""

from __future__ import annotations

import hashlib
import math
import re
import threading
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Protocol

import httpx

from tarkit._http import RetriesExhausted, auth_headers, post_json
from tarkit.errors import DimensionMismatch, ProviderUnavailable, ZeroVector
from tarkit.store import FileStore, content_key

# The embedder the reward thresholds were tuned against.
REFERENCE_PROVIDER = "sentence-transformers/all-MiniLM-L6-v2"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True, slots=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("embedding must have at least one dimension")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding entries must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)


class EmbeddingProvider(Protocol):
    provider_id: str

    def embed(self, text: str) -> EmbeddingVector: ...

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise DimensionMismatch(f"cannot compare {a.dim}-dim and {b.dim}-dim vectors")
    norm_a = math.sqrt(sum(x * x for x in a.values))
    norm_b = math.sqrt(sum(y * y for y in b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine is undefined for a zero vector")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return max(-1.0, min(1.0, dot / (norm_a * norm_b)))


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class HashingEmbedder:
    """Deterministic hashed bag-of-words over lowercase alphanumeric tokens.

    Token counts land in ``dim`` buckets chosen by BLAKE2b, and the result is
    L2-normalised. Text with no tokens embeds to the zero vector.
    """

    def __init__(self, dim: int = 256) -> None:
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.provider_id = f"hashing-bow-{dim}"

    def bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("cannot embed empty text")
        counts = [0.0] * self.dim
        for token in tokenize(text):
            counts[self.bucket(token)] += 1.0
        norm = math.sqrt(sum(c * c for c in counts))
        if norm:
            counts = [c / norm for c in counts]
        return EmbeddingVector(tuple(counts))

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self.embed(t) for t in texts]


class RemoteEmbedder:
    """Client for an HTTP service that embeds a batch of texts.

    Sends ``{"model": ..., "input": [texts]}`` and accepts either
    ``{"embeddings": [[...], ...]}`` or ``{"data": [{"embedding": [...]}, ...]}``.
    """

    def __init__(
        self,
        base_url: str,
        *,
        model: str = REFERENCE_PROVIDER,
        dim: int | None = None,
        api_key_env: str | None = "TARKIT_EMBED_API_KEY",
        timeout_s: float = 30.0,
        attempts: int = 3,
        backoff_s: float = 0.5,
        client: httpx.Client | None = None,
    ) -> None:
        self.url = base_url
        self.attempts = attempts
        self.backoff_s = backoff_s
        self.model = model
        self.expected_dim = dim
        self.provider_id = f"remote:{model}"
        self._headers = auth_headers(api_key_env)
        self._client = client or httpx.Client(timeout=timeout_s)

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if any(not t for t in texts):
            raise ValueError("cannot embed empty text")
        if not texts:
            return []
        try:
            body = post_json(
                self._client, self.url, {"model": self.model, "input": list(texts)},
                headers=self._headers, attempts=self.attempts, backoff_s=self.backoff_s,
            )
        except RetriesExhausted as exc:
            raise ProviderUnavailable(str(exc)) from exc
        try:
            if isinstance(body, dict) and "embeddings" in body:
                rows = body["embeddings"]
            else:
                rows = [item["embedding"] for item in body["data"]]
            vectors = [EmbeddingVector(tuple(float(v) for v in row)) for row in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderUnavailable(f"unexpected embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderUnavailable(f"asked for {len(texts)} embeddings, got {len(vectors)}")
        dims = {v.dim for v in vectors}
        if len(dims) > 1 or (self.expected_dim is not None and dims != {self.expected_dim}):
            raise ProviderUnavailable(f"inconsistent embedding dims {sorted(dims)}")
        return vectors


class CachedEmbedder:
    """Memoise another provider by (provider id, text hash), optionally on disk."""

    def __init__(self, provider: EmbeddingProvider, store: FileStore | None = None) -> None:
        self.provider = provider
        self.provider_id = provider.provider_id
        self.store = store
        self._memory: dict[str, EmbeddingVector] = {}
        self._lock = threading.Lock()
        self.misses = 0

    def _key(self, text: str) -> str:
        return content_key("embedding", self.provider_id, text)

    def _lookup(self, key: str) -> EmbeddingVector | None:
        if key in self._memory:
            return self._memory[key]
        if self.store is not None:
            entry = self.store.get(key)
            if entry is not None:
                vector = EmbeddingVector(tuple(entry["values"]))
                self._memory[key] = vector
                return vector
        return None

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        keys = [self._key(t) for t in texts]
        with self._lock:
            found = {k: v for k in keys if (v := self._lookup(k)) is not None}
            missing = list(dict.fromkeys(t for t, k in zip(texts, keys) if k not in found))
            if missing:
                self.misses += len(missing)
                for text, vector in zip(missing, self.provider.embed_batch(missing)):
                    key = self._key(text)
                    found[key] = self._memory[key] = vector
                    if self.store is not None:
                        self.store.put(
                            key,
                            {"provider": self.provider_id, "text": text, "values": list(vector.values)},
                        )
        return [found[k] for k in keys]
