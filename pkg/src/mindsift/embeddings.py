"""Sentence-embedding providers (remote endpoint or deterministic stub) with
a persistent on-disk cache."""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .caching import VectorCache
from .errors import DimensionMismatch, EmptyText, ProviderUnavailable

DEFAULT_DIMENSION = 768
_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


def stable_text_hash(text: str) -> int:
    """First 8 bytes of SHA-256 as an unsigned 64-bit integer.

    Unlike builtin hash() this is identical across processes and platforms.
    """
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def embedding_key(model_name: str, text: str) -> str:
    """Cache key: content hash over model name and text, so raw-post and
    summary embeddings share one store."""
    return hashlib.sha256((model_name + "\x00" + text).encode("utf-8")).hexdigest()


def stub_embed(text: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    """Deterministic offline embedding: standard normals seeded by the stable
    text hash, scaled to unit Euclidean norm."""
    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, got {dimension}")
    rng = np.random.default_rng(stable_text_hash(text))
    v = rng.standard_normal(dimension)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        v[0] = 1.0
        norm = 1.0
    return v / norm


@dataclass
class EmbeddingProviderConfig:
    kind: str = "stub"  # "stub" | "remote"
    model_name: str = "stub-768"
    dimension: int = DEFAULT_DIMENSION
    max_batch: int = 32
    base_url: str | None = None
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 1.0

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if self.kind not in ("stub", "remote"):
            raise ValueError(f"unknown embedding provider kind {self.kind!r}")


class StubEmbedder:
    def __init__(self, config: EmbeddingProviderConfig):
        self.config = config

    @property
    def model_name(self) -> str:
        return self.config.model_name

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        return [stub_embed(t, self.config.dimension).tolist() for t in texts]


class RemoteEmbedder:
    """Client for the common JSON embeddings endpoint.

    Request: {"model": ..., "input": [texts]}; response: {"data": [{"index",
    "embedding"}]} sorted by index. Bearer auth from EMBEDDINGS_API_KEY; base
    URL from config or EMBEDDINGS_BASE_URL.
    """

    def __init__(self, config: EmbeddingProviderConfig, session=None, sleep=time.sleep):
        base = config.base_url or os.environ.get("EMBEDDINGS_BASE_URL")
        if not base:
            raise ValueError("remote embedder needs a base URL (config or EMBEDDINGS_BASE_URL)")
        self.config = config
        self.url = base.rstrip("/") + "/embeddings"
        self.session = session or requests.Session()
        self._sleep = sleep
        self.api_key = os.environ.get("EMBEDDINGS_API_KEY")

    @property
    def model_name(self) -> str:
        return self.config.model_name

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        payload = {"model": self.config.model_name, "input": list(texts)}
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = _post_with_retries(
            self.session,
            self.url,
            payload,
            headers,
            timeout=self.config.timeout,
            retries=self.config.retries,
            backoff=self.config.backoff,
            sleep=self._sleep,
        )
        try:
            data = sorted(body["data"], key=lambda d: d["index"])
            vectors = [d["embedding"] for d in data]
        except (KeyError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed embeddings response: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderUnavailable(
                f"provider returned {len(vectors)} embeddings for {len(texts)} inputs"
            )
        return vectors


def _post_with_retries(session, url, payload, headers, *, timeout, retries, backoff, sleep):
    """POST with bounded retries and exponential backoff on transport errors
    and rate-limit/server statuses; raises ProviderUnavailable afterwards."""
    last = None
    for attempt in range(retries):
        try:
            resp = session.post(url, json=payload, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            last = str(exc)
        else:
            status = resp.status_code
            if status == 200:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise ProviderUnavailable(f"{url}: non-JSON response: {exc}") from exc
            last = f"HTTP {status}"
            if status not in _RETRYABLE_STATUS:
                raise ProviderUnavailable(f"{url}: {last}")
        if attempt + 1 < retries:
            sleep(backoff * (2**attempt))
    raise ProviderUnavailable(f"{url}: giving up after {retries} attempts ({last})")


def make_embedder(config: EmbeddingProviderConfig, session=None):
    if config.kind == "stub":
        return StubEmbedder(config)
    return RemoteEmbedder(config, session=session)


class EmbeddingService:
    """Cache-first batched embedding with per-item accounting.

    Counters satisfy provider_calls + cache_hits == requested; a duplicate
    text inside one batch counts as a cache hit (one provider fetch serves
    every copy).
    """

    def __init__(self, provider, cache: VectorCache | None = None):
        self.provider = provider
        self.cache = cache if cache is not None else VectorCache(None)
        self.requested = 0
        self.cache_hits = 0
        self.provider_calls = 0

    @property
    def dimension(self) -> int:
        return self.provider.config.dimension

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dimension), dtype=np.float64)
        for i, t in enumerate(texts):
            if not t or not t.strip():
                raise EmptyText(f"text at position {i} is empty")

        model = self.provider.model_name
        keys = [embedding_key(model, t) for t in texts]
        self.requested += len(texts)

        to_fetch: list[tuple[str, str]] = []
        pending: set[str] = set()
        for key, text in zip(keys, texts):
            if key in self.cache or key in pending:
                self.cache_hits += 1
            else:
                pending.add(key)
                to_fetch.append((key, text))

        for start in range(0, len(to_fetch), self.provider.config.max_batch):
            chunk = to_fetch[start : start + self.provider.config.max_batch]
            vectors = self.provider.embed([t for _, t in chunk])
            self.provider_calls += len(chunk)
            if len(vectors) != len(chunk):
                raise ProviderUnavailable(
                    f"provider returned {len(vectors)} vectors for {len(chunk)} texts"
                )
            for (key, _), vec in zip(chunk, vectors):
                arr = np.asarray(vec, dtype=np.float64)
                if arr.shape != (self.dimension,):
                    raise DimensionMismatch(
                        f"provider returned a {arr.shape[0] if arr.ndim == 1 else arr.shape}"
                        f"-dimensional vector, configured dimension is {self.dimension}"
                    )
                if not np.all(np.isfinite(arr)):
                    raise ProviderUnavailable("provider returned non-finite embedding values")
                self.cache.put(key, model, arr)

        return np.stack([self.cache.get(k) for k in keys])
