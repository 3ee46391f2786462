"""Text-embedding clients and cosine similarity.

The embedding client caches by exact string for the lifetime of the run; a
cached vector is never replaced. HashEmbeddingBackend is the deterministic
offline mock: each string maps to a unit vector seeded from its sha256, so
identical strings embed identically (cosine 1.0) and distinct strings are
nearly orthogonal at dimension 64.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import requests

from igekit.errors import DimensionMismatch, RateLimited, TransportError, ZeroVector


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_tag: str

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding vector has non-finite entries")


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a, b) / (|a| |b|); vectors must share model and dimension."""
    if a.model_tag != b.model_tag or len(a.values) != len(b.values):
        raise DimensionMismatch(
            f"{a.model_tag}[{len(a.values)}] vs {b.model_tag}[{len(b.values)}]")
    va = np.asarray(a.values)
    vb = np.asarray(b.values)
    na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for zero-norm vector")
    return float(np.dot(va, vb) / (na * nb))


class HashEmbeddingBackend:
    def __init__(self, dim: int = 64, model_tag: str = "hash-unit-64"):
        self.dim = dim
        self.model_tag = model_tag

    def embed(self, text: str) -> EmbeddingVector:
        seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dim)
        v /= np.linalg.norm(v)
        return EmbeddingVector(values=tuple(float(x) for x in v),
                               model_tag=self.model_tag)


class MappedEmbeddingBackend:
    """Explicit string -> vector table; for boundary-value tests."""

    def __init__(self, table: Mapping[str, Sequence[float]], model_tag: str = "mapped"):
        self.table = {k: tuple(float(x) for x in v) for k, v in table.items()}
        self.model_tag = model_tag

    def embed(self, text: str) -> EmbeddingVector:
        return EmbeddingVector(values=self.table[text], model_tag=self.model_tag)


class RemoteEmbeddingBackend:
    """OpenAI-style /embeddings endpoint; env IGEKIT_EMBED_BASE_URL/_API_KEY/_MODEL."""

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 model: str | None = None, session: requests.Session | None = None,
                 timeout: float = 60.0):
        self.base_url = (base_url or os.environ.get("IGEKIT_EMBED_BASE_URL", "")).rstrip("/")
        self.api_key = api_key or os.environ.get("IGEKIT_EMBED_API_KEY", "")
        self.model = model or os.environ.get("IGEKIT_EMBED_MODEL", "")
        self.session = session or requests.Session()
        self.timeout = timeout
        self.model_tag = f"remote:{self.model}"
        if not self.base_url:
            raise ValueError("remote embedding backend needs a base URL "
                             "(IGEKIT_EMBED_BASE_URL)")

    def embed(self, text: str) -> EmbeddingVector:
        try:
            resp = self.session.post(
                f"{self.base_url}/embeddings",
                json={"model": self.model, "input": text},
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429:
            raise RateLimited("embedding backend throttled the request")
        if resp.status_code != 200:
            raise TransportError(f"embedding backend returned {resp.status_code}")
        try:
            values = resp.json()["data"][0]["embedding"]
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"malformed embedding payload: {exc}") from exc
        return EmbeddingVector(values=tuple(float(v) for v in values),
                               model_tag=self.model_tag)


class EmbeddingClient:
    """Caches by exact string; a returned vector never changes within a run."""

    def __init__(self, backend):
        self.backend = backend
        self._cache: dict[str, EmbeddingVector] = {}

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("cannot embed empty text")
        if text not in self._cache:
            self._cache[text] = self.backend.embed(text)
        return self._cache[text]

    def similarity(self, a: str, b: str) -> float:
        return cosine(self.embed(a), self.embed(b))
