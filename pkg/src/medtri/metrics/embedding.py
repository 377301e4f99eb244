"""Greedy-matching embedding F score (BERTScore-style, no IDF weighting).

Remote provider wire contract: ``POST {endpoint}`` with JSON
``{"model": <name>, "input": [<token>, ...]}``; the response must be
``{"data": [{"embedding": [float, ...]}, ...]}`` with one entry per token, in
order. An optional bearer token is read from the environment.
"""

from __future__ import annotations

import hashlib
import os
from typing import Mapping, Protocol, Sequence

import httpx
import numpy as np

from ..errors import DimensionMismatch, ProviderError


class EmbeddingProvider(Protocol):
    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        """One unit-norm row per token, shape ``(len(tokens), dim)``."""
        ...


class HashEmbeddingProvider:
    """Deterministic pseudo-random unit vectors keyed by token text. For tests and smoke runs."""

    def __init__(self, dim: int = 64):
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            seed = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
            vec = np.random.default_rng(seed).standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            self._cache[token] = vec
        return vec

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self._vector(t) for t in tokens])


class StaticEmbeddingProvider:
    """Looks vectors up in a fixed token -> vector mapping (normalized on construction)."""

    def __init__(self, vectors: Mapping[str, Sequence[float]]):
        self._vectors = {}
        for tok, v in vectors.items():
            arr = np.asarray(v, dtype=np.float64)
            norm = np.linalg.norm(arr)
            if norm == 0:
                raise ValueError(f"zero vector for token {tok!r}")
            self._vectors[tok] = arr / norm
        dims = {v.shape for v in self._vectors.values()}
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed vector shapes {sorted(dims)}")
        self.dim = next(iter(dims))[0] if dims else 0

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        try:
            rows = [self._vectors[t] for t in tokens]
        except KeyError as exc:
            raise ProviderError(f"no vector for token {exc.args[0]!r}") from None
        return np.stack(rows) if rows else np.zeros((0, self.dim))


class RemoteEmbeddingProvider:
    def __init__(
        self,
        endpoint: str,
        model_name: str,
        *,
        timeout: float = 30.0,
        api_key_env: str = "MEDTRI_EMBED_API_KEY",
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {}
        key = os.environ.get(api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.endpoint = endpoint
        self.model_name = model_name
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, 0))
        try:
            resp = self._client.post(self.endpoint, json={"model": self.model_name, "input": list(tokens)})
            resp.raise_for_status()
            data = resp.json()["data"]
            arr = np.asarray([row["embedding"] for row in data], dtype=np.float64)
        except (httpx.HTTPError, ValueError, KeyError, TypeError) as exc:
            raise ProviderError(f"embedding request failed: {exc}") from exc
        if arr.ndim != 2 or arr.shape[0] != len(tokens):
            raise ProviderError(f"expected {len(tokens)} vectors, got array of shape {arr.shape}")
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ProviderError("provider returned a zero vector")
        return arr / norms

    def close(self):
        self._client.close()


def _checked(mat, n: int) -> np.ndarray:
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != n:
        raise ProviderError(f"expected {n} embedding rows, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ProviderError("non-finite embedding values")
    return mat


def embed_greedy_f(candidate: Sequence[str], reference: Sequence[str], provider: EmbeddingProvider) -> float:
    """F1 of greedy-matching precision and recall over clamped cosine similarities."""
    if not candidate or not reference:
        return 0.0
    c = _checked(provider.embed(list(candidate)), len(candidate))
    r = _checked(provider.embed(list(reference)), len(reference))
    if c.shape[1] != r.shape[1]:
        raise DimensionMismatch(f"candidate dim {c.shape[1]} != reference dim {r.shape[1]}")
    sim = np.clip(c @ r.T, 0.0, 1.0)
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    if precision + recall == 0:
        return 0.0
    return min(1.0, 2 * precision * recall / (precision + recall))
