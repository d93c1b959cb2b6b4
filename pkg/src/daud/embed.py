"""Text to unit-norm vectors: signed feature hashing, or a remote encoder."""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from .errors import ConfigError, DimensionMismatch, EncoderUnavailable

EMPTY_TOKEN = "<EMPTY>"
MAX_TOKENS = 256


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    source_digest: str

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def _bucket(token: str, dim: int) -> int:
    h = hashlib.blake2b(token.encode("utf-8"), digest_size=8, person=b"daud-bkt")
    return int.from_bytes(h.digest(), "big") % dim


def _sign(token: str) -> float:
    h = hashlib.blake2b(token.encode("utf-8"), digest_size=1, person=b"daud-sgn")
    return 1.0 if h.digest()[0] & 1 else -1.0


class HashingEncoder:
    """Whitespace tokens, bucket ``hash(token) mod dim``, sign from a second hash."""

    kind = "hash"

    def __init__(self, dim: int = 768, max_tokens: int = MAX_TOKENS):
        if dim < 1:
            raise ConfigError("embedding dimension must be positive")
        self.dim = dim
        self.max_tokens = max_tokens

    def raw(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for tok, n in Counter(text.split()[: self.max_tokens]).items():
            vec[_bucket(tok, self.dim)] += _sign(tok) * n
        return vec

    def _one(self, text: str) -> np.ndarray:
        vec = self.raw(text)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            # empty text, or colliding tokens cancelled out
            vec = self.raw(EMPTY_TOKEN)
            norm = np.linalg.norm(vec)
        return vec / norm

    def encode(self, texts: list[str]) -> np.ndarray:
        return np.stack([self._one(t) for t in texts]) if texts else np.zeros((0, self.dim))


class HttpEncoder:
    """POST ``{texts: [...]}`` and read back ``{vectors: [[...]]}``."""

    kind = "http"

    def __init__(self, endpoint: str, dim: int = 768, timeout: float = 60.0,
                 session: requests.Session | None = None):
        if not endpoint:
            raise ConfigError("embedder.endpoint is required for the http encoder")
        self.endpoint = endpoint
        self.dim = dim
        self.timeout = timeout
        self._session = session or requests.Session()

    def encode(self, texts: list[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        texts = [" ".join(t.split()[:MAX_TOKENS]) or EMPTY_TOKEN for t in texts]
        try:
            resp = self._session.post(self.endpoint, json={"texts": texts}, timeout=self.timeout)
            resp.raise_for_status()
            vecs = np.asarray(resp.json()["vectors"], dtype=float)
        except (requests.RequestException, ValueError, KeyError) as exc:
            raise EncoderUnavailable(f"embedding endpoint failed: {exc}") from exc
        if vecs.shape != (len(texts), self.dim):
            raise DimensionMismatch(f"encoder returned shape {vecs.shape}, configured dim is {self.dim}")
        norms = np.linalg.norm(vecs, axis=1, keepdims=True)
        if not np.all(np.isfinite(vecs)) or np.any(norms == 0):
            raise EncoderUnavailable("encoder returned non-finite or zero vectors")
        return vecs / norms


def make_encoder(kind: str = "hash", dim: int = 768, endpoint: str | None = None):
    if kind == "hash":
        return HashingEncoder(dim)
    if kind == "http":
        return HttpEncoder(endpoint or "", dim)
    raise ConfigError(f"unknown embedder kind {kind!r}")


def embed_text(text: str, encoder) -> EmbeddingVector:
    return EmbeddingVector(encoder.encode([text])[0], text_digest(text))


def cosine(u: EmbeddingVector | np.ndarray, v: EmbeddingVector | np.ndarray) -> float:
    a = u.values if isinstance(u, EmbeddingVector) else np.asarray(u, dtype=float)
    b = v.values if isinstance(v, EmbeddingVector) else np.asarray(v, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cosine of vectors with shapes {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


class EmbeddingStore:
    """Memoises encoder calls by text digest."""

    def __init__(self, encoder):
        self.encoder = encoder
        self._memo: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.encoder.dim

    def get_many(self, texts: list[str]) -> np.ndarray:
        missing = list(dict.fromkeys(t for t in texts if text_digest(t) not in self._memo))
        if missing:
            for t, vec in zip(missing, self.encoder.encode(missing)):
                self._memo[text_digest(t)] = vec
        if not texts:
            return np.zeros((0, self.dim))
        return np.stack([self._memo[text_digest(t)] for t in texts])

    def get(self, text: str) -> np.ndarray:
        return self.get_many([text])[0]

    def save(self, target) -> None:
        """Write the memo as ``.npz`` to a path or binary file object."""
        keys = sorted(self._memo)
        mat = np.stack([self._memo[k] for k in keys]) if keys else np.zeros((0, self.dim))
        if isinstance(target, (str, Path)):
            with open(target, "wb") as fh:
                np.savez(fh, digests=np.array(keys, dtype="U64"), vectors=mat)
        else:
            np.savez(target, digests=np.array(keys, dtype="U64"), vectors=mat)

    def load(self, source) -> None:
        with np.load(source) as doc:
            for k, v in zip(doc["digests"], doc["vectors"]):
                self._memo[str(k)] = v
