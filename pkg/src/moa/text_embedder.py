"""Text embedding behind a pluggable interface.

Two implementations share one config: a remote HTTP embedder for sentence-
transformer class models, and a deterministic local hashed bag-of-tokens
embedder that makes offline tests meaningful (shared tokens really do raise
cosine similarity).
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass

import numpy as np

from moa.embeddings import Embedding
from moa.errors import DimensionMismatchError, EmptyTextError, MoaError
from moa.transport import HttpTransport

logger = logging.getLogger(__name__)

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")

REMOTE_BATCH_SIZE = 32


@dataclass
class EmbedderConfig:
    """Which embedder to use and the vector contract it must honor."""

    kind: str = "hashed"
    endpoint: str | None = None
    dimension: int = 768
    max_tokens: int = 8192

    def __post_init__(self):
        if self.kind not in ("hashed", "remote"):
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote embedder requires an endpoint")
        if self.dimension < 8:
            raise ValueError("embedder dimension must be >= 8")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "dimension": self.dimension,
            "max_tokens": self.max_tokens,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EmbedderConfig":
        return cls(
            kind=raw.get("kind", "hashed"),
            endpoint=raw.get("endpoint"),
            dimension=raw.get("dimension", 768),
            max_tokens=raw.get("max_tokens", 8192),
        )


def _truncate(text: str, max_tokens: int) -> str:
    # Whitespace tokens approximate the remote model's budget; truncation
    # drops from the tail and never empties a non-empty text.
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text
    logger.warning("truncating text from %d to %d tokens", len(tokens), max_tokens)
    return " ".join(tokens[: max(1, max_tokens)])


def _hash_bucket(token: str, dimension: int) -> int:
    digest = hashlib.md5(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % dimension


def _hashed_vector(text: str, dimension: int) -> np.ndarray:
    tokens = [t for t in _TOKEN_SPLIT.split(text.lower()) if t]
    if not tokens:
        raise EmptyTextError("text has no embeddable tokens")
    counts = np.zeros(dimension)
    for token in tokens:
        counts[_hash_bucket(token, dimension)] += 1.0
    return counts / np.linalg.norm(counts)


def vector_for_text(
    config: EmbedderConfig, text: str, transport: HttpTransport | None = None
) -> np.ndarray:
    """Embed one text into exactly config.dimension finite reals."""
    if not text or not text.strip():
        raise EmptyTextError("cannot embed empty text")
    text = _truncate(text, config.max_tokens)
    if config.kind == "hashed":
        return _hashed_vector(text, config.dimension)
    return _remote_vectors(config, [text], transport)[0]


def _remote_vectors(
    config: EmbedderConfig, texts: list[str], transport: HttpTransport | None
) -> list[np.ndarray]:
    if transport is None:
        transport = HttpTransport()
    response = transport.post_json(config.endpoint, {"texts": texts})
    vectors = response.get("vectors")
    if not isinstance(vectors, list) or len(vectors) != len(texts):
        raise MoaError("remote embedder returned a malformed response")
    out = []
    for vec in vectors:
        arr = np.asarray(vec, dtype=np.float64)
        if arr.ndim != 1 or arr.size != config.dimension:
            raise DimensionMismatchError(
                f"remote embedder returned dim {arr.size}, expected {config.dimension}"
            )
        if not np.all(np.isfinite(arr)):
            raise MoaError("remote embedder returned non-finite values")
        out.append(arr)
    return out


def embed_text(
    config: EmbedderConfig,
    text: str,
    id: str = "",
    modality: str = "report",
    transport: HttpTransport | None = None,
) -> Embedding:
    return Embedding(id=id, vector=vector_for_text(config, text, transport), modality=modality)


def embed_batch(
    config: EmbedderConfig,
    items: list[tuple[str, str]],
    modality: str = "report",
    transport: HttpTransport | None = None,
) -> list[Embedding]:
    """Embed (id, text) pairs in order; equivalent to mapping embed_text.

    Any failing item aborts the whole batch: partial results are withheld
    and the error names the failing ids.
    """
    failing = []
    for item_id, text in items:
        if not text or not text.strip():
            failing.append(item_id)
    if failing:
        raise EmptyTextError(f"empty text for ids: {failing}")

    if config.kind == "hashed":
        return [embed_text(config, text, id=item_id, modality=modality) for item_id, text in items]

    embeddings: list[Embedding] = []
    for start in range(0, len(items), REMOTE_BATCH_SIZE):
        chunk = items[start : start + REMOTE_BATCH_SIZE]
        texts = [_truncate(text, config.max_tokens) for _, text in chunk]
        try:
            vectors = _remote_vectors(config, texts, transport)
        except MoaError as exc:
            raise MoaError(
                f"remote embedding failed for ids {[i for i, _ in chunk]}: {exc}"
            ) from exc
        embeddings.extend(
            Embedding(id=item_id, vector=vec, modality=modality)
            for (item_id, _), vec in zip(chunk, vectors)
        )
    return embeddings
