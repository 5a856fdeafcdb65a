"""Embedding vectors: representation, persistence, z-scoring, and fusion.

An Embedding is a fixed-length float64 vector tagged with the patient (or
record) id it belongs to and the modality it came from. Normalization stats
are always fitted on an explicit set of embeddings and remember those ids,
so leakage checks can assert the fitted set never overlaps a held-out fold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from moa.errors import DimensionMismatchError, EmbeddingIoError

MODALITIES = ("report", "clinical_text", "one_hot", "slide", "fused")

# Guard for zero-variance dimensions (constant one-hot blocks within a fold).
STD_EPSILON = 1e-8


def _as_vector(values) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError("embedding vector must be a non-empty 1-D array")
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding vector contains non-finite values")
    return vec


@dataclass
class Embedding:
    """A per-record vector with provenance."""

    id: str
    vector: np.ndarray
    modality: str

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        self.vector = _as_vector(self.vector)

    @property
    def dimension(self) -> int:
        return int(self.vector.size)


@dataclass
class NormalizationStats:
    """Per-dimension population mean/std plus the ids they were fitted on."""

    mean: np.ndarray
    std: np.ndarray
    fitted_on: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape:
            raise DimensionMismatchError("normalization mean/std lengths differ")
        if np.any(self.std < 0):
            raise ValueError("normalization std must be non-negative")
        self.fitted_on = frozenset(self.fitted_on)

    @property
    def dimension(self) -> int:
        return int(self.mean.size)


def fit_normalizer(embeddings: list[Embedding]) -> NormalizationStats:
    """Fit per-dimension population mean/std over exactly these embeddings."""
    if not embeddings:
        raise ValueError("cannot fit a normalizer on an empty embedding list")
    dims = {e.dimension for e in embeddings}
    if len(dims) != 1:
        raise DimensionMismatchError(f"mixed embedding dimensions: {sorted(dims)}")
    matrix = np.stack([e.vector for e in embeddings])
    return NormalizationStats(
        mean=matrix.mean(axis=0),
        std=matrix.std(axis=0),  # population std (ddof=0), fixed by convention
        fitted_on=frozenset(e.id for e in embeddings),
    )


def apply_normalizer(stats: NormalizationStats, embedding: Embedding) -> Embedding:
    """Return (x - mean) / max(std, eps) with the modality preserved."""
    if embedding.dimension != stats.dimension:
        raise DimensionMismatchError(
            f"embedding dim {embedding.dimension} != stats dim {stats.dimension}"
        )
    scale = np.maximum(stats.std, STD_EPSILON)
    return Embedding(
        id=embedding.id,
        vector=(embedding.vector - stats.mean) / scale,
        modality=embedding.modality,
    )


def fuse_concat(a: Embedding, b: Embedding) -> Embedding:
    """Concatenate two same-id embeddings into a fused one.

    The id check is what prevents accidentally fusing vectors from two
    different patients.
    """
    if a.id != b.id:
        raise ValueError(f"refusing to fuse embeddings with ids {a.id!r} and {b.id!r}")
    return Embedding(id=a.id, vector=np.concatenate([a.vector, b.vector]), modality="fused")


def _reject_constant(name: str):
    raise ValueError(f"non-finite constant {name!r} in embedding file")


def save_embeddings(path, embeddings: list[Embedding]) -> None:
    """Write embeddings as line-delimited JSON records at full precision."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for e in embeddings:
            record = {
                "id": e.id,
                "modality": e.modality,
                "vector": [float(x) for x in e.vector],
            }
            fh.write(json.dumps(record) + "\n")


def load_embeddings(path) -> list[Embedding]:
    """Load a line-delimited embedding file; errors carry the line number."""
    path = Path(path)
    embeddings = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line, parse_constant=_reject_constant)
                embeddings.append(
                    Embedding(
                        id=record["id"],
                        vector=record["vector"],
                        modality=record["modality"],
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise EmbeddingIoError(f"{path}:{lineno}: {exc}") from exc
    return embeddings


def save_stats(path, stats: NormalizationStats) -> None:
    path = Path(path)
    payload = {
        "mean": [float(x) for x in stats.mean],
        "std": [float(x) for x in stats.std],
        "fitted_on": sorted(stats.fitted_on),
    }
    path.write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_stats(path) -> NormalizationStats:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"), parse_constant=_reject_constant)
        stats = NormalizationStats(
            mean=payload["mean"],
            std=payload["std"],
            fitted_on=frozenset(payload["fitted_on"]),
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise EmbeddingIoError(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(stats.mean)) or not np.all(np.isfinite(stats.std)):
        raise EmbeddingIoError(f"{path}: non-finite normalization stats")
    return stats
