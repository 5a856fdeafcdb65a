"""Local retrieval knowledge base: filtering, chunking, embedding, cosine top-k.

The index is a flat file of chunk records loaded fully into memory; at the
hundreds-of-documents scale this corpus lives at, nothing fancier earns its
keep. The embedder config is persisted inside the index so queries are
embedded exactly like the chunks were.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from moa.errors import KnowledgeBaseError
from moa.text_embedder import EmbedderConfig, vector_for_text

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 1000
DEFAULT_CHUNK_OVERLAP = 200
DEFAULT_TOP_K = 5
DEFAULT_KEYWORDS = ("glioma", "oligodendroglioma", "astrocytoma", "IDH")


@dataclass
class Document:
    doc_id: str
    title: str
    body: str

    def __post_init__(self):
        if not self.doc_id:
            raise KnowledgeBaseError("doc_id must be non-empty")
        if not self.body:
            raise KnowledgeBaseError(f"document {self.doc_id}: body must be non-empty")


@dataclass
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    title: str = ""  # source document title, kept for report attribution
    vector: np.ndarray | None = None


def filter_corpus(docs: list[Document], keywords: list[str]) -> list[Document]:
    """Keep documents whose title+body contains any keyword, order preserved.

    Matching is case-insensitive substring; idempotent by construction.
    """
    if not keywords:
        raise ValueError("keywords must be non-empty")
    lowered = [k.lower() for k in keywords]
    kept = []
    for doc in docs:
        haystack = (doc.title + "\n" + doc.body).lower()
        if any(k in haystack for k in lowered):
            kept.append(doc)
    return kept


def chunk_document(
    doc: Document,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
) -> list[Chunk]:
    """Split a document into chunks starting every (chunk_size - overlap) chars.

    Consecutive chunks share exactly `overlap` characters (except possibly
    the final, shorter one), and concatenating chunks with the overlap
    stripped reconstructs the body.
    """
    if chunk_size <= 0:
        raise ValueError("chunk_size must be positive")
    if not 0 <= overlap < chunk_size:
        raise ValueError("overlap must satisfy 0 <= overlap < chunk_size")
    stride = chunk_size - overlap
    chunks = []
    start = 0
    ordinal = 0
    while start < len(doc.body):
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{ordinal:04d}",
                doc_id=doc.doc_id,
                text=doc.body[start : start + chunk_size],
                title=doc.title,
            )
        )
        ordinal += 1
        start += stride
    return chunks


def load_corpus_dir(path) -> list[Document]:
    """Read every *.txt file in a directory: first non-empty line is the title."""
    path = Path(path)
    if not path.is_dir():
        raise KnowledgeBaseError(f"corpus directory not found: {path}")
    docs = []
    for file in sorted(path.glob("*.txt")):
        body = file.read_text(encoding="utf-8")
        if not body.strip():
            logger.warning("skipping empty corpus file %s", file)
            continue
        title = next(line.strip() for line in body.splitlines() if line.strip())
        docs.append(Document(doc_id=file.stem, title=title, body=body))
    return docs


class KnowledgeBaseIndex:
    """Chunk store with cosine retrieval against a fixed embedder."""

    def __init__(self, chunks: list[Chunk], embedder: EmbedderConfig):
        for chunk in chunks:
            if chunk.vector is None:
                raise KnowledgeBaseError(f"chunk {chunk.chunk_id} has no vector")
        dims = {c.vector.size for c in chunks}
        if len(dims) > 1:
            raise KnowledgeBaseError(f"mixed chunk vector dimensions: {sorted(dims)}")
        self.chunks = list(chunks)
        self.embedder = embedder
        self._unit_matrix = self._build_matrix()

    def _build_matrix(self) -> np.ndarray:
        if not self.chunks:
            return np.zeros((0, 0))
        matrix = np.stack([c.vector for c in self.chunks]).astype(np.float64)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        norms[norms == 0] = 1.0  # zero-norm chunks score 0 against everything
        return matrix / norms

    def __len__(self) -> int:
        return len(self.chunks)

    def chunk_by_id(self, chunk_id: str) -> Chunk:
        for chunk in self.chunks:
            if chunk.chunk_id == chunk_id:
                return chunk
        raise KeyError(chunk_id)

    def title_for(self, chunk_id: str) -> str:
        return self.chunk_by_id(chunk_id).title

    def retrieve(self, query: str, k: int = DEFAULT_TOP_K) -> list[tuple[Chunk, float]]:
        """Top-k chunks by cosine similarity, ties broken by ascending chunk_id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self.chunks:
            logger.warning("retrieval against an empty index returns nothing")
            return []
        query_vec = vector_for_text(self.embedder, query)
        norm = np.linalg.norm(query_vec)
        if norm == 0:
            scores = np.zeros(len(self.chunks))
        else:
            scores = self._unit_matrix @ (query_vec / norm)
        scores = np.clip(scores, -1.0, 1.0)
        order = sorted(range(len(self.chunks)), key=lambda i: (-scores[i], self.chunks[i].chunk_id))
        return [(self.chunks[i], float(scores[i])) for i in order[:k]]

    def save(self, path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"meta": {"embedder": self.embedder.to_dict()}}) + "\n")
            for chunk in self.chunks:
                record = {
                    "chunk_id": chunk.chunk_id,
                    "doc_id": chunk.doc_id,
                    "text": chunk.text,
                    "title": chunk.title,
                    "vector": [float(x) for x in chunk.vector],
                }
                fh.write(json.dumps(record) + "\n")

    @classmethod
    def load(cls, path) -> "KnowledgeBaseIndex":
        path = Path(path)
        chunks: list[Chunk] = []
        embedder: EmbedderConfig | None = None
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise KnowledgeBaseError(f"{path}:{lineno}: invalid JSON") from exc
                if "meta" in record:
                    embedder = EmbedderConfig.from_dict(record["meta"]["embedder"])
                    continue
                try:
                    chunks.append(
                        Chunk(
                            chunk_id=record["chunk_id"],
                            doc_id=record["doc_id"],
                            text=record["text"],
                            title=record.get("title", ""),
                            vector=np.asarray(record["vector"], dtype=np.float64),
                        )
                    )
                except (KeyError, TypeError) as exc:
                    raise KnowledgeBaseError(f"{path}:{lineno}: malformed chunk record") from exc
        if embedder is None:
            raise KnowledgeBaseError(f"{path}: missing index meta line")
        return cls(chunks, embedder)


def build_index(chunks: list[Chunk], embedder: EmbedderConfig) -> KnowledgeBaseIndex:
    """Embed every chunk and assemble the in-memory index."""
    embedded = []
    for chunk in chunks:
        try:
            vector = vector_for_text(embedder, chunk.text)
        except Exception as exc:
            raise KnowledgeBaseError(f"embedding failed for chunk {chunk.chunk_id}: {exc}") from exc
        embedded.append(replace(chunk, vector=vector))
    return KnowledgeBaseIndex(embedded, embedder)


def build_index_from_corpus(
    corpus_dir,
    embedder: EmbedderConfig,
    keywords: list[str] | None = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
) -> KnowledgeBaseIndex:
    """Full ingestion path: load directory, filter by keywords, chunk, embed."""
    docs = filter_corpus(load_corpus_dir(corpus_dir), list(keywords or DEFAULT_KEYWORDS))
    chunks = []
    for doc in docs:
        chunks.extend(chunk_document(doc, chunk_size, overlap))
    logger.info("knowledge base: %d documents kept, %d chunks", len(docs), len(chunks))
    return build_index(chunks, embedder)


def retrieve(
    index: KnowledgeBaseIndex, query: str, k: int = DEFAULT_TOP_K
) -> list[tuple[Chunk, float]]:
    return index.retrieve(query, k)
