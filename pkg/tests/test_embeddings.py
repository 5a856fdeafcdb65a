"""Embedding container, normalization, fusion, and persistence."""

import numpy as np
import pytest

from moa.embeddings import (
    STD_EPSILON,
    Embedding,
    NormalizationStats,
    apply_normalizer,
    fit_normalizer,
    fuse_concat,
    load_embeddings,
    load_stats,
    save_embeddings,
    save_stats,
)
from moa.errors import DimensionMismatchError, EmbeddingIoError


def emb(pid, values, modality="slide"):
    return Embedding(id=pid, vector=np.asarray(values, dtype=float), modality=modality)


def test_embedding_validates_vector():
    with pytest.raises(ValueError):
        Embedding(id="a", vector=np.array([1.0, np.nan]), modality="slide")
    with pytest.raises(ValueError):
        Embedding(id="a", vector=np.zeros((2, 2)), modality="slide")
    with pytest.raises(ValueError):
        Embedding(id="a", vector=np.array([1.0]), modality="tabular")


def test_fit_normalizer_population_stats():
    stats = fit_normalizer([emb("a", [0.0, 10.0]), emb("b", [2.0, 14.0])])
    assert np.allclose(stats.mean, [1.0, 12.0])
    # Population (ddof=0) std, not the sample estimate.
    assert np.allclose(stats.std, [1.0, 2.0])
    assert stats.fitted_on == frozenset({"a", "b"})


def test_fit_normalizer_rejects_mixed_dims_and_empty():
    with pytest.raises(DimensionMismatchError):
        fit_normalizer([emb("a", [1.0]), emb("b", [1.0, 2.0])])
    with pytest.raises(ValueError):
        fit_normalizer([])


def test_apply_normalizer_zscores():
    stats = fit_normalizer([emb("a", [0.0, 5.0]), emb("b", [2.0, 5.0])])
    out = apply_normalizer(stats, emb("a", [0.0, 5.0]))
    assert out.vector[0] == pytest.approx(-1.0)
    # Constant dimension: epsilon guard keeps the output finite (and zero).
    assert out.vector[1] == pytest.approx(0.0)
    assert out.modality == "slide"


def test_apply_normalizer_dimension_check():
    stats = NormalizationStats(mean=np.zeros(3), std=np.ones(3))
    with pytest.raises(DimensionMismatchError):
        apply_normalizer(stats, emb("a", [1.0]))


def test_degenerate_dimension_guard_value():
    stats = NormalizationStats(mean=np.array([0.0]), std=np.array([0.0]))
    out = apply_normalizer(stats, emb("a", [3.0]))
    assert out.vector[0] == pytest.approx(3.0 / STD_EPSILON)


def test_fuse_concat_checks_ids():
    fused = fuse_concat(emb("p", [1.0, 2.0], "one_hot"), emb("p", [3.0], "slide"))
    assert fused.modality == "fused"
    assert np.array_equal(fused.vector, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="refusing to fuse"):
        fuse_concat(emb("p", [1.0]), emb("q", [1.0]))


def test_embeddings_file_roundtrip(tmp_path):
    path = tmp_path / "vectors.jsonl"
    original = [emb("a", [1.5, -2.25]), emb("b", [0.0, 1e-12], "report")]
    save_embeddings(path, original)
    loaded = load_embeddings(path)
    assert [e.id for e in loaded] == ["a", "b"]
    for before, after in zip(original, loaded):
        assert np.array_equal(before.vector, after.vector)
        assert before.modality == after.modality


def test_load_embeddings_error_names_line(tmp_path):
    path = tmp_path / "vectors.jsonl"
    path.write_text('{"id": "a", "modality": "slide", "vector": [1.0]}\n{"id": "b"}\n')
    with pytest.raises(EmbeddingIoError, match=":2"):
        load_embeddings(path)


def test_load_embeddings_rejects_nan_literal(tmp_path):
    path = tmp_path / "vectors.jsonl"
    path.write_text('{"id": "a", "modality": "slide", "vector": [NaN]}\n')
    with pytest.raises(EmbeddingIoError):
        load_embeddings(path)


def test_stats_file_roundtrip(tmp_path):
    path = tmp_path / "stats.json"
    stats = NormalizationStats(
        mean=np.array([1.0, 2.0]), std=np.array([0.5, 1.5]), fitted_on=frozenset({"x", "y"})
    )
    save_stats(path, stats)
    loaded = load_stats(path)
    assert np.array_equal(loaded.mean, stats.mean)
    assert np.array_equal(loaded.std, stats.std)
    assert loaded.fitted_on == stats.fitted_on
