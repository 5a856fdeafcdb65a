"""Histology classifier tool: slide feature vector in, IDH1 probability out.

This tool is pure local compute (no fixtures, no network). It refuses raw
whole-slide image paths — tiling and feature extraction happen upstream —
and only accepts files already holding a slide-level feature vector.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from moa.errors import BackendError
from moa.mlp import PREDICTION_THRESHOLD, MlpModel, predict_proba
from moa.tools.base import ToolDescriptor, ToolResult

SLIDE_FEATURE_DIM = 768

# Paths with these suffixes are images, not feature vectors.
IMAGE_SUFFIXES = (".svs", ".ndpi", ".tif", ".tiff", ".png", ".jpg", ".jpeg")
SKIP_REASON = "feature extraction not available"

DESCRIPTOR = ToolDescriptor(
    name="histology_predict",
    description="Predict IDH1 mutation status from a precomputed slide feature vector.",
    input_schema={"feature_path": "string"},
    requires=("slide_feature_path",),
)


def read_feature_file(path: str | Path, expected_dim: int = SLIDE_FEATURE_DIM) -> np.ndarray:
    """Load a slide feature vector: a JSON array of expected_dim finite reals."""
    path = Path(path)
    if not path.exists():
        raise BackendError(f"feature file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise BackendError(f"{path}: expected a JSON array of numbers")
    vector = np.asarray(raw, dtype=np.float64)
    if vector.ndim != 1 or vector.size != expected_dim:
        raise BackendError(
            f"{path}: expected {expected_dim} values, found {vector.size}"
        )
    if not np.all(np.isfinite(vector)):
        raise BackendError(f"{path}: feature vector contains non-finite values")
    return vector


class HistologyTool:
    """Wraps a trained classifier; deterministic for fixed model and input."""

    descriptor = DESCRIPTOR

    def __init__(self, model: MlpModel):
        self.model = model

    @property
    def name(self) -> str:
        return self.descriptor.name

    def run(self, params: dict) -> ToolResult:
        feature_path = params["feature_path"]
        if Path(feature_path).suffix.lower() in IMAGE_SUFFIXES:
            return ToolResult(
                tool_name=self.name, status="skipped", detail=SKIP_REASON
            )
        try:
            vector = read_feature_file(feature_path, expected_dim=self.model.layer_dims[0])
        except BackendError as exc:
            return ToolResult(tool_name=self.name, status="error", detail=str(exc))
        probability = predict_proba(self.model, vector)
        label = "mutant" if probability >= PREDICTION_THRESHOLD else "wildtype"
        payload = f"IDH1 mutation probability: {probability:.4f}. Prediction: {label}."
        return ToolResult(tool_name=self.name, status="ok", payload=payload)

    def predict(self, feature_path: str | Path) -> ToolResult:
        return self.run({"feature_path": str(feature_path)})
