"""Stratified cross-validation, metrics, and the per-configuration experiment loop.

AUROC is the Mann-Whitney rank statistic with average ranks for ties, which
equals the trapezoidal ROC area; the test suite holds it to exact agreement
with brute-force pair counting. Fold assignment is a per-class seeded
shuffle followed by round-robin, so per-fold class counts never differ by
more than one.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Protocol

import numpy as np

from moa.cases import LABEL_TO_INDEX, CohortManifest
from moa.embeddings import (
    Embedding,
    NormalizationStats,
    apply_normalizer,
    fit_normalizer,
    fuse_concat,
)
from moa.errors import EvaluationError
from moa.mlp import TrainConfig, init_model, predict_proba_batch, train

logger = logging.getLogger(__name__)

DEFAULT_N_FOLDS = 5
METRIC_NAMES = ("accuracy", "f1", "auroc")


@dataclass
class FoldSplit:
    """Assignment of every eligible patient to exactly one fold."""

    n_folds: int
    assignments: dict[str, int]
    seed: int

    def heldout_ids(self, fold: int) -> list[str]:
        return sorted(pid for pid, f in self.assignments.items() if f == fold)

    def training_ids(self, fold: int) -> list[str]:
        return sorted(pid for pid, f in self.assignments.items() if f != fold)

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.n_folds
        for f in self.assignments.values():
            sizes[f] += 1
        return sizes


def stratified_folds(
    labels: Mapping[str, str], n_folds: int = DEFAULT_N_FOLDS, seed: int = 0
) -> FoldSplit:
    """Per-class seeded shuffle then round-robin assignment to folds."""
    if n_folds < 2:
        raise EvaluationError("n_folds must be >= 2")
    by_class: dict[str, list[str]] = {}
    for pid, label in labels.items():
        by_class.setdefault(label, []).append(pid)
    for label, ids in by_class.items():
        if len(ids) < n_folds:
            raise EvaluationError(
                f"class {label!r} has {len(ids)} members, fewer than {n_folds} folds"
            )
    rng = np.random.default_rng(seed)
    assignments: dict[str, int] = {}
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        rng.shuffle(ids)
        for i, pid in enumerate(ids):
            assignments[pid] = i % n_folds
    return FoldSplit(n_folds=n_folds, assignments=assignments, seed=seed)


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.size == 0 or preds.shape != labels.shape:
        raise EvaluationError("accuracy requires non-empty, aligned predictions/labels")
    return float(np.mean(preds == labels))


def f1_score(preds, labels, positive_class=1) -> float:
    """Binary F1 with a fixed positive class.

    Degenerate conventions: 0.0 when TP = 0 with any FP/FN present; 1.0 when
    neither predictions nor labels contain the positive class at all.
    """
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.size == 0 or preds.shape != labels.shape:
        raise EvaluationError("f1_score requires non-empty, aligned predictions/labels")
    pred_pos = preds == positive_class
    true_pos = labels == positive_class
    tp = int(np.sum(pred_pos & true_pos))
    fp = int(np.sum(pred_pos & ~true_pos))
    fn = int(np.sum(~pred_pos & true_pos))
    if tp == 0:
        return 1.0 if (fp + fn) == 0 else 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return float(2 * precision * recall / (precision + recall))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their rank range."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auroc(scores, labels) -> float:
    """Rank-sum AUROC: (sum of positive ranks - n+(n+ + 1)/2) / (n+ * n-)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.size == 0 or scores.shape != labels.shape:
        raise EvaluationError("auroc requires non-empty, aligned scores/labels")
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = int(scores.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("auroc requires both classes to be present")
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


class FeatureProvider(Protocol):
    """Maps every eligible patient to a vector, given the training-fold ids.

    Fold-awareness matters for encoders whose vocabulary or fitting must
    only see training cases; static sources ignore the ids.
    """

    def materialize(self, training_ids: frozenset[str]) -> dict[str, Embedding]: ...


class StaticFeatures:
    def __init__(self, embeddings: Mapping[str, Embedding]):
        self._embeddings = dict(embeddings)

    def materialize(self, training_ids: frozenset[str]) -> dict[str, Embedding]:
        return self._embeddings


class FoldAwareFeatures:
    def __init__(self, build: Callable[[frozenset[str]], dict[str, Embedding]]):
        self._build = build

    def materialize(self, training_ids: frozenset[str]) -> dict[str, Embedding]:
        return self._build(training_ids)


class ConcatFeatures:
    """Per-id concatenation of two providers (id equality enforced)."""

    def __init__(self, first: FeatureProvider, second: FeatureProvider):
        self.first = first
        self.second = second

    def materialize(self, training_ids: frozenset[str]) -> dict[str, Embedding]:
        a = self.first.materialize(training_ids)
        b = self.second.materialize(training_ids)
        return {pid: fuse_concat(a[pid], b[pid]) for pid in a if pid in b}


@dataclass
class FoldReport:
    """Per-fold artifacts handed to an optional inspector callback."""

    fold: int
    training_ids: list[str]
    heldout_ids: list[str]
    stats: NormalizationStats
    normalized_training: np.ndarray
    metrics: dict[str, float]


@dataclass
class ExperimentResult:
    """Per-fold and aggregated metrics for one configuration."""

    config_name: str
    per_fold: list[dict[str, float]]
    mean: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)
    feature_dim: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.mean:
            self.mean = {
                m: float(np.mean([f[m] for f in self.per_fold])) for m in METRIC_NAMES
            }
        if not self.std:
            # Population std over fold values, matching the mean +/- std aggregation.
            self.std = {
                m: float(np.std([f[m] for f in self.per_fold])) for m in METRIC_NAMES
            }

    def to_record(self) -> str:
        return json.dumps(
            {
                "config_name": self.config_name,
                "n_folds": len(self.per_fold),
                "per_fold": self.per_fold,
                "mean": self.mean,
                "std": self.std,
                "feature_dim": self.feature_dim,
                "seed": self.seed,
            },
            sort_keys=True,
        )

    def table_row(self) -> str:
        cells = [
            f"{self.mean[m]:.3f}±{self.std[m]:.3f}" for m in METRIC_NAMES
        ]
        return f"{self.config_name:<28} " + "  ".join(f"{c:>13}" for c in cells)


def _labels_for(manifest: CohortManifest) -> dict[str, int]:
    return {
        case.patient_id: LABEL_TO_INDEX[case.idh1_label]
        for case in manifest.eligible_cases()
    }


def run_experiment(
    config_name: str,
    features: FeatureProvider,
    manifest: CohortManifest,
    folds: FoldSplit,
    train_config: TrainConfig,
    hidden_dims: tuple[int, int, int] = (512, 256, 64),
    fold_inspector: Callable[[FoldReport], None] | None = None,
) -> ExperimentResult:
    """Train/evaluate one configuration across every fold.

    Per fold: fit the normalizer on the training portion only, normalize
    both portions, train the classifier, score the held-out portion. The
    fold's model/shuffle seed is train_config.seed + fold index.
    """
    labels = _labels_for(manifest)
    per_fold: list[dict[str, float]] = []
    feature_dim = 0
    for fold in range(folds.n_folds):
        train_ids = folds.training_ids(fold)
        heldout_ids = folds.heldout_ids(fold)
        embeddings = features.materialize(frozenset(train_ids))
        missing = sorted(pid for pid in labels if pid not in embeddings)
        if missing:
            raise EvaluationError(f"{config_name}: missing feature vectors for {missing}")

        stats = fit_normalizer([embeddings[pid] for pid in train_ids])
        overlap = stats.fitted_on & set(heldout_ids)
        if overlap:  # leakage guard; unreachable unless a provider misbehaves
            raise EvaluationError(f"{config_name}: normalizer saw held-out ids {sorted(overlap)}")

        x_train = np.stack([apply_normalizer(stats, embeddings[pid]).vector for pid in train_ids])
        y_train = np.array([labels[pid] for pid in train_ids])
        x_held = np.stack([apply_normalizer(stats, embeddings[pid]).vector for pid in heldout_ids])
        y_held = np.array([labels[pid] for pid in heldout_ids])
        feature_dim = x_train.shape[1]

        fold_config = replace(train_config, seed=train_config.seed + fold)
        model = init_model(feature_dim, hidden_dims, seed=fold_config.seed)
        trained, _ = train(model, x_train, y_train, fold_config)

        probs = predict_proba_batch(trained, x_held)
        preds = (probs >= 0.5).astype(np.int64)
        metrics = {
            "accuracy": accuracy(preds, y_held),
            "f1": f1_score(preds, y_held, positive_class=1),
            "auroc": auroc(probs, y_held),
        }
        per_fold.append(metrics)
        logger.info(
            "experiment %s fold %d: acc=%.3f f1=%.3f auroc=%.3f",
            config_name, fold, metrics["accuracy"], metrics["f1"], metrics["auroc"],
        )
        if fold_inspector is not None:
            fold_inspector(
                FoldReport(
                    fold=fold,
                    training_ids=train_ids,
                    heldout_ids=heldout_ids,
                    stats=stats,
                    normalized_training=x_train,
                    metrics=metrics,
                )
            )
    return ExperimentResult(
        config_name=config_name,
        per_fold=per_fold,
        feature_dim=feature_dim,
        seed=train_config.seed,
    )


def format_table(results: list[ExperimentResult]) -> str:
    header = f"{'Configuration':<28} " + "  ".join(
        f"{name:>13}" for name in ("Accuracy", "F1", "AUROC")
    )
    lines = [header, "-" * len(header)]
    lines.extend(result.table_row() for result in results)
    return "\n".join(lines)
