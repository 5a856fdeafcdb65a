"""Cohort-level orchestration: report generation and the six-way evaluation.

Maps each named configuration from the results table onto its feature
source(s):

    clinical_text            text embedding of the structured-field sentences
    clinical_onehot          one-hot encoding (vocabulary from training folds)
    moa_no_histology         text embedding of the agent report
    histology                slide feature vector
    histology_plus_clinical  one-hot ++ slide
    moa_with_histology       report embedding ++ slide

Reports are always generated with the histology tool disabled, so report
text cannot encode the label through the tool's own prediction; the
"with histology" configuration adds the slide vector at the feature level
instead.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from moa.agent import AgentConfig, AgentTranscript, clean_report, run_agent, save_transcript
from moa.cases import CohortManifest, build_clinical_text, one_hot_encode_cohort
from moa.embeddings import Embedding
from moa.errors import EvaluationError
from moa.evaluation import (
    ConcatFeatures,
    ExperimentResult,
    FeatureProvider,
    FoldAwareFeatures,
    StaticFeatures,
    run_experiment,
    stratified_folds,
)
from moa.knowledge_base import KnowledgeBaseIndex
from moa.mlp import TrainConfig
from moa.text_embedder import EmbedderConfig, embed_batch
from moa.tools.base import ToolRegistry
from moa.tools.histology import read_feature_file

logger = logging.getLogger(__name__)

CONFIG_NAMES = (
    "clinical_text",
    "clinical_onehot",
    "moa_no_histology",
    "histology",
    "histology_plus_clinical",
    "moa_with_histology",
)

REPORTS_SUBDIR = "reports"
TRANSCRIPTS_SUBDIR = "transcripts"


def generate_reports(
    manifest: CohortManifest,
    agent_config: AgentConfig,
    registry: ToolRegistry,
    kb_index: KnowledgeBaseIndex,
    out_dir: str | Path,
    backend=None,
    max_workers: int = 4,
) -> dict[str, AgentTranscript]:
    """Run the agent over every case concurrently; one report + transcript each."""
    out_dir = Path(out_dir)
    reports_dir = out_dir / REPORTS_SUBDIR
    transcripts_dir = out_dir / TRANSCRIPTS_SUBDIR
    reports_dir.mkdir(parents=True, exist_ok=True)
    transcripts_dir.mkdir(parents=True, exist_ok=True)

    def run_one(case) -> AgentTranscript:
        transcript = run_agent(case, agent_config, registry, kb_index, backend=backend)
        (reports_dir / f"{case.patient_id}.txt").write_text(
            transcript.report_text, encoding="utf-8"
        )
        save_transcript(transcripts_dir / f"{case.patient_id}.json", transcript)
        return transcript

    transcripts: dict[str, AgentTranscript] = {}
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        for transcript in pool.map(run_one, manifest.cases):
            transcripts[transcript.patient_id] = transcript
    logger.info("generated %d reports under %s", len(transcripts), reports_dir)
    return transcripts


def load_reports(out_dir: str | Path) -> dict[str, str]:
    reports_dir = Path(out_dir) / REPORTS_SUBDIR
    reports = {
        path.stem: path.read_text(encoding="utf-8")
        for path in sorted(reports_dir.glob("*.txt"))
    }
    if not reports:
        raise EvaluationError(f"no reports found under {reports_dir}")
    return reports


def report_embeddings(
    reports: dict[str, str], embedder: EmbedderConfig
) -> dict[str, Embedding]:
    """Clean each report, then embed it; keyed by patient id."""
    items = [(pid, clean_report(text)) for pid, text in sorted(reports.items())]
    return {e.id: e for e in embed_batch(embedder, items, modality="report")}


def clinical_text_embeddings(
    manifest: CohortManifest, embedder: EmbedderConfig
) -> dict[str, Embedding]:
    items = [
        (case.patient_id, build_clinical_text(case))
        for case in manifest.eligible_cases()
    ]
    return {e.id: e for e in embed_batch(embedder, items, modality="clinical_text")}


def slide_embeddings(manifest: CohortManifest) -> dict[str, Embedding]:
    """Load each eligible case's precomputed slide feature vector."""
    out: dict[str, Embedding] = {}
    for case in manifest.eligible_cases():
        if case.slide_feature_path is None:
            continue  # run_experiment reports the gap with the patient id
        vector = read_feature_file(case.slide_feature_path)
        out[case.patient_id] = Embedding(
            id=case.patient_id, vector=vector, modality="slide"
        )
    return out


def build_providers(
    manifest: CohortManifest,
    reports: dict[str, str],
    embedder: EmbedderConfig,
) -> dict[str, FeatureProvider]:
    """Assemble all six configurations' feature sources."""
    clinical = StaticFeatures(clinical_text_embeddings(manifest, embedder))
    onehot = FoldAwareFeatures(
        lambda training_ids: one_hot_encode_cohort(manifest, training_ids)
    )
    report = StaticFeatures(report_embeddings(reports, embedder))
    slide = StaticFeatures(slide_embeddings(manifest))
    return {
        "clinical_text": clinical,
        "clinical_onehot": onehot,
        "moa_no_histology": report,
        "histology": slide,
        "histology_plus_clinical": ConcatFeatures(onehot, slide),
        "moa_with_histology": ConcatFeatures(report, slide),
    }


def run_all(
    manifest: CohortManifest,
    providers: dict[str, FeatureProvider],
    train_config: TrainConfig,
    n_folds: int = 5,
    seed: int = 0,
    config_names: tuple[str, ...] = CONFIG_NAMES,
    fold_inspector=None,
) -> list[ExperimentResult]:
    """Run the requested configurations over one shared fold split."""
    unknown = [name for name in config_names if name not in CONFIG_NAMES]
    if unknown:
        raise EvaluationError(f"unknown configuration names: {unknown}")
    labels = {
        case.patient_id: case.idh1_label for case in manifest.eligible_cases()
    }
    folds = stratified_folds(labels, n_folds=n_folds, seed=seed)
    results = []
    for name in config_names:
        results.append(
            run_experiment(
                name,
                providers[name],
                manifest,
                folds,
                train_config,
                fold_inspector=fold_inspector,
            )
        )
    return results
