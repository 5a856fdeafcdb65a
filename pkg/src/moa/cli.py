"""Command-line entry point wiring every stage of the toolkit.

Exit codes: 0 success, 1 runtime error (single-line message on stderr),
2 usage error. Every run that writes outputs also writes a manifest.json
(config hash, seed, versions) next to them.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

import moa
from moa.agent import clean_report
from moa.cases import LABEL_TO_INDEX, load_cohort
from moa.config import RunConfig, load_run_config
from moa.embeddings import (
    apply_normalizer,
    fit_normalizer,
    load_embeddings,
    load_stats,
    save_embeddings,
    save_stats,
)
from moa.errors import ConfigError, MoaError
from moa.evaluation import format_table
from moa.knowledge_base import (
    DEFAULT_CHUNK_OVERLAP,
    DEFAULT_CHUNK_SIZE,
    KnowledgeBaseIndex,
    build_index_from_corpus,
)
from moa.mlp import TrainConfig, init_model, load_model, save_model, train
from moa.pipeline import (
    CONFIG_NAMES,
    REPORTS_SUBDIR,
    build_providers,
    generate_reports,
    load_reports,
    run_all,
)
from moa.text_embedder import EmbedderConfig, embed_batch
from moa.tools.base import FixtureStore, ToolRegistry
from moa.tools.histology import HistologyTool
from moa.tools.oncokb import OncoKbTool
from moa.tools.pubmed import PubMedTool
from moa.tools.websearch import WebSearchTool

logger = logging.getLogger(__name__)


def _check_offline(config: RunConfig) -> None:
    """offline=true must mean zero live endpoints, embedder included."""
    if not config.offline:
        return
    if config.embedder.kind == "remote":
        raise ConfigError("offline run cannot use a remote embedder")
    if config.agent.backend == "live_llm":
        raise ConfigError("offline run cannot use the live LLM backend")


def build_registry(config: RunConfig) -> ToolRegistry:
    mode = "offline" if config.offline else "live"
    fixtures = FixtureStore(config.fixtures_dir)
    registry = ToolRegistry()
    registry.register(PubMedTool(mode=mode, fixtures=fixtures))
    registry.register(OncoKbTool(mode=mode, fixtures=fixtures))
    registry.register(WebSearchTool(mode=mode, fixtures=fixtures))
    if config.histology_model_path is not None:
        registry.register(HistologyTool(load_model(config.histology_model_path)))
    return registry


def write_manifest(out_dir: Path, command: str, config_hash: str = "", seed: int = 0) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config_hash": config_hash,
        "seed": seed,
        "versions": {
            "moa": moa.__version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    with (out_dir / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_ingest(args) -> int:
    manifest = load_cohort(args.cases, strict=args.strict)
    eligible = manifest.eligible_cases()
    counts = " ".join(f"{label}={n}" for label, n in sorted(manifest.class_counts.items()))
    print(f"cases={len(manifest.cases)} eligible={len(eligible)} {counts}")
    return 0


def cmd_kb_build(args) -> int:
    embedder = EmbedderConfig(kind="hashed", dimension=args.dimension)
    index = build_index_from_corpus(
        args.corpus,
        embedder,
        keywords=args.keywords.split(",") if args.keywords else None,
        chunk_size=args.chunk_size,
        overlap=args.overlap,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    index.save(out)
    write_manifest(out.parent, "kb build")
    print(f"indexed {len(index)} chunks -> {out}")
    return 0


def cmd_kb_query(args) -> int:
    index = KnowledgeBaseIndex.load(args.index)
    for chunk, score in index.retrieve(args.query, k=args.k):
        print(f"{score:.4f} {chunk.chunk_id} {chunk.title}")
    return 0


def cmd_report_generate(args) -> int:
    config = load_run_config(args.config)
    if args.cases:
        config.cases_path = Path(args.cases)
        if not config.cases_path.exists():
            raise ConfigError(f"cases file not found: {config.cases_path}")
    if args.out:
        config.output_dir = Path(args.out)
    if args.offline:
        config.offline = True
    _check_offline(config)
    agent_config = config.agent
    if args.no_histology:
        agent_config = replace(agent_config, histology_enabled=False)
    manifest = load_cohort(config.cases_path)
    registry = build_registry(config)
    kb_index = build_index_from_corpus(config.corpus_dir, config.embedder)
    transcripts = generate_reports(
        manifest,
        agent_config,
        registry,
        kb_index,
        config.output_dir,
        max_workers=config.report_workers,
    )
    write_manifest(config.output_dir, "report generate", config.config_hash, config.seed)
    print(f"wrote {len(transcripts)} reports under {config.output_dir / REPORTS_SUBDIR}")
    return 0


def cmd_embed_texts(args) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        raise ConfigError(f"input directory not found: {in_dir}")
    embedder = EmbedderConfig(
        kind=args.embedder, endpoint=args.endpoint, dimension=args.dimension
    )
    items = [
        (path.stem, clean_report(path.read_text(encoding="utf-8")))
        for path in sorted(in_dir.glob("*.txt"))
    ]
    if not items:
        raise ConfigError(f"no *.txt files under {in_dir}")
    embeddings = embed_batch(embedder, items, modality="report")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(out, embeddings)
    write_manifest(out.parent, "embed texts")
    print(f"embedded {len(embeddings)} texts -> {out}")
    return 0


def cmd_embed_fit(args) -> int:
    embeddings = load_embeddings(args.in_path)
    if not embeddings:
        raise ConfigError(f"no embeddings in {args.in_path}")
    stats = fit_normalizer(embeddings)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_stats(out, stats)
    print(f"fitted on {len(embeddings)} embeddings ({stats.dimension} dims) -> {out}")
    return 0


def cmd_embed_normalize(args) -> int:
    stats = load_stats(args.stats)
    embeddings = load_embeddings(args.in_path)
    normalized = [apply_normalizer(stats, e) for e in embeddings]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(out, normalized)
    print(f"normalized {len(normalized)} embeddings -> {out}")
    return 0


def _load_labels(path: str) -> dict[str, str]:
    """JSON object mapping patient_id -> 'mutant' | 'wildtype'."""
    labels_path = Path(path)
    if not labels_path.exists():
        raise ConfigError(f"labels file not found: {labels_path}")
    try:
        data = json.loads(labels_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{labels_path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict) or not data:
        raise ConfigError(f"{labels_path}: labels must be a non-empty object")
    bad = sorted({v for v in data.values() if v not in LABEL_TO_INDEX})
    if bad:
        raise ConfigError(f"{labels_path}: unknown labels {bad}")
    return data


def cmd_train(args) -> int:
    embeddings = {e.id: e for e in load_embeddings(args.embeddings)}
    labels = _load_labels(args.labels)
    ids = sorted(set(embeddings) & set(labels))
    if not ids:
        raise ConfigError("no ids shared between embeddings and labels")

    train_config = load_run_config(args.config).train if args.config else TrainConfig()
    overrides = {
        "learning_rate": args.lr,
        "weight_decay": args.weight_decay,
        "batch_size": args.batch_size,
        "epochs": args.epochs,
        "seed": args.seed,
    }
    train_config = replace(
        train_config, **{k: v for k, v in overrides.items() if v is not None}
    )

    x = np.stack([embeddings[pid].vector for pid in ids])
    y = np.array([LABEL_TO_INDEX[labels[pid]] for pid in ids])
    model = init_model(x.shape[1], seed=train_config.seed)
    trained, losses = train(model, x, y, train_config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(out, trained)
    write_manifest(out.parent, "train", seed=train_config.seed)
    print(f"trained on {len(ids)} cases, final loss {losses[-1]:.4f} -> {out}")
    return 0


def cmd_experiment_run(args) -> int:
    config = load_run_config(args.config)
    if args.offline:
        config.offline = True
    _check_offline(config)
    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = load_cohort(config.cases_path)
    registry = build_registry(config)
    kb_index = build_index_from_corpus(config.corpus_dir, config.embedder)

    reports_dir = out_dir / REPORTS_SUBDIR
    if not reports_dir.is_dir() or not any(reports_dir.glob("*.txt")):
        # Evaluation reports always exclude the histology tool, so the
        # report text cannot carry the tool's own label prediction.
        agent_config = replace(config.agent, histology_enabled=False)
        generate_reports(
            manifest,
            agent_config,
            registry,
            kb_index,
            out_dir,
            max_workers=config.report_workers,
        )
    reports = load_reports(out_dir)
    providers = build_providers(manifest, reports, config.embedder)
    names = tuple(args.configs.split(",")) if args.configs else CONFIG_NAMES
    results = run_all(
        manifest,
        providers,
        config.train,
        n_folds=config.n_folds,
        seed=config.seed,
        config_names=names,
    )
    out_path = Path(args.out) if args.out else out_dir / "results.jsonl"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        for result in results:
            fh.write(result.to_record() + "\n")
    write_manifest(out_dir, "experiment run", config.config_hash, config.seed)
    print(format_table(results))
    print(f"results -> {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moa",
        description="Multimodal oncology agent toolkit: reports, embeddings, evaluation.",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a patient-case file")
    p.add_argument("--cases", required=True)
    p.add_argument("--strict", action="store_true", help="reject incomplete cases")
    p.set_defaults(func=cmd_ingest)

    kb = sub.add_parser("kb", help="build or query the knowledge base")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True)
    p = kb_sub.add_parser("build", help="ingest a corpus directory into an index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    p.add_argument("--overlap", type=int, default=DEFAULT_CHUNK_OVERLAP)
    p.add_argument("--dimension", type=int, default=768)
    p.add_argument("--keywords", default="", help="comma-separated corpus filter")
    p.set_defaults(func=cmd_kb_build)
    p = kb_sub.add_parser("query", help="retrieve top-k chunks for a query")
    p.add_argument("--index", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_kb_query)

    report = sub.add_parser("report", help="generate agent reports")
    report_sub = report.add_subparsers(dest="report_command", required=True)
    p = report_sub.add_parser("generate", help="run the agent over a cohort")
    p.add_argument("--config", required=True)
    p.add_argument("--cases", default="", help="override the config's cases file")
    p.add_argument("--out", default="", help="override the config's output dir")
    p.add_argument("--offline", action="store_true")
    p.add_argument("--no-histology", action="store_true")
    p.set_defaults(func=cmd_report_generate)

    embed = sub.add_parser("embed", help="embed report texts")
    embed_sub = embed.add_subparsers(dest="embed_command", required=True)
    p = embed_sub.add_parser("texts", help="embed a directory of *.txt files")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--embedder", choices=("hashed", "remote"), default="hashed")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--dimension", type=int, default=768)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed_texts)
    p = embed_sub.add_parser("fit", help="fit normalization stats on an embedding file")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed_fit)
    p = embed_sub.add_parser("normalize", help="apply stored normalization stats")
    p.add_argument("--stats", required=True)
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed_normalize)

    p = sub.add_parser("train", help="train a classifier on stored embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True, help="JSON object: patient_id -> label")
    p.add_argument("--config", default="", help="run config supplying train settings")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    experiment = sub.add_parser("experiment", help="run the evaluation")
    experiment_sub = experiment.add_subparsers(dest="experiment_command", required=True)
    p = experiment_sub.add_parser("run", help="run configurations over a cohort")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="", help="results path (default <output_dir>/results.jsonl)")
    p.add_argument("--offline", action="store_true")
    p.add_argument("--configs", default="", help="comma-separated subset of configurations")
    p.set_defaults(func=cmd_experiment_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except MoaError as exc:
        message = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
