"""Run configuration: one structured file wiring every stage of a run.

The file is JSON with one section per module (agent/train/embedder) plus
top-level paths and switches. Relative paths are resolved against the
config file's own directory, so a config can travel with its fixtures.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from moa.agent import AgentConfig
from moa.errors import ConfigError
from moa.mlp import TrainConfig
from moa.text_embedder import EmbedderConfig

TOP_LEVEL_KEYS = {
    "cases_path",
    "corpus_dir",
    "fixtures_dir",
    "output_dir",
    "histology_model_path",
    "seed",
    "offline",
    "n_folds",
    "report_workers",
    "agent",
    "train",
    "embedder",
}


@dataclass
class RunConfig:
    cases_path: Path
    corpus_dir: Path
    fixtures_dir: Path
    output_dir: Path
    agent: AgentConfig = field(default_factory=AgentConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    histology_model_path: Path | None = None
    seed: int = 0
    offline: bool = True
    n_folds: int = 5
    report_workers: int = 4
    config_hash: str = ""

    def __post_init__(self):
        if self.n_folds < 2:
            raise ConfigError("n_folds must be >= 2")
        if self.report_workers < 1:
            raise ConfigError("report_workers must be >= 1")


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def config_hash(raw: dict[str, Any]) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def load_run_config(path: str | Path) -> RunConfig:
    """Parse and validate a run config; referenced inputs must exist."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config root must be an object")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    for required in ("cases_path", "corpus_dir", "fixtures_dir", "output_dir"):
        if required not in raw:
            raise ConfigError(f"{path}: missing required key {required!r}")

    base = path.parent
    cases_path = _resolve(base, raw["cases_path"])
    corpus_dir = _resolve(base, raw["corpus_dir"])
    fixtures_dir = _resolve(base, raw["fixtures_dir"])
    output_dir = _resolve(base, raw["output_dir"])
    for must_exist, kind in ((cases_path, "cases file"), (corpus_dir, "corpus directory"), (fixtures_dir, "fixtures directory")):
        if not must_exist.exists():
            raise ConfigError(f"{path}: {kind} not found at {must_exist}")

    histology_model_path = None
    if raw.get("histology_model_path"):
        histology_model_path = _resolve(base, raw["histology_model_path"])
        if not histology_model_path.exists():
            raise ConfigError(f"{path}: histology model not found at {histology_model_path}")

    agent_section = dict(raw.get("agent", {}))
    if "enabled_tools" in agent_section:
        agent_section["enabled_tools"] = frozenset(agent_section["enabled_tools"])
    train_section = dict(raw.get("train", {}))
    if isinstance(train_section.get("class_weights"), list):
        train_section["class_weights"] = tuple(train_section["class_weights"])
    embedder_section = dict(raw.get("embedder", {}))

    try:
        return RunConfig(
            cases_path=cases_path,
            corpus_dir=corpus_dir,
            fixtures_dir=fixtures_dir,
            output_dir=output_dir,
            agent=AgentConfig(**agent_section),
            train=TrainConfig(**train_section),
            embedder=EmbedderConfig(**embedder_section) if embedder_section else EmbedderConfig(),
            histology_model_path=histology_model_path,
            seed=int(raw.get("seed", 0)),
            offline=bool(raw.get("offline", True)),
            n_folds=int(raw.get("n_folds", 5)),
            report_workers=int(raw.get("report_workers", 4)),
            config_hash=config_hash(raw),
        )
    except TypeError as exc:
        raise ConfigError(f"{path}: bad section field ({exc})") from exc
