"""Shared test fixtures.

The expensive piece is `full_demo_run`: one offline six-configuration
experiment over the shipped demo cohort, executed through the real CLI in a
subprocess and shared session-wide by every test that inspects its outputs.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path
from types import SimpleNamespace

import pytest

from moa.cases import CohortManifest, GeneAnnotation, PatientCase

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_DIR = REPO_ROOT / "fixtures" / "demo"


def run_cli(*args: str, cwd: Path | None = None) -> subprocess.CompletedProcess:
    """Invoke the CLI exactly as a user would, in a fresh interpreter."""
    return subprocess.run(
        [sys.executable, "-m", "moa.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


def write_run_config(target_dir: Path, **overrides) -> Path:
    """Write a run config pointing at the demo inputs, outputs under target_dir.

    Tests never write into the repo's own fixtures/demo/out; each gets a
    private output directory instead.
    """
    config = {
        "cases_path": str(DEMO_DIR / "cases.jsonl"),
        "corpus_dir": str(DEMO_DIR / "corpus"),
        "fixtures_dir": str(DEMO_DIR / "http"),
        "output_dir": str(target_dir / "out"),
        "seed": 0,
        "offline": True,
        "n_folds": 5,
        "embedder": {"kind": "hashed", "dimension": 256},
        "train": {"epochs": 100},
        "agent": {"histology_enabled": False},
    }
    config.update(overrides)
    path = target_dir / "run.cfg"
    path.write_text(json.dumps(config, indent=2, sort_keys=True), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def demo_dir() -> Path:
    assert DEMO_DIR.is_dir(), "demo fixture set missing; run scripts/make_demo_data.py"
    return DEMO_DIR


@pytest.fixture(scope="session")
def full_demo_run(tmp_path_factory, demo_dir) -> SimpleNamespace:
    """One complete offline experiment run (all six configurations)."""
    base = tmp_path_factory.mktemp("demo_run")
    config_path = write_run_config(base)
    proc = run_cli("experiment", "run", "--config", str(config_path), "--offline")
    out_dir = base / "out"
    return SimpleNamespace(
        proc=proc,
        base=base,
        out_dir=out_dir,
        results_path=out_dir / "results.jsonl",
        config_path=config_path,
    )


def load_results(path: Path) -> dict[str, dict]:
    records = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            record = json.loads(line)
            records[record["config_name"]] = record
    return records


@pytest.fixture
def tiny_manifest() -> CohortManifest:
    """Twelve labeled cases with assorted field coverage, 8 mutant / 4 wildtype."""
    cases = []
    labels = ["mutant"] * 8 + ["wildtype"] * 4
    tumors = ["oligodendroglioma", "astrocytoma"]
    for i, label in enumerate(labels):
        annotations = None
        if i % 3 == 0:
            annotations = [
                GeneAnnotation(gene_symbol="TP53", alteration="R273H", oncogenicity="oncogenic")
            ]
        cases.append(
            PatientCase(
                patient_id=f"T{i:03d}",
                age_years=40 + i,
                sex="female" if i % 2 else "male",
                tumor_class=tumors[i % 2],
                histologic_morphology="diffuse astrocytoma" if i % 2 else None,
                treatment_type="radiation" if i % 4 else "chemotherapy",
                therapeutic_procedure="tumor resection",
                molecular_summary=annotations,
                idh1_label=label,
            )
        )
    return CohortManifest(cases=cases)
