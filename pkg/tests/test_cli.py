"""Command-line surface and the pipeline glue it drives.

Most commands are exercised in-process through moa.cli.main for speed; the
full experiment path runs in a subprocess inside the acceptance suite.
"""

import json

import pytest

from moa.cli import main
from moa.errors import EvaluationError
from moa.pipeline import CONFIG_NAMES, build_providers, load_reports, run_all
from moa.text_embedder import EmbedderConfig

from conftest import DEMO_DIR, write_run_config


def run_main(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_ingest_summarizes_cohort(capsys):
    code, out, _ = run_main(capsys, "ingest", "--cases", str(DEMO_DIR / "cases.jsonl"))
    assert code == 0
    assert out.strip() == "cases=154 eligible=150 mutant=115 wildtype=35"


def test_ingest_missing_file_is_single_line_error(capsys):
    code, out, err = run_main(capsys, "ingest", "--cases", "/no/such/file.jsonl")
    assert code == 1
    assert out == ""
    lines = [l for l in err.splitlines() if l]
    assert len(lines) == 1
    assert lines[0].startswith("error: CohortParseError:")


def test_usage_errors_exit_2(capsys):
    assert main([]) == 2
    capsys.readouterr()
    assert main(["frobnicate"]) == 2
    capsys.readouterr()
    assert main(["experiment"]) == 2
    capsys.readouterr()


def test_kb_build_and_query(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "a.txt").write_text("Glioma facts\nIDH1 mutations define glioma subgroups.\n")
    (corpus / "b.txt").write_text("Astrocytoma notes\nTP53 and morphology in astrocytoma.\n")
    index_path = tmp_path / "kb" / "index.jsonl"

    code, out, _ = run_main(
        capsys, "kb", "build", "--corpus", str(corpus), "--out", str(index_path),
        "--dimension", "64",
    )
    assert code == 0
    assert "indexed" in out and str(index_path) in out
    assert index_path.exists()

    manifest = json.loads((index_path.parent / "manifest.json").read_text())
    assert manifest["command"] == "kb build"
    assert set(manifest["versions"]) == {"moa", "numpy", "python"}

    code, out, _ = run_main(
        capsys, "kb", "query", "--index", str(index_path), "--query", "IDH1 glioma", "--k", "1"
    )
    assert code == 0
    assert "Glioma facts" in out


def test_report_generate_offline(tmp_path, capsys):
    config_path = write_run_config(tmp_path)
    cases = tmp_path / "two_cases.jsonl"
    cases.write_text(
        json.dumps(
            {
                "patient_id": "CLI-A",
                "age_years": 50,
                "tumor_class": "astrocytoma",
                "histologic_morphology": "diffuse astrocytoma",
                "idh1_label": "mutant",
            }
        )
        + "\n"
        + json.dumps(
            {
                "patient_id": "CLI-B",
                "age_years": 40,
                "tumor_class": "oligodendroglioma",
                "histologic_morphology": "oligodendroglioma, NOS",
                "molecular_summary": [
                    {"gene_symbol": "TP53", "alteration": "R273H", "oncogenicity": "oncogenic"}
                ],
                "idh1_label": "wildtype",
            }
        )
        + "\n"
    )
    out_dir = tmp_path / "reports_out"
    code, out, _ = run_main(
        capsys,
        "report", "generate",
        "--config", str(config_path),
        "--cases", str(cases),
        "--out", str(out_dir),
        "--offline", "--no-histology",
    )
    assert code == 0
    assert "wrote 2 reports" in out
    for pid in ("CLI-A", "CLI-B"):
        report = (out_dir / "reports" / f"{pid}.txt").read_text()
        assert report.endswith("IDH1 status: undetermined")
        transcript = json.loads((out_dir / "transcripts" / f"{pid}.json").read_text())
        assert transcript["patient_id"] == pid
    assert (out_dir / "manifest.json").exists()


def test_embed_then_train(tmp_path, capsys):
    texts = tmp_path / "texts"
    texts.mkdir()
    (texts / "E1.txt").write_text("## Report\nmutant signal words aplenty here")
    (texts / "E2.txt").write_text("## Report\nwildtype other vocabulary entirely")
    embeddings_path = tmp_path / "emb.jsonl"
    code, out, _ = run_main(
        capsys, "embed", "texts", "--in", str(texts), "--out", str(embeddings_path),
        "--dimension", "32",
    )
    assert code == 0
    assert "embedded 2 texts" in out
    records = [json.loads(l) for l in embeddings_path.read_text().splitlines()]
    assert [r["id"] for r in records] == ["E1", "E2"]
    assert all(len(r["vector"]) == 32 for r in records)

    labels = tmp_path / "labels.json"
    labels.write_text('{"E1": "mutant", "E2": "wildtype"}\n')
    model_path = tmp_path / "model.npz"
    code, out, _ = run_main(
        capsys, "train",
        "--embeddings", str(embeddings_path),
        "--labels", str(labels),
        "--out", str(model_path),
        "--epochs", "2", "--batch-size", "2",
    )
    assert code == 0
    assert "trained on 2 cases" in out
    assert model_path.exists()


def test_embed_fit_and_normalize(tmp_path, capsys):
    source = tmp_path / "emb.jsonl"
    source.write_text(
        json.dumps({"id": "A", "modality": "report", "vector": [1.0, 10.0]}) + "\n"
        + json.dumps({"id": "B", "modality": "report", "vector": [3.0, 20.0]}) + "\n"
    )
    stats_path = tmp_path / "stats.json"
    code, out, _ = run_main(
        capsys, "embed", "fit", "--in", str(source), "--out", str(stats_path)
    )
    assert code == 0
    assert "fitted on 2 embeddings (2 dims)" in out

    normalized_path = tmp_path / "normalized.jsonl"
    code, out, _ = run_main(
        capsys, "embed", "normalize",
        "--stats", str(stats_path), "--in", str(source), "--out", str(normalized_path),
    )
    assert code == 0
    assert "normalized 2 embeddings" in out
    records = [json.loads(l) for l in normalized_path.read_text().splitlines()]
    # Population z-scores of {1,3} and {10,20} are -1/+1 in both dimensions.
    assert records[0]["vector"] == [-1.0, -1.0]
    assert records[1]["vector"] == [1.0, 1.0]


def test_train_rejects_unknown_label_values(tmp_path, capsys):
    emb = tmp_path / "emb.jsonl"
    emb.write_text(json.dumps({"id": "A", "modality": "report", "vector": [1.0]}) + "\n")
    labels = tmp_path / "labels.json"
    labels.write_text('{"A": "positive"}\n')
    code, _, err = run_main(
        capsys, "train", "--embeddings", str(emb), "--labels", str(labels),
        "--out", str(tmp_path / "m.npz"),
    )
    assert code == 1
    assert "unknown labels ['positive']" in err


def test_offline_rejects_live_backend(tmp_path, capsys):
    config_path = write_run_config(tmp_path, agent={"backend": "live_llm"})
    code, _, err = run_main(
        capsys, "experiment", "run", "--config", str(config_path), "--offline"
    )
    assert code == 1
    assert "error: ConfigError:" in err
    assert "live LLM backend" in err


def test_offline_rejects_remote_embedder(tmp_path, capsys):
    config_path = write_run_config(
        tmp_path, embedder={"kind": "remote", "endpoint": "https://e.test", "dimension": 64}
    )
    code, _, err = run_main(
        capsys, "experiment", "run", "--config", str(config_path), "--offline"
    )
    assert code == 1
    assert "remote embedder" in err


# --- pipeline glue ---------------------------------------------------------


def test_load_reports_requires_files(tmp_path):
    with pytest.raises(EvaluationError, match="no reports found"):
        load_reports(tmp_path)


def test_run_all_rejects_unknown_config_names(tiny_manifest):
    with pytest.raises(EvaluationError, match="unknown configuration names"):
        run_all(tiny_manifest, {}, None, config_names=("clinical_text", "bogus"))


def test_build_providers_covers_all_configurations(tiny_manifest):
    reports = {
        case.patient_id: f"Report for {case.patient_id} with tumor wording"
        for case in tiny_manifest.cases
    }
    providers = build_providers(
        tiny_manifest, reports, EmbedderConfig(kind="hashed", dimension=32)
    )
    assert set(providers) == set(CONFIG_NAMES)
    training = frozenset(c.patient_id for c in tiny_manifest.cases[:8])
    report_vectors = providers["moa_no_histology"].materialize(training)
    assert set(reports) <= set(report_vectors)
    assert report_vectors["T000"].vector.shape == (32,)
    onehot = providers["clinical_onehot"].materialize(training)
    assert onehot["T000"].modality == "one_hot"
