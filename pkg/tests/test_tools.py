"""Tool plumbing: fixture record/replay, the concrete tools, and the registry."""

import json

import numpy as np
import pytest

from moa.errors import ConfigError, OfflineViolationError, TransportError
from moa.mlp import init_model
from moa.tools.base import (
    FixtureBackedTool,
    FixtureStore,
    ToolDescriptor,
    ToolRegistry,
    ToolResult,
    canonical_input,
    fixture_key,
)
from moa.tools.histology import HistologyTool, read_feature_file
from moa.tools.oncokb import OncoKbTool, normalize_oncogenicity, to_annotation
from moa.tools.pubmed import PubMedTool, parse_efetch_xml
from moa.tools.websearch import StubSearchProvider, WebSearchTool
from moa.transport import HttpTransport


def test_canonical_input_is_order_insensitive():
    assert canonical_input({"b": 1, "a": 2}) == canonical_input({"a": 2, "b": 1})
    assert canonical_input({"a": 2, "b": 1}) == '{"a":2,"b":1}'


def test_fixture_key_frozen_values():
    # [DERIVED] sha256 prefixes computed independently of this implementation.
    assert (
        fixture_key("pubmed_search", {"term": "IDH1 mutation glioma", "max_results": 3})
        == "pubmed_search__0236473b2c9cb79a"
    )
    assert (
        fixture_key("oncokb_annotate", {"gene": "TP53", "alteration": "R273H"})
        == "oncokb_annotate__22ff5da4fb9f39c6"
    )


def test_descriptor_rejects_unknown_required_fields():
    with pytest.raises(ConfigError, match="unknown case fields"):
        ToolDescriptor(name="t", description="", input_schema={}, requires=("favorite_color",))


def test_tool_result_invariants():
    with pytest.raises(ValueError):
        ToolResult(tool_name="t", status="done")
    with pytest.raises(ValueError):
        ToolResult(tool_name="t", status="ok", payload="")
    with pytest.raises(ValueError):
        ToolResult(tool_name="t", status="skipped", detail="")
    ok = ToolResult(tool_name="t", status="ok", payload="p", citations=["c"], latency_ms=3)
    assert ToolResult.from_dict(ok.to_dict()) == ok


class EchoTool(FixtureBackedTool):
    """Minimal fixture-backed tool whose live fetch is scripted."""

    descriptor = ToolDescriptor(name="echo", description="", input_schema={"word": "string"})

    def __init__(self, responses=None, fail_with=None, **kwargs):
        super().__init__(**kwargs)
        self.responses = responses or {}
        self.fail_with = fail_with
        self.live_calls = 0

    def _fetch_live(self, params):
        self.live_calls += 1
        if self.fail_with is not None:
            raise self.fail_with
        return {"echo": self.responses.get(params["word"], params["word"].upper())}

    def _render(self, params, response):
        return f"echo says {response['echo']}", [f"echo:{params['word']}"]


class TestRecordReplay:
    def test_record_writes_fixture_then_offline_replays(self, tmp_path):
        store = FixtureStore(tmp_path)
        recorder = EchoTool(mode="record", fixtures=store)
        first = recorder.run({"word": "hi"})
        assert first.status == "ok"
        assert recorder.live_calls == 1

        key = fixture_key("echo", {"word": "hi"})
        on_disk = json.loads(store.path_for(key).read_text())
        assert on_disk == {"input": {"word": "hi"}, "response": {"echo": "HI"}}

        replayer = EchoTool(mode="offline", fixtures=store)
        replayed = replayer.run({"word": "hi"})
        assert replayer.live_calls == 0
        assert replayed.payload == first.payload
        assert replayed.citations == first.citations

    def test_offline_miss_is_error_naming_key(self, tmp_path):
        tool = EchoTool(mode="offline", fixtures=FixtureStore(tmp_path))
        result = tool.run({"word": "never-recorded"})
        assert result.status == "error"
        assert fixture_key("echo", {"word": "never-recorded"}) in result.detail
        assert tool.live_calls == 0

    def test_transport_error_becomes_error_result_with_attempts(self, tmp_path):
        tool = EchoTool(
            mode="record",
            fixtures=FixtureStore(tmp_path),
            fail_with=TransportError("connect refused", attempts=3),
        )
        result = tool.run({"word": "hi"})
        assert result.status == "error"
        assert "after 3 attempts" in result.detail

    def test_mode_validation(self, tmp_path):
        with pytest.raises(ConfigError):
            EchoTool(mode="cached", fixtures=FixtureStore(tmp_path))
        with pytest.raises(ConfigError):
            EchoTool(mode="offline", fixtures=None)


def test_registry_uniqueness_and_lookup(tmp_path):
    registry = ToolRegistry()
    tool = EchoTool(mode="record", fixtures=FixtureStore(tmp_path))
    registry.register(tool)
    assert "echo" in registry
    assert registry.get("echo") is tool
    assert registry.names() == ["echo"]
    with pytest.raises(ConfigError, match="already registered"):
        registry.register(tool)
    with pytest.raises(KeyError):
        registry.get("missing")


EFETCH_XML = """<PubmedArticleSet>
  <PubmedArticle><MedlineCitation><PMID>11111</PMID><Article>
    <ArticleTitle>IDH1 in <i>glioma</i></ArticleTitle>
    <Abstract><AbstractText Label="BACKGROUND">Part one.</AbstractText>
    <AbstractText>Part two.</AbstractText></Abstract>
  </Article></MedlineCitation></PubmedArticle>
  <PubmedArticle><MedlineCitation><PMID>22222</PMID><Article>
    <ArticleTitle>Second study</ArticleTitle>
  </Article></MedlineCitation></PubmedArticle>
</PubmedArticleSet>"""


def test_parse_efetch_xml():
    articles = parse_efetch_xml(EFETCH_XML)
    assert len(articles) == 2
    assert articles[0]["pmid"] == "11111"
    assert articles[0]["title"] == "IDH1 in glioma"
    assert articles[0]["abstract"] == "Part one. Part two."
    assert articles[1]["abstract"] == ""
    assert parse_efetch_xml("   ") == []


class TestPubMed:
    def fixture_store(self, tmp_path, term="IDH1 glioma", max_results=2):
        store = FixtureStore(tmp_path)
        key = fixture_key("pubmed_search", {"term": term, "max_results": max_results})
        store.save(
            key,
            {
                "input": {"term": term, "max_results": max_results},
                "response": {
                    "esearch": {"esearchresult": {"idlist": ["11111", "22222"]}},
                    "efetch_xml": EFETCH_XML,
                },
            },
        )
        return store

    def test_offline_search_renders_articles(self, tmp_path):
        tool = PubMedTool(mode="offline", fixtures=self.fixture_store(tmp_path))
        result = tool.search("IDH1 glioma", max_results=2)
        assert result.status == "ok"
        assert "PMID 11111" in result.payload
        assert result.citations == ["pmid:11111", "pmid:22222"]

    def test_max_results_truncates_rendering(self, tmp_path):
        store = self.fixture_store(tmp_path, max_results=1)
        tool = PubMedTool(mode="offline", fixtures=store)
        result = tool.search("IDH1 glioma", max_results=1)
        assert result.citations == ["pmid:11111"]
        assert "22222" not in result.payload

    def test_zero_results_is_wellformed_ok(self, tmp_path):
        tool = PubMedTool(mode="offline", fixtures=FixtureStore(tmp_path))
        result = tool.search("anything", max_results=0)
        assert result.status == "ok"
        assert "max_results=0" in result.payload

    def test_input_validation(self, tmp_path):
        tool = PubMedTool(mode="offline", fixtures=FixtureStore(tmp_path))
        with pytest.raises(ValueError):
            tool.search("  ", 3)
        with pytest.raises(ValueError):
            tool.search("term", -1)

    def test_offline_transport_never_touches_wire(self, tmp_path):
        # The transport itself enforces offline mode even if a tool tried.
        tool = PubMedTool(mode="offline", fixtures=FixtureStore(tmp_path))
        assert tool.transport.offline
        with pytest.raises(OfflineViolationError):
            tool.transport.get_json("https://eutils.ncbi.nlm.nih.gov/x")


class TestOncoKb:
    def test_normalize_oncogenicity_vocabulary(self):
        assert normalize_oncogenicity("Oncogenic") == "oncogenic"
        assert normalize_oncogenicity("Likely Oncogenic") == "likely-oncogenic"
        assert normalize_oncogenicity("Likely Neutral") == "unknown"
        assert normalize_oncogenicity("") == "unknown"
        assert normalize_oncogenicity("Resistance") == "unknown"
        assert normalize_oncogenicity("something new") == "unknown"

    def annotate_offline(self, tmp_path, oncogenic="Likely Oncogenic"):
        store = FixtureStore(tmp_path)
        params = {"gene": "CIC", "alteration": "R215W"}
        store.save(
            fixture_key("oncokb_annotate", params),
            {
                "input": params,
                "response": {"oncogenic": oncogenic, "variantSummary": "Recurrent in glioma."},
            },
        )
        tool = OncoKbTool(mode="offline", fixtures=store)
        return params, tool.annotate("CIC", "R215W")

    def test_offline_annotate_and_projection(self, tmp_path):
        params, result = self.annotate_offline(tmp_path)
        assert result.status == "ok"
        assert "CIC R215W: oncogenicity likely-oncogenic." in result.payload
        assert result.citations == ["oncokb:CIC:R215W"]
        annotation = to_annotation(params, result)
        assert annotation.gene_symbol == "CIC"
        assert annotation.oncogenicity == "likely-oncogenic"
        assert annotation.source == "oncokb"

    def test_to_annotation_requires_ok(self):
        bad = ToolResult(tool_name="oncokb_annotate", status="error", detail="x")
        with pytest.raises(ValueError):
            to_annotation({"gene": "CIC"}, bad)

    def test_live_requires_token(self, tmp_path, monkeypatch):
        monkeypatch.delenv("MOA_ONCOKB_TOKEN", raising=False)
        tool = OncoKbTool(mode="record", fixtures=FixtureStore(tmp_path))
        with pytest.raises(ConfigError, match="MOA_ONCOKB_TOKEN"):
            tool._fetch_live({"gene": "TP53", "alteration": "R273H"})

    def test_gene_required(self, tmp_path):
        tool = OncoKbTool(mode="offline", fixtures=FixtureStore(tmp_path))
        with pytest.raises(ValueError):
            tool.annotate("", "R273H")


class TestWebSearch:
    def test_stub_provider_is_deterministic(self):
        provider = StubSearchProvider()
        a = provider.search("glioma prognosis", 3)
        b = provider.search("glioma prognosis", 3)
        assert a == b
        assert len(a) == 3
        assert all(e["url"].startswith("https://search.example.org/") for e in a)

    def test_record_then_replay(self, tmp_path):
        store = FixtureStore(tmp_path)
        recorded = WebSearchTool(mode="record", fixtures=store).search("glioma", 2)
        replayed = WebSearchTool(mode="offline", fixtures=store).search("glioma", 2)
        assert recorded.payload == replayed.payload
        assert len(replayed.citations) == 2

    def test_zero_results(self, tmp_path):
        tool = WebSearchTool(mode="offline", fixtures=FixtureStore(tmp_path))
        assert tool.search("q", 0).status == "ok"


class TestHistology:
    def write_features(self, tmp_path, values):
        path = tmp_path / "slide.json"
        path.write_text(json.dumps(values))
        return path

    def test_read_feature_file_validation(self, tmp_path):
        good = self.write_features(tmp_path, [0.5] * 768)
        assert read_feature_file(good).shape == (768,)
        for bad_values in ([0.5] * 767, {"not": "a list"}):
            bad = self.write_features(tmp_path, bad_values)
            with pytest.raises(Exception, match="expected"):
                read_feature_file(bad)
        missing = tmp_path / "nope.json"
        with pytest.raises(Exception, match="not found"):
            read_feature_file(missing)

    def test_predict_renders_probability_and_label(self, tmp_path):
        model = init_model(16, hidden_dims=(8, 6, 4), seed=0)
        tool = HistologyTool(model)
        path = self.write_features(tmp_path, [0.1] * 16)
        result = tool.predict(path)
        assert result.status == "ok"
        assert "IDH1 mutation probability: " in result.payload
        assert result.payload.endswith(("Prediction: mutant.", "Prediction: wildtype."))

    def test_image_paths_are_skipped(self):
        model = init_model(16, hidden_dims=(8, 6, 4), seed=0)
        tool = HistologyTool(model)
        for suffix in (".svs", ".PNG", ".tiff"):
            result = tool.run({"feature_path": f"/slides/scan{suffix}"})
            assert result.status == "skipped"
            assert "feature extraction" in result.detail

    def test_bad_feature_file_is_error_result(self, tmp_path):
        model = init_model(16, hidden_dims=(8, 6, 4), seed=0)
        result = HistologyTool(model).predict(tmp_path / "missing.json")
        assert result.status == "error"
        assert "not found" in result.detail

    def test_prediction_is_deterministic(self, tmp_path):
        model = init_model(16, hidden_dims=(8, 6, 4), seed=7)
        path = self.write_features(tmp_path, list(np.linspace(-1, 1, 16)))
        tool = HistologyTool(model)
        assert tool.predict(path).payload == tool.predict(path).payload
