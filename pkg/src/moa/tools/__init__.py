"""Concrete evidence tools and the shared fixture/registry plumbing."""

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
from moa.tools.pubmed import PubMedTool
from moa.tools.websearch import SearchProvider, StubSearchProvider, WebSearchTool

__all__ = [
    "FixtureBackedTool",
    "FixtureStore",
    "HistologyTool",
    "OncoKbTool",
    "PubMedTool",
    "SearchProvider",
    "StubSearchProvider",
    "ToolDescriptor",
    "ToolRegistry",
    "ToolResult",
    "WebSearchTool",
    "canonical_input",
    "fixture_key",
    "normalize_oncogenicity",
    "read_feature_file",
    "to_annotation",
]
