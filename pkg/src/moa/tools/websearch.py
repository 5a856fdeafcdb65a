"""General web search behind a pluggable provider interface.

Branded search engines are not reproducible, so the default provider is a
deterministic stub: result titles, snippets, and URLs are derived from the
query text alone. A real provider only needs to implement `search`.
"""

from __future__ import annotations

import hashlib
from typing import Any, Protocol

from moa.tools.base import FixtureBackedTool, FixtureStore, ToolDescriptor, ToolResult

DESCRIPTOR = ToolDescriptor(
    name="web_search",
    description="Search the open web for pages matching a query.",
    input_schema={"query": "string", "max_results": "integer"},
    requires=(),
)


class SearchProvider(Protocol):
    def search(self, query: str, max_results: int) -> list[dict[str, str]]:
        """Return up to max_results entries with title, snippet, and url keys."""
        ...


class StubSearchProvider:
    """Deterministic provider: same query, same results, no network."""

    def search(self, query: str, max_results: int) -> list[dict[str, str]]:
        digest = hashlib.md5(query.encode("utf-8")).hexdigest()
        results = []
        for i in range(max_results):
            results.append(
                {
                    "title": f"Overview of {query} (part {i + 1})",
                    "snippet": (
                        f"Background material discussing {query}, including diagnostic "
                        f"criteria and reported outcomes [ref {digest[:6]}-{i}]."
                    ),
                    "url": f"https://search.example.org/{digest[:12]}/{i}",
                }
            )
        return results


class WebSearchTool(FixtureBackedTool):
    descriptor = DESCRIPTOR

    def __init__(
        self,
        mode: str = "offline",
        fixtures: FixtureStore | None = None,
        provider: SearchProvider | None = None,
    ):
        super().__init__(mode=mode, fixtures=fixtures)
        self.provider = provider or StubSearchProvider()

    def search(self, query: str, max_results: int) -> ToolResult:
        if not query or not query.strip():
            raise ValueError("web_search requires a non-empty query")
        if max_results < 0:
            raise ValueError("max_results must be non-negative")
        if max_results == 0:
            return ToolResult(
                tool_name=self.name,
                status="ok",
                payload="No results requested (max_results=0).",
                citations=[],
            )
        return self.run({"query": query, "max_results": max_results})

    def _fetch_live(self, params: dict[str, Any]) -> dict[str, Any]:
        entries = self.provider.search(params["query"], params["max_results"])
        return {"results": entries}

    def _render(self, params: dict[str, Any], response: dict[str, Any]) -> tuple[str, list[str]]:
        entries = response.get("results", [])[: params["max_results"]]
        if not entries:
            return f"No web results found for: {params['query']}.", []
        lines = [f"{e['title']}: {e['snippet']} ({e['url']})" for e in entries]
        citations = [e["url"] for e in entries]
        return "\n".join(lines), citations
