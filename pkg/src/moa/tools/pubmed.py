"""PubMed literature search over the NCBI E-utilities endpoints.

Live mode does an esearch (JSON id list) followed by an efetch (XML article
records); both raw responses are stored together in the fixture so replay
never touches the wire.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Any

from moa.tools.base import FixtureBackedTool, FixtureStore, ToolDescriptor, ToolResult
from moa.transport import HttpTransport

ESEARCH_URL = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/esearch.fcgi"
EFETCH_URL = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/efetch.fcgi"
SNIPPET_CHARS = 200

DESCRIPTOR = ToolDescriptor(
    name="pubmed_search",
    description="Search PubMed for peer-reviewed literature matching a query term.",
    input_schema={"term": "string", "max_results": "integer"},
    requires=(),
)


class PubMedTool(FixtureBackedTool):
    descriptor = DESCRIPTOR

    def __init__(
        self,
        mode: str = "offline",
        fixtures: FixtureStore | None = None,
        transport: HttpTransport | None = None,
    ):
        super().__init__(mode=mode, fixtures=fixtures)
        self.transport = transport or HttpTransport(offline=(mode == "offline"))

    def search(self, term: str, max_results: int) -> ToolResult:
        if not term or not term.strip():
            raise ValueError("pubmed_search requires a non-empty term")
        if max_results < 0:
            raise ValueError("max_results must be non-negative")
        if max_results == 0:
            # Boundary case: a well-formed run that asked for nothing.
            return ToolResult(
                tool_name=self.name,
                status="ok",
                payload="No articles requested (max_results=0).",
                citations=[],
            )
        return self.run({"term": term, "max_results": max_results})

    def _fetch_live(self, params: dict[str, Any]) -> dict[str, Any]:
        search = self.transport.get_json(
            ESEARCH_URL,
            params={
                "db": "pubmed",
                "term": params["term"],
                "retmax": params["max_results"],
                "retmode": "json",
            },
        )
        id_list = search.get("esearchresult", {}).get("idlist", [])
        fetch_xml = ""
        if id_list:
            fetch_xml = self.transport.get_text(
                EFETCH_URL,
                params={"db": "pubmed", "id": ",".join(id_list), "retmode": "xml"},
            )
        return {"esearch": search, "efetch_xml": fetch_xml}

    def _render(self, params: dict[str, Any], response: dict[str, Any]) -> tuple[str, list[str]]:
        articles = parse_efetch_xml(response.get("efetch_xml", ""))
        articles = articles[: params["max_results"]]
        if not articles:
            return f"No PubMed articles found for: {params['term']}.", []
        lines = []
        citations = []
        for article in articles:
            snippet = article["abstract"][:SNIPPET_CHARS]
            lines.append(f"PMID {article['pmid']}: {article['title']} {snippet}".rstrip())
            citations.append(f"pmid:{article['pmid']}")
        return "\n".join(lines), citations


def parse_efetch_xml(xml_text: str) -> list[dict[str, str]]:
    """Extract (pmid, title, abstract) triples from an efetch XML document."""
    if not xml_text.strip():
        return []
    root = ET.fromstring(xml_text)
    articles = []
    for node in root.iter("PubmedArticle"):
        pmid = node.findtext(".//PMID", default="").strip()
        title_node = node.find(".//ArticleTitle")
        title = "".join(title_node.itertext()).strip() if title_node is not None else ""
        abstract_parts = [
            "".join(part.itertext()).strip() for part in node.findall(".//AbstractText")
        ]
        abstract = " ".join(p for p in abstract_parts if p)
        if pmid:
            articles.append({"pmid": pmid, "title": title, "abstract": abstract})
    return articles
