"""OncoKB variant annotation via the byProteinChange endpoint.

The service's oncogenicity strings are normalized into the closed
three-value vocabulary used by GeneAnnotation; anything unrecognized, and
any unknown gene, collapses to "unknown" rather than failing.
"""

from __future__ import annotations

import os
import re
from typing import Any

from moa.cases import GeneAnnotation
from moa.errors import ConfigError
from moa.tools.base import FixtureBackedTool, FixtureStore, ToolDescriptor, ToolResult
from moa.transport import HttpTransport

ANNOTATE_URL = "https://www.oncokb.org/api/v1/annotate/mutations/byProteinChange"
TOKEN_ENV_VAR = "MOA_ONCOKB_TOKEN"

# Service vocabulary -> ours. Keys are lowercased before lookup.
ONCOGENICITY_MAP = {
    "oncogenic": "oncogenic",
    "likely oncogenic": "likely-oncogenic",
    "likely neutral": "unknown",
    "inconclusive": "unknown",
    "resistance": "unknown",
    "unknown": "unknown",
    "": "unknown",
}

DESCRIPTOR = ToolDescriptor(
    name="oncokb_annotate",
    description="Annotate a gene alteration with curated oncogenicity evidence.",
    input_schema={"gene": "string", "alteration": "string"},
    requires=("molecular_summary",),
)


def normalize_oncogenicity(raw: str) -> str:
    return ONCOGENICITY_MAP.get(raw.strip().lower(), "unknown")


class OncoKbTool(FixtureBackedTool):
    descriptor = DESCRIPTOR

    def __init__(
        self,
        mode: str = "offline",
        fixtures: FixtureStore | None = None,
        transport: HttpTransport | None = None,
        token: str | None = None,
    ):
        super().__init__(mode=mode, fixtures=fixtures)
        self.transport = transport or HttpTransport(offline=(mode == "offline"))
        self.token = token if token is not None else os.environ.get(TOKEN_ENV_VAR, "")

    def annotate(self, gene: str, alteration: str) -> ToolResult:
        if not gene or not gene.strip():
            raise ValueError("oncokb_annotate requires a non-empty gene symbol")
        return self.run({"gene": gene, "alteration": alteration})

    def _fetch_live(self, params: dict[str, Any]) -> dict[str, Any]:
        if not self.token:
            raise ConfigError(f"live OncoKB calls require {TOKEN_ENV_VAR} to be set")
        return self.transport.get_json(
            ANNOTATE_URL,
            params={
                "hugoSymbol": params["gene"],
                "alteration": params["alteration"],
                "referenceGenome": "GRCh38",
            },
            headers={"Authorization": f"Bearer {self.token}"},
        )

    def _render(self, params: dict[str, Any], response: dict[str, Any]) -> tuple[str, list[str]]:
        oncogenicity = normalize_oncogenicity(str(response.get("oncogenic", "")))
        summary = (
            response.get("variantSummary")
            or response.get("geneSummary")
            or "No curated summary available."
        )
        payload = (
            f"{params['gene']} {params['alteration']}: oncogenicity {oncogenicity}. {summary}"
        )
        return payload, [f"oncokb:{params['gene']}:{params['alteration']}"]


def to_annotation(params: dict[str, Any], result: ToolResult) -> GeneAnnotation:
    """Project an ok annotation result back onto the cohort's domain type."""
    if result.status != "ok":
        raise ValueError(f"cannot build an annotation from a {result.status} result")
    match = re.search(r"oncogenicity (oncogenic|likely-oncogenic|unknown)\b", result.payload)
    return GeneAnnotation(
        gene_symbol=params["gene"],
        alteration=params.get("alteration", ""),
        oncogenicity=match.group(1) if match else "unknown",
        source="oncokb",
    )
