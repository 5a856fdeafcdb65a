"""Agent orchestration: tool selection, evidence gathering, report synthesis.

A pluggable chat backend drives the loop. The mock backend follows a fixed
policy (literature, then curated annotation per gene, then web search, then
histology when available) and writes a templated report, which makes whole
runs reproducible byte-for-byte. The live backend speaks a generic
chat-completions-with-tool-calls HTTP contract.

Two hygiene rules are enforced here rather than trusted to the backend: a
tool is only offered when every case field it requires is present, and the
histology tool is withheld entirely when histology_enabled is off.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from moa.cases import PatientCase, build_clinical_text, build_molecular_summary
from moa.errors import BackendError, ConfigError
from moa.knowledge_base import DEFAULT_TOP_K, KnowledgeBaseIndex
from moa.tools.base import ToolRegistry, ToolResult
from moa.transport import HttpTransport

logger = logging.getLogger(__name__)

SYSTEM_PROMPT = (
    "You are an oncology assistant. Use the available tools to gather "
    "evidence about the patient, then write a structured report that ends "
    "with a single line of the form 'IDH1 status: <mutant|wildtype|"
    "undetermined>'. Only claim a status the evidence supports."
)

DEFAULT_FIXED_QUERY = (
    "Predict the IDH1 mutation status of this low-grade glioma patient "
    "and justify using available evidence."
)

DEFAULT_MAX_TOOL_ROUNDS = 8
PUBMED_MAX_RESULTS = 3
WEB_MAX_RESULTS = 3
DIGEST_CHARS = 200

ALL_TOOL_NAMES = ("pubmed_search", "oncokb_annotate", "web_search", "histology_predict")


@dataclass
class AgentConfig:
    enabled_tools: frozenset[str] = frozenset(ALL_TOOL_NAMES)
    histology_enabled: bool = True
    fixed_query: str = DEFAULT_FIXED_QUERY
    max_tool_rounds: int = DEFAULT_MAX_TOOL_ROUNDS
    backend: str = "mock"
    retrieval_top_k: int = DEFAULT_TOP_K

    def __post_init__(self):
        if self.max_tool_rounds < 1:
            raise ConfigError("max_tool_rounds must be >= 1")
        if self.retrieval_top_k < 1:
            raise ConfigError("retrieval_top_k must be >= 1")
        if self.backend not in ("mock", "live_llm"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        self.enabled_tools = frozenset(self.enabled_tools)

    def tools_exposed(self) -> frozenset[str]:
        """Enabled tools after applying the histology switch."""
        if self.histology_enabled:
            return self.enabled_tools
        return self.enabled_tools - {"histology_predict"}


@dataclass
class AgentTranscript:
    """Complete record of one run: every tool exchange plus the final report."""

    patient_id: str
    backend_id: str
    rounds: list[tuple[dict[str, Any], ToolResult]] = field(default_factory=list)
    retrieved_chunks: list[str] = field(default_factory=list)
    report_text: str = ""
    notes: str = ""

    def tool_names_called(self) -> list[str]:
        return [request["tool"] for request, _ in self.rounds]

    def to_dict(self) -> dict[str, Any]:
        return {
            "patient_id": self.patient_id,
            "backend_id": self.backend_id,
            "rounds": [
                {"request": request, "result": result.to_dict()}
                for request, result in self.rounds
            ],
            "retrieved_chunks": list(self.retrieved_chunks),
            "report_text": self.report_text,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AgentTranscript:
        return cls(
            patient_id=data["patient_id"],
            backend_id=data["backend_id"],
            rounds=[
                (entry["request"], ToolResult.from_dict(entry["result"]))
                for entry in data["rounds"]
            ],
            retrieved_chunks=list(data["retrieved_chunks"]),
            report_text=data["report_text"],
            notes=data.get("notes", ""),
        )


def save_transcript(path: str | Path, transcript: AgentTranscript) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(transcript.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_transcript(path: str | Path) -> AgentTranscript:
    with Path(path).open("r", encoding="utf-8") as fh:
        return AgentTranscript.from_dict(json.load(fh))


@dataclass
class AgentAction:
    """What the backend wants next: one tool call, or the finished report."""

    kind: str  # "tool_call" | "finish"
    tool_name: str = ""
    params: dict[str, Any] = field(default_factory=dict)
    report_text: str = ""


def pubmed_term(case: PatientCase) -> str:
    tumor = case.tumor_class or "low-grade glioma"
    return f"IDH1 mutation {tumor}"


def web_query(case: PatientCase) -> str:
    parts = [case.tumor_class or "glioma"]
    if case.histologic_morphology:
        parts.append(case.histologic_morphology)
    parts.append("IDH1 prognosis")
    return " ".join(parts)


def _digest(text: str) -> str:
    collapsed = " ".join(text.split())
    return collapsed[:DIGEST_CHARS]


def _histology_status(rounds: list[tuple[dict[str, Any], ToolResult]]) -> str:
    for request, result in rounds:
        if request["tool"] == "histology_predict" and result.status == "ok":
            if "Prediction: mutant" in result.payload:
                return "mutant"
            if "Prediction: wildtype" in result.payload:
                return "wildtype"
    return "undetermined"


def synthesize_report(
    case: PatientCase,
    rounds: list[tuple[dict[str, Any], ToolResult]],
    chunk_titles: list[str],
) -> str:
    """Deterministic report template over case facts, evidence, and context.

    The template deliberately repeats the case's clinical wording and the
    tool payload digests, so text embeddings of the report carry whatever
    signal those sources had.
    """
    lines = ["## Patient summary"]
    clinical = build_clinical_text(case)
    lines.append(clinical if clinical else f"Patient {case.patient_id}: no clinical fields recorded.")
    molecular = build_molecular_summary(case)
    if molecular:
        lines.append("## Molecular findings")
        lines.append(molecular)
    lines.append("## Evidence gathered")
    any_ok = False
    for request, result in rounds:
        if result.status == "ok":
            any_ok = True
            lines.append(f"- {request['tool']}: {_digest(result.payload)}")
        elif result.status == "skipped":
            lines.append(f"- {request['tool']} skipped: {result.detail}")
        else:
            lines.append(f"- {request['tool']} failed.")
    if not rounds:
        lines.append("- No tools were invoked.")
    if chunk_titles:
        lines.append("## Background context")
        for title in chunk_titles:
            lines.append(f"- {title}")
    if rounds and not any_ok:
        lines.append("Note: no tool returned evidence; this report rests on retrieved context alone.")
    lines.append("## Assessment")
    lines.append(f"IDH1 status: {_histology_status(rounds)}")
    return "\n".join(lines)


class MockBackend:
    """Deterministic stand-in for a live chat model.

    Policy: literature search first, then one curated-annotation call per
    gene in the molecular summary, then a web search, then histology when
    offered; once nothing remains to ask for, finish with the templated
    report.
    """

    backend_id = "mock"

    def next_action(
        self,
        case: PatientCase,
        offered_tools: list[str],
        results_so_far: list[tuple[dict[str, Any], ToolResult]],
        chunk_titles: list[str],
    ) -> AgentAction:
        requested = [
            (request["tool"], request["params"]) for request, _ in results_so_far
        ]
        called = {name for name, _ in requested}
        if "pubmed_search" in offered_tools and "pubmed_search" not in called:
            return AgentAction(
                kind="tool_call",
                tool_name="pubmed_search",
                params={"term": pubmed_term(case), "max_results": PUBMED_MAX_RESULTS},
            )
        if "oncokb_annotate" in offered_tools and case.molecular_summary:
            for annotation in case.molecular_summary:
                params = {
                    "gene": annotation.gene_symbol,
                    "alteration": annotation.alteration,
                }
                if ("oncokb_annotate", params) not in requested:
                    return AgentAction(
                        kind="tool_call", tool_name="oncokb_annotate", params=params
                    )
        if "web_search" in offered_tools and "web_search" not in called:
            return AgentAction(
                kind="tool_call",
                tool_name="web_search",
                params={"query": web_query(case), "max_results": WEB_MAX_RESULTS},
            )
        if "histology_predict" in offered_tools and "histology_predict" not in called:
            return AgentAction(
                kind="tool_call",
                tool_name="histology_predict",
                params={"feature_path": case.slide_feature_path},
            )
        return AgentAction(
            kind="finish",
            report_text=synthesize_report(case, results_so_far, chunk_titles),
        )


class LiveLlmBackend:
    """Chat-completions-with-tool-calls client for a hosted model.

    The request carries the system prompt, the case context, accumulated
    tool results, and the offered tool schemas; the response is either a
    tool call or final text. Endpoint and key come from the environment.
    """

    backend_id = "live_llm"

    def __init__(
        self,
        endpoint: str,
        model: str = "gpt-4",
        transport: HttpTransport | None = None,
        api_key: str | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.transport = transport or HttpTransport(offline=False)
        self.api_key = api_key if api_key is not None else os.environ.get("MOA_LLM_API_KEY", "")
        if not self.api_key:
            raise ConfigError("live backend requires MOA_LLM_API_KEY")

    def next_action(self, case, offered_tools, results_so_far, chunk_titles):
        messages = [{"role": "system", "content": SYSTEM_PROMPT}]
        context = build_clinical_text(case)
        molecular = build_molecular_summary(case)
        if molecular:
            context = f"{context} {molecular}".strip()
        if chunk_titles:
            context += " Background: " + "; ".join(chunk_titles)
        messages.append({"role": "user", "content": context or f"Patient {case.patient_id}."})
        for request, result in results_so_far:
            messages.append(
                {
                    "role": "tool",
                    "name": request["tool"],
                    "content": result.payload if result.status == "ok" else f"({result.status}) {result.detail}",
                }
            )
        body = self.transport.post_json(
            self.endpoint,
            {
                "model": self.model,
                "messages": messages,
                "tools": [{"name": name} for name in offered_tools],
            },
            headers={"Authorization": f"Bearer {self.api_key}"},
        )
        choice = body.get("choices", [{}])[0].get("message", {})
        tool_calls = choice.get("tool_calls") or []
        if tool_calls:
            call = tool_calls[0]["function"]
            arguments = call.get("arguments", "{}")
            params = json.loads(arguments) if isinstance(arguments, str) else arguments
            return AgentAction(kind="tool_call", tool_name=call["name"], params=params)
        content = choice.get("content", "")
        if not content:
            raise BackendError("backend returned neither a tool call nor report text")
        return AgentAction(kind="finish", report_text=content)


def _tools_offered(case: PatientCase, config: AgentConfig, registry: ToolRegistry) -> list[str]:
    """Enabled tools whose required case fields are all present, fixed order."""
    offered = []
    exposed = config.tools_exposed()
    for name in ALL_TOOL_NAMES:
        if name not in exposed or name not in registry:
            continue
        descriptor = registry.get(name).descriptor
        if all(getattr(case, f) is not None for f in descriptor.requires):
            offered.append(name)
    return offered


def run_agent(
    case: PatientCase,
    config: AgentConfig,
    registry: ToolRegistry,
    kb_index: KnowledgeBaseIndex,
    backend=None,
) -> AgentTranscript:
    """Drive one case through retrieval, tool rounds, and report synthesis."""
    if backend is None:
        if config.backend != "mock":
            raise ConfigError("a live backend instance must be supplied explicitly")
        backend = MockBackend()
    offered = _tools_offered(case, config, registry)
    for name in offered:
        if name not in registry:
            raise ConfigError(f"enabled tool {name!r} missing from registry")

    query = f"{config.fixed_query} {build_clinical_text(case)}".strip()
    retrieved = kb_index.retrieve(query, k=config.retrieval_top_k)
    chunk_titles = [chunk.title for chunk, _score in retrieved]

    transcript = AgentTranscript(
        patient_id=case.patient_id,
        backend_id=backend.backend_id,
        retrieved_chunks=[chunk.chunk_id for chunk, _score in retrieved],
    )
    calls_per_tool: dict[str, int] = {}
    round_budget = config.max_tool_rounds * max(1, len(offered))
    while True:
        available = [
            name
            for name in offered
            if calls_per_tool.get(name, 0) < config.max_tool_rounds
        ]
        action = backend.next_action(case, available, list(transcript.rounds), chunk_titles)
        if action.kind == "finish":
            transcript.report_text = action.report_text
            break
        name = action.tool_name
        if name not in available or len(transcript.rounds) >= round_budget:
            # Backend asked for something it cannot have; close the run ourselves.
            logger.warning(
                "agent %s: forcing finish (backend requested %r)", case.patient_id, name
            )
            transcript.report_text = synthesize_report(
                case, list(transcript.rounds), chunk_titles
            )
            transcript.notes = f"run closed early: backend requested unavailable tool {name!r}"
            break
        result = registry.get(name).run(action.params)
        calls_per_tool[name] = calls_per_tool.get(name, 0) + 1
        transcript.rounds.append(({"tool": name, "params": action.params}, result))

    if not transcript.report_text:
        raise BackendError(f"agent produced no report for {case.patient_id}")
    statuses = [result.status for _, result in transcript.rounds]
    if statuses and all(s != "ok" for s in statuses):
        note = "all tool invocations failed; report rests on retrieved context"
        transcript.notes = f"{transcript.notes}; {note}" if transcript.notes else note
        logger.warning("agent %s: %s", case.patient_id, note)
    return transcript


def replay_report(
    transcript: AgentTranscript, case: PatientCase, kb_index: KnowledgeBaseIndex
) -> str:
    """Rebuild the report from a stored transcript (no tools, no backend)."""
    titles = [kb_index.title_for(chunk_id) for chunk_id in transcript.retrieved_chunks]
    return synthesize_report(case, list(transcript.rounds), titles)


_HEADING = re.compile(r"^\s*#+\s*")
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")
_EMPHASIS = re.compile(r"[*_`]+")


def clean_report(text: str) -> str:
    """Strip markup decorations and normalize whitespace; idempotent.

    One pass can expose new leading markers (emphasis hiding a bullet), so
    the transformation is applied until it stops changing; every changing
    pass shortens the text or reduces its newline count, so this terminates.
    """
    current = text
    while True:
        cleaned = _clean_once(current)
        if cleaned == current:
            return cleaned
        current = cleaned


def _clean_once(text: str) -> str:
    normalized = text.replace("\r\n", "\n").replace("\r", "\n")
    lines = []
    for line in normalized.split("\n"):
        line = _HEADING.sub("", line)
        line = _BULLET.sub("", line)
        lines.append(line)
    stripped = _EMPHASIS.sub("", "\n".join(lines))
    return " ".join(stripped.split())
