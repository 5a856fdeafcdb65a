"""Shared tool plumbing: descriptors, results, fixture replay, registry.

Every networked tool runs in one of three modes. "live" talks to the real
service, "record" does the same but writes the raw response into a fixture
file, and "offline" answers exclusively from fixtures — a miss is an error
naming the cache key rather than a silent fallback to the network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from moa.cases import CASE_FIELD_NAMES
from moa.errors import ConfigError, FixtureMissError, TransportError

logger = logging.getLogger(__name__)

TOOL_MODES = ("offline", "record", "live")
RESULT_STATUSES = ("ok", "error", "skipped")


def canonical_input(payload: dict[str, Any]) -> str:
    """Stable JSON form of a tool input, used for fixture keying."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def fixture_key(tool_name: str, payload: dict[str, Any]) -> str:
    digest = hashlib.sha256(canonical_input(payload).encode("utf-8")).hexdigest()
    return f"{tool_name}__{digest[:16]}"


@dataclass(frozen=True)
class ToolDescriptor:
    """What a tool is called, what it takes, and which case fields it needs."""

    name: str
    description: str
    input_schema: dict[str, str]
    requires: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise ConfigError("tool descriptor requires a name")
        unknown = [f for f in self.requires if f not in CASE_FIELD_NAMES]
        if unknown:
            raise ConfigError(
                f"tool {self.name!r} requires unknown case fields: {unknown}"
            )


@dataclass
class ToolResult:
    tool_name: str
    status: str
    payload: str = ""
    citations: list[str] = field(default_factory=list)
    latency_ms: int = 0
    detail: str = ""

    def __post_init__(self):
        if self.status not in RESULT_STATUSES:
            raise ValueError(f"unknown tool status {self.status!r}")
        if self.status == "ok" and not self.payload:
            raise ValueError(f"tool {self.tool_name}: ok result must carry a payload")
        if self.status == "skipped" and not self.detail:
            raise ValueError(f"tool {self.tool_name}: skipped result must give a reason")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool_name": self.tool_name,
            "status": self.status,
            "payload": self.payload,
            "citations": list(self.citations),
            "latency_ms": self.latency_ms,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ToolResult:
        return cls(
            tool_name=data["tool_name"],
            status=data["status"],
            payload=data.get("payload", ""),
            citations=list(data.get("citations", [])),
            latency_ms=int(data.get("latency_ms", 0)),
            detail=data.get("detail", ""),
        )


class FixtureStore:
    """One JSON file per recorded response, named by the fixture key."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def path_for(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def load(self, key: str) -> dict[str, Any] | None:
        path = self.path_for(key)
        if not path.exists():
            return None
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh)

    def save(self, key: str, record: dict[str, Any]) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.path_for(key)
        with path.open("w", encoding="utf-8") as fh:
            json.dump(record, fh, sort_keys=True, indent=2)
            fh.write("\n")
        return path


class FixtureBackedTool:
    """Base class for tools whose raw responses can be recorded and replayed.

    Subclasses implement `_fetch_live(params) -> response dict` and
    `_render(params, response) -> (payload, citations)`; this class handles
    mode selection, fixture lookup, and error wrapping.
    """

    descriptor: ToolDescriptor

    def __init__(self, mode: str = "offline", fixtures: FixtureStore | None = None):
        if mode not in TOOL_MODES:
            raise ConfigError(f"unknown tool mode {mode!r}; expected one of {TOOL_MODES}")
        if mode in ("offline", "record") and fixtures is None:
            raise ConfigError(f"mode {mode!r} requires a fixture store")
        self.mode = mode
        self.fixtures = fixtures

    @property
    def name(self) -> str:
        return self.descriptor.name

    def _fetch_live(self, params: dict[str, Any]) -> dict[str, Any]:
        raise NotImplementedError

    def _render(self, params: dict[str, Any], response: dict[str, Any]) -> tuple[str, list[str]]:
        raise NotImplementedError

    def _resolve(self, params: dict[str, Any]) -> dict[str, Any]:
        """Fetch the raw response from fixtures or the wire, per mode."""
        key = fixture_key(self.name, params)
        if self.mode == "offline":
            record = self.fixtures.load(key)
            if record is None:
                raise FixtureMissError(
                    f"{self.name}: no fixture for cache key {key!r} "
                    f"(input {canonical_input(params)})"
                )
            return record["response"]
        response = self._fetch_live(params)
        if self.mode == "record":
            path = self.fixtures.save(key, {"input": params, "response": response})
            logger.info("recorded %s fixture at %s", self.name, path)
        return response

    def run(self, params: dict[str, Any]) -> ToolResult:
        started = time.monotonic()
        try:
            response = self._resolve(params)
            payload, citations = self._render(params, response)
        except FixtureMissError as exc:
            return ToolResult(
                tool_name=self.name,
                status="error",
                detail=str(exc),
                latency_ms=_elapsed_ms(started),
            )
        except TransportError as exc:
            detail = str(exc)
            if exc.attempts:
                detail += f" (after {exc.attempts} attempts)"
            return ToolResult(
                tool_name=self.name,
                status="error",
                detail=detail,
                latency_ms=_elapsed_ms(started),
            )
        return ToolResult(
            tool_name=self.name,
            status="ok",
            payload=payload,
            citations=citations,
            latency_ms=_elapsed_ms(started),
        )


def _elapsed_ms(started: float) -> int:
    return max(0, int((time.monotonic() - started) * 1000))


class ToolRegistry:
    """Name-keyed collection of tools; names must be unique."""

    def __init__(self):
        self._tools: dict[str, Any] = {}

    def register(self, tool) -> None:
        if tool.name in self._tools:
            raise ConfigError(f"tool {tool.name!r} already registered")
        self._tools[tool.name] = tool

    def get(self, name: str):
        if name not in self._tools:
            raise KeyError(f"no tool named {name!r}")
        return self._tools[name]

    def names(self) -> list[str]:
        return sorted(self._tools)

    def descriptors(self) -> list[ToolDescriptor]:
        return [self._tools[name].descriptor for name in self.names()]

    def __contains__(self, name: str) -> bool:
        return name in self._tools
