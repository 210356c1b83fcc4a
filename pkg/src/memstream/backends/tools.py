"""Tool schemas exposed to the controller model, and tool-call validation.

Exactly three tools exist on the controller's wire: memory retrieval, video
inspection of explicit time ranges, and finish.  Arguments arriving from the
model are untrusted; validation happens before any dispatch and failures
carry the raw payload so the caller can decide how to recover.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from ..errors import ToolArgumentError, ValidationError
from ..timebase import Interval, TimePoint, parse_timestamp

TOOL_MEMORY_SEARCH = "memory_search_tool"
TOOL_VIDEO_INSPECT = "video_inspect_tool"
TOOL_FINISH = "finish"

TOOL_NAMES = (TOOL_MEMORY_SEARCH, TOOL_VIDEO_INSPECT, TOOL_FINISH)


@dataclass(frozen=True)
class ToolSchema:
    """One callable tool: wire-format parameter schema plus a validator bound
    to the stream's total span."""

    name: str
    description: str
    parameters: dict
    total_span_ms: int

    def as_openai(self) -> dict:
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            },
        }

    def validate(self, arguments: dict) -> dict:
        """Canonicalize raw arguments; raises ToolArgumentError when malformed."""
        if not isinstance(arguments, dict):
            raise ToolArgumentError(
                f"{self.name}: arguments must be an object", self.name, arguments
            )
        try:
            if self.name == TOOL_MEMORY_SEARCH:
                return _validate_search(arguments)
            if self.name == TOOL_VIDEO_INSPECT:
                return _validate_inspect(arguments, self.total_span_ms)
            if self.name == TOOL_FINISH:
                return _validate_finish(arguments)
        except ToolArgumentError:
            raise
        except (ValidationError, ValueError, TypeError, KeyError) as exc:
            raise ToolArgumentError(f"{self.name}: {exc}", self.name, arguments) from exc
        raise ToolArgumentError(f"unknown tool {self.name!r}", self.name, arguments)


@dataclass(frozen=True)
class ToolCall:
    """One structured tool invocation emitted by the controller model."""

    name: str
    arguments: dict
    call_id: str = ""
    canonical: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class CompletionResult:
    """Outcome of one controller completion: tool calls, or terminal text."""

    text: Optional[str] = None
    calls: tuple[ToolCall, ...] = ()
    raw_message: dict = field(default_factory=dict, compare=False)

    @property
    def is_final(self) -> bool:
        return not self.calls


def build_toolset(total_span_ms: int) -> tuple[ToolSchema, ...]:
    """The three controller tools, with inspect ranges bounded by the span."""
    if total_span_ms <= 0:
        raise ValidationError(f"total span must be positive, got {total_span_ms}")
    range_schema = {
        "type": "array",
        "items": {"type": "string"},
        "minItems": 2,
        "maxItems": 2,
        "description": "[start, end] pair, each 'HH:MM:SS' (hours may exceed 24) or seconds",
    }
    return (
        ToolSchema(
            name=TOOL_MEMORY_SEARCH,
            description=(
                "Retrieve high-level, previously observed information about the "
                "video from the memory bank, without specifying timestamps."
            ),
            parameters={
                "type": "object",
                "properties": {
                    "query": {"type": "string", "description": "retrieval query"},
                    "queries": {"type": "array", "items": {"type": "string"}},
                    "summarize_query": {"type": "string"},
                    "top_k": {"type": "integer", "minimum": 1},
                },
            },
            total_span_ms=total_span_ms,
        ),
        ToolSchema(
            name=TOOL_VIDEO_INSPECT,
            description="Inspect the video within explicit time ranges in more detail.",
            parameters={
                "type": "object",
                "properties": {
                    "time_ranges": {"type": "array", "items": range_schema},
                    "question": {"type": "string"},
                },
                "required": ["time_ranges"],
            },
            total_span_ms=total_span_ms,
        ),
        ToolSchema(
            name=TOOL_FINISH,
            description="Terminate and output the final answer.",
            parameters={
                "type": "object",
                "properties": {"answer": {"type": "string"}},
                "required": ["answer"],
            },
            total_span_ms=total_span_ms,
        ),
    )


def validate_tool_call(call: ToolCall, tools: Sequence[ToolSchema]) -> ToolCall:
    """Return the call with canonical arguments attached, or raise."""
    by_name = {schema.name: schema for schema in tools}
    schema = by_name.get(call.name)
    if schema is None:
        raise ToolArgumentError(
            f"unknown tool {call.name!r}; available: {sorted(by_name)}", call.name, call.arguments
        )
    canonical = schema.validate(call.arguments)
    return ToolCall(name=call.name, arguments=call.arguments, call_id=call.call_id, canonical=canonical)


def _validate_search(arguments: dict) -> dict:
    queries: list[str] = []
    if "queries" in arguments:
        raw = arguments["queries"]
        if not isinstance(raw, (list, tuple)):
            raise ToolArgumentError("queries must be a list", TOOL_MEMORY_SEARCH, arguments)
        queries.extend(str(q) for q in raw)
    if "query" in arguments:
        queries.append(str(arguments["query"]))
    queries = [q.strip() for q in queries if str(q).strip()]
    if not queries:
        raise ToolArgumentError("memory search needs a non-empty query", TOOL_MEMORY_SEARCH, arguments)
    top_k = arguments.get("top_k", None)
    if top_k is not None:
        top_k = int(top_k)
        if top_k < 1:
            raise ToolArgumentError("top_k must be >= 1", TOOL_MEMORY_SEARCH, arguments)
    summarize_query = arguments.get("summarize_query")
    if summarize_query is not None:
        summarize_query = str(summarize_query)
    return {"queries": queries, "top_k": top_k, "summarize_query": summarize_query}


def _parse_point(value: Any) -> int:
    """One range endpoint: 'HH:MM:SS' text or bare seconds."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value < 0:
            raise ValidationError(f"negative time {value}")
        return round(float(value) * 1000)
    stamp = parse_timestamp(str(value))
    if stamp.absolute:
        raise ValidationError(f"absolute timestamp not allowed in tool call: {value!r}")
    return stamp.millis


def _validate_inspect(arguments: dict, total_span_ms: int) -> dict:
    raw_ranges = arguments.get("time_ranges")
    if not isinstance(raw_ranges, (list, tuple)) or not raw_ranges:
        raise ToolArgumentError("time_ranges must be a non-empty list", TOOL_VIDEO_INSPECT, arguments)
    ranges: list[Interval] = []
    for pair in raw_ranges:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ToolArgumentError(f"range must be a [start, end] pair: {pair!r}", TOOL_VIDEO_INSPECT, arguments)
        start_ms = _parse_point(pair[0])
        end_ms = _parse_point(pair[1])
        if start_ms >= end_ms:
            raise ToolArgumentError(
                f"range end must follow start: {pair!r}", TOOL_VIDEO_INSPECT, arguments
            )
        if end_ms > total_span_ms:
            raise ToolArgumentError(
                f"range {pair!r} exceeds the stream span of {total_span_ms / 1000:.0f}s",
                TOOL_VIDEO_INSPECT,
                arguments,
            )
        ranges.append(Interval(TimePoint(start_ms), TimePoint(end_ms)))
    question = arguments.get("question")
    if question is not None:
        question = str(question)
    return {"ranges": ranges, "question": question}


def _validate_finish(arguments: dict) -> dict:
    answer = str(arguments.get("answer", "")).strip()
    if not answer:
        raise ToolArgumentError("finish requires a non-empty answer", TOOL_FINISH, arguments)
    return {"answer": answer}
