"""Phase two: the recursive control loop.

Each round the controller model reasons over the conversation plus the memory
bank and plans one or more primitive actions: answer, inspect a time range,
or search memory.  Results are consolidated back into a per-question overlay
bank (never the shared base) and appended to the history.  The loop always
terminates: an answer ends it immediately, and budget exhaustion triggers one
forced-finish completion.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from .backends.tools import (
    TOOL_FINISH,
    TOOL_MEMORY_SEARCH,
    TOOL_VIDEO_INSPECT,
    ToolCall,
    build_toolset,
)
from .errors import GapError, ToolArgumentError, TransportError, ValidationError
from .memory import MemoryBank, mem_manage, mem_search
from .perception import SOURCE_SEARCH, Observation, mm_inspect
from .prompts import NO_EVIDENCE_SENTINEL, PromptSet, build_control_prompt
from .timebase import Interval, hull, merge_intervals
from .timeline import StreamManifest

KIND_ANSWER = "answer"
KIND_INSPECT = "mm_inspect"
KIND_SEARCH = "mem_search"

BACKEND_FAILURE_ANSWER = "[backend failure]"
BUDGET_FALLBACK_ANSWER = "Unable to produce an answer within the step budget."

GUARD_CONSECUTIVE_SEARCH = 3


@dataclass(frozen=True)
class AgentAction:
    """One planned primitive with its kind-specific payload."""

    kind: str
    payload: dict

    def __post_init__(self) -> None:
        expected = {
            KIND_ANSWER: {"answer"},
            KIND_INSPECT: {"ranges", "question"},
            KIND_SEARCH: {"queries", "summarize_query", "top_k"},
        }
        if self.kind not in expected:
            raise ValidationError(f"unknown action kind {self.kind!r}")
        missing = expected[self.kind] - set(self.payload)
        if missing:
            raise ValidationError(f"{self.kind} payload missing {sorted(missing)}")


@dataclass(frozen=True)
class StepRecord:
    """One THINK -> ACT -> OBSERVE step."""

    step_index: int
    round_index: int
    reasoning_summary: str
    action: Optional[AgentAction]
    observation: str
    elapsed_s: float


@dataclass(frozen=True)
class AgentTrace:
    """Everything one question produced: steps, answer, and inspect coverage."""

    question: str
    steps: tuple[StepRecord, ...]
    final_answer: str
    rounds_used: int
    inspected_intervals: tuple[Interval, ...]
    failed: bool = False
    forced_finish: bool = False

    def __post_init__(self) -> None:
        if not self.final_answer:
            raise ValidationError("final_answer must be non-empty")


def enforce_guards(action_kinds: Sequence[str]) -> list[str]:
    """Constraint notices for the latest planned action given its history.

    The planned action is the final element.  A run of three consecutive
    memory searches is rejected; a second finish cannot occur because the
    first one terminates the loop.
    """
    notices: list[str] = []
    if len(action_kinds) >= GUARD_CONSECUTIVE_SEARCH and all(
        kind == KIND_SEARCH for kind in action_kinds[-GUARD_CONSECUTIVE_SEARCH:]
    ):
        notices.append(
            "Guard notice: memory_search_tool was about to run three times "
            "consecutively; choose a different action (inspect a concrete time "
            "range with video_inspect_tool, or finish)."
        )
    return notices


def extract_grounding(trace: AgentTrace) -> list[Interval]:
    """Union of all control-phase inspect ranges (overlap/adjacency merged)."""
    if not trace.inspected_intervals:
        return []
    return merge_intervals(trace.inspected_intervals)


@dataclass
class ControlRuntime:
    """The backends one control loop needs."""

    controller: object
    vision: object
    memory_llm: object
    embedder: object
    reranker: object
    prompts: PromptSet = field(default_factory=PromptSet)


def run_control_loop(
    question: str,
    manifest: StreamManifest,
    bank: MemoryBank,
    max_steps: int = 5,
    *,
    runtime: ControlRuntime,
    top_k: int = 5,
    clock: Callable[[], float] = time.monotonic,
) -> AgentTrace:
    """Answer one question with at most ``max_steps`` reasoning rounds.

    Bank mutations go to a per-question overlay; the base bank object is never
    touched.  Transport failure after retries yields a trace flagged failed
    with the failure placeholder answer.
    """
    if max_steps < 1:
        raise ValidationError(f"max_steps must be >= 1, got {max_steps}")
    if not question.strip():
        raise ValidationError("question must be non-empty")
    if not manifest.clips:
        raise ValidationError("manifest has no clips")

    total_span_ms = manifest.total_span_ms
    tools = build_toolset(total_span_ms)
    system_prompt = build_control_prompt(question, total_span_ms / 1000.0, runtime.prompts.control)
    messages: list[dict] = [{"role": "system", "content": system_prompt}]

    overlay = bank
    steps: list[StepRecord] = []
    inspected: list[Interval] = []
    kinds_history: list[str] = []
    step_index = 0
    rounds_used = 0

    def _record(round_index, reasoning, action, observation, elapsed) -> None:
        nonlocal step_index
        step_index += 1
        steps.append(
            StepRecord(
                step_index=step_index,
                round_index=round_index,
                reasoning_summary=reasoning,
                action=action,
                observation=observation,
                elapsed_s=elapsed,
            )
        )

    def _finish(answer: str, failed: bool = False, forced: bool = False) -> AgentTrace:
        return AgentTrace(
            question=question,
            steps=tuple(steps),
            final_answer=answer,
            rounds_used=rounds_used,
            inspected_intervals=tuple(inspected),
            failed=failed,
            forced_finish=forced,
        )

    for round_index in range(1, max_steps + 1):
        rounds_used = round_index
        started = clock()
        try:
            result = runtime.controller.complete_with_tools(messages, tools)
        except ToolArgumentError as exc:
            observation = f"Invalid tool arguments for {exc.tool_name or 'tool'}: {exc} (payload: {exc.raw_payload!r})"
            _record(round_index, "tool-call validation failed", None, observation, clock() - started)
            messages.append({"role": "user", "content": observation})
            continue
        except TransportError:
            _record(round_index, "controller backend unreachable", None, "transport failure", clock() - started)
            return _finish(BACKEND_FAILURE_ANSWER, failed=True)

        reasoning = _reasoning_summary(result.raw_message.get("content") or "")

        if result.is_final:
            answer = (result.text or "").strip() or BUDGET_FALLBACK_ANSWER
            action = AgentAction(kind=KIND_ANSWER, payload={"answer": answer})
            _record(round_index, reasoning, action, "terminal text answer", clock() - started)
            return _finish(answer)

        messages.append(result.raw_message)
        for call in result.calls:
            started_call = clock()
            try:
                outcome = _execute_call(
                    call,
                    question=question,
                    manifest=manifest,
                    overlay=overlay,
                    runtime=runtime,
                    kinds_history=kinds_history,
                    top_k=top_k,
                )
            except TransportError:
                _record(round_index, reasoning, None, "transport failure", clock() - started_call)
                return _finish(BACKEND_FAILURE_ANSWER, failed=True)
            overlay = outcome.overlay
            kinds_history.append(outcome.action.kind)
            inspected.extend(outcome.inspected)
            _record(round_index, reasoning, outcome.action, outcome.observation, clock() - started_call)
            messages.append(
                {
                    "role": "tool",
                    "tool_call_id": call.call_id,
                    "content": outcome.observation,
                }
            )
            if outcome.final_answer is not None:
                return _finish(outcome.final_answer)

    # Budget exhausted without an answer: one forced-finish completion.
    started = clock()
    messages.append({"role": "user", "content": runtime.prompts.forced_finish})
    try:
        result = runtime.controller.complete_with_tools(messages, ())
        answer = (result.text or "").strip() or BUDGET_FALLBACK_ANSWER
    except (TransportError, ToolArgumentError):
        _record(max_steps, "forced finish failed", None, "transport failure", clock() - started)
        return _finish(BACKEND_FAILURE_ANSWER, failed=True, forced=True)
    action = AgentAction(kind=KIND_ANSWER, payload={"answer": answer})
    _record(max_steps, "forced finish after budget exhaustion", action, "forced best-effort answer", clock() - started)
    return _finish(answer, forced=True)


@dataclass(frozen=True)
class _CallOutcome:
    action: AgentAction
    observation: str
    overlay: MemoryBank
    inspected: tuple[Interval, ...] = ()
    final_answer: Optional[str] = None


def _execute_call(
    call: ToolCall,
    *,
    question: str,
    manifest: StreamManifest,
    overlay: MemoryBank,
    runtime: ControlRuntime,
    kinds_history: Sequence[str],
    top_k: int,
) -> _CallOutcome:
    canonical = call.canonical
    if call.name == TOOL_FINISH:
        action = AgentAction(kind=KIND_ANSWER, payload={"answer": canonical["answer"]})
        return _CallOutcome(action, "final answer emitted", overlay, final_answer=canonical["answer"])

    if call.name == TOOL_MEMORY_SEARCH:
        action = AgentAction(
            kind=KIND_SEARCH,
            payload={
                "queries": canonical["queries"],
                "summarize_query": canonical["summarize_query"] or question,
                "top_k": canonical["top_k"] or top_k,
            },
        )
        notices = enforce_guards(list(kinds_history) + [KIND_SEARCH])
        if notices:
            return _CallOutcome(action, " ".join(notices), overlay)
        result = mem_search(
            overlay,
            action.payload["queries"],
            action.payload["summarize_query"],
            action.payload["top_k"],
            embedder=runtime.embedder,
            reranker=runtime.reranker,
            memory_llm=runtime.memory_llm,
        )
        lines = [result.summary]
        if result.evidence:
            lines.append("[Video Evidence]")
            lines.extend(f"From {iv.start} to {iv.end}: {text}" for iv, text in result.evidence)
        observation = "\n".join(lines)
        if result.evidence:
            feedback = Observation(
                interval=hull([iv for iv, _ in result.evidence]),
                text=observation,
                source=SOURCE_SEARCH,
                question=question,
            )
            overlay = mem_manage(overlay, feedback, memory_llm=runtime.memory_llm, embedder=runtime.embedder)
        return _CallOutcome(action, observation, overlay)

    if call.name == TOOL_VIDEO_INSPECT:
        ranges = canonical["ranges"]
        q = canonical["question"] or question
        action = AgentAction(kind=KIND_INSPECT, payload={"ranges": ranges, "question": q})
        gap_note = ""
        try:
            observations = mm_inspect(manifest, ranges, q, vision=runtime.vision)
        except GapError as exc:
            observations = exc.observations
            gap_note = f"Note: {exc}"
        parts = []
        for obs in observations:
            body = obs.text if obs.text.strip() else NO_EVIDENCE_SENTINEL
            parts.append(f"{obs.interval}: {body}")
        if gap_note:
            parts.append(gap_note)
        observation = "\n".join(parts) if parts else "No observations produced."
        for obs in sorted(observations, key=lambda o: o.interval.start.millis):
            if obs.text.strip():
                overlay = mem_manage(overlay, obs, memory_llm=runtime.memory_llm, embedder=runtime.embedder)
        return _CallOutcome(action, observation, overlay, inspected=tuple(ranges))

    raise ToolArgumentError(f"unknown tool {call.name!r}", call.name, call.arguments)


def _reasoning_summary(content: str) -> str:
    """The [REASONING] section when present, else a trimmed prefix."""
    if "[REASONING]" in content:
        body = content.split("[REASONING]", 1)[1]
        for stop in ("[ACTION]", "[OBSERVATION]"):
            if stop in body:
                body = body.split(stop, 1)[0]
        return body.strip()
    return content.strip()[:300]


def write_trace(trace: AgentTrace, path: Union[str, Path]) -> None:
    """Trace log: one step record per JSONL line plus a terminal summary."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for step in trace.steps:
            action = None
            if step.action is not None:
                action = {"kind": step.action.kind, "payload": _payload_json(step.action.payload)}
            fh.write(
                json.dumps(
                    {
                        "type": "step",
                        "step_index": step.step_index,
                        "round": step.round_index,
                        "reasoning": step.reasoning_summary,
                        "action": action,
                        "observation": step.observation,
                        "elapsed_s": round(step.elapsed_s, 6),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        fh.write(
            json.dumps(
                {
                    "type": "final",
                    "question": trace.question,
                    "final_answer": trace.final_answer,
                    "rounds_used": trace.rounds_used,
                    "inspected_intervals": [
                        [iv.start.seconds, iv.end.seconds] for iv in trace.inspected_intervals
                    ],
                    "failed": trace.failed,
                    "forced_finish": trace.forced_finish,
                },
                sort_keys=True,
            )
            + "\n"
        )


def _payload_json(payload: dict) -> dict:
    out = {}
    for key, value in payload.items():
        if isinstance(value, (list, tuple)):
            out[key] = [
                [v.start.seconds, v.end.seconds] if isinstance(v, Interval) else v for v in value
            ]
        else:
            out[key] = value
    return out
