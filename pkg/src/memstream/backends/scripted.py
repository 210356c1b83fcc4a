"""Deterministic scripted backends for desk-scale runs and tests.

These doubles satisfy the same interfaces as the HTTP clients but read a
planted ground-truth event map instead of calling remote models.  They are
pure: identical inputs always produce byte-identical outputs, so whole-pipeline
runs are replayable and file digests are stable.
"""
from __future__ import annotations

import json
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import ValidationError
from ..prompts import NO_EVIDENCE_SENTINEL
from ..timebase import Interval, format_hms
from .tools import (
    TOOL_FINISH,
    TOOL_MEMORY_SEARCH,
    TOOL_VIDEO_INSPECT,
    CompletionResult,
    ToolCall,
    ToolSchema,
    validate_tool_call,
)

# Words with no retrieval value; keeps scripted matching on content terms.
STOPWORDS = frozenset(
    """a an and answer are at by chronological description did do does event events every
    exact for happens how in involving is it list of on or order that the this to was
    what when where which who window with""".split()
)

_EVENT_LINE_RE = re.compile(
    r"\[(\d{2,}):(\d{2}):(\d{2})\]-\[(\d{2,}):(\d{2}):(\d{2})\]\s*(.*?)\.?\s*$"
)
_QUOTED_RE = re.compile(r"'([^']+)'")


def content_tokens(text: str) -> list[str]:
    words = (w.strip("'") for w in re.findall(r"[a-z0-9']+", text.lower()))
    return [w for w in words if w and w not in STOPWORDS]


EventMap = Sequence[tuple[Interval, str]]


def load_event_map(path) -> tuple[tuple[Interval, str], ...]:
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    return tuple(
        (Interval.from_millis(int(r["start_ms"]), int(r["end_ms"])), str(r["phrase"])) for r in rows
    )


def save_event_map(events: EventMap, path) -> None:
    rows = [
        {"start_ms": iv.start.millis, "end_ms": iv.end.millis, "phrase": phrase}
        for iv, phrase in events
    ]
    Path(path).write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")


class ScriptedVision:
    """Vision double that 'sees' a planted ground-truth event map.

    Captions render each overlapping event clamped to the described interval,
    with paired clip-relative anchors: ``[HH:MM:SS]-[HH:MM:SS] phrase.``
    ``max_anchors`` bounds anchor *tokens* per caption, so at two per event
    line the default keeps at most five events.
    """

    def __init__(self, events: EventMap, max_anchors: int = 10):
        self.events = tuple(sorted(events, key=lambda item: item[0].start.millis))
        self.max_anchors = max_anchors

    def describe_clip(
        self,
        frames_ref: str,
        interval: Interval,
        question: Optional[str] = None,
        media_origin_ms: int = 0,
    ) -> str:
        visible = []
        for iv, phrase in self.events:
            piece = iv.intersect(interval)
            if piece is not None:
                visible.append((piece, phrase))
        if question is not None:
            wanted = set(content_tokens(question))
            visible = [
                (piece, phrase)
                for piece, phrase in visible
                if wanted & set(content_tokens(phrase))
            ]
            if not visible:
                return NO_EVIDENCE_SENTINEL
        elif not visible:
            return "No notable events in this window."
        lines = []
        for piece, phrase in visible[: max(1, self.max_anchors // 2)]:
            rel_start = (piece.start.millis - interval.start.millis) // 1000
            rel_end = (piece.end.millis - interval.start.millis) // 1000
            lines.append(f"[{format_hms(rel_start)}]-[{format_hms(rel_end)}] {phrase}.")
        return "\n".join(lines)


class ScriptedEmbedder:
    """Deterministic hashed bag-of-words embedding.

    ``pinned`` maps exact texts to unit basis vectors, which is convenient for
    tests that need a known geometry.
    """

    def __init__(self, dim: int = 64, pinned: Optional[dict[str, int]] = None):
        if dim <= 0:
            raise ValidationError("embedding dim must be positive")
        self.dim = dim
        self.pinned = dict(pinned or {})

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        texts = list(texts)
        if not texts:
            raise ValidationError("embed requires at least one text")
        vectors = []
        for text in texts:
            if not str(text).strip():
                raise ValidationError("empty text")
            if text in self.pinned:
                vec = np.zeros(self.dim, dtype=np.float32)
                vec[self.pinned[text] % self.dim] = 1.0
                vectors.append(vec)
                continue
            vec = np.zeros(self.dim, dtype=np.float32)
            for token in re.findall(r"[a-z0-9']+", str(text).lower()):
                vec[zlib.crc32(token.encode("utf-8")) % self.dim] += 1.0
            norm = float(np.linalg.norm(vec))
            if norm > 0:
                vec /= norm
            vectors.append(vec.astype(np.float32))
        return vectors


class ScriptedMemoryLLM:
    """Summarization double: merge by line-dedup, filter by token overlap."""

    def merge(self, texts: Sequence[str]) -> str:
        seen = set()
        lines = []
        for text in texts:
            for line in str(text).splitlines():
                line = line.strip()
                if line and line not in seen:
                    seen.add(line)
                    lines.append(line)
        return "\n".join(lines)

    def filter_summary(self, query: str, summarize_query: str, text: str) -> str:
        wanted = set(content_tokens(summarize_query or query))
        if not wanted:
            return text.strip()
        kept = []
        for line in text.splitlines():
            if wanted & set(content_tokens(line)):
                kept.append(line.strip())
        return "\n".join(dict.fromkeys(kept))

    def global_summary(self, summarize_query: str, text: str) -> str:
        return text.strip()


class ScriptedReranker:
    """Rerank double: verbatim token matches first, then retrieval order."""

    def rerank(self, query: str, candidates: Sequence[tuple[str, str]], k: int) -> list[int]:
        wanted = content_tokens(query)
        matched = [
            i
            for i, (_, text) in enumerate(candidates)
            if any(tok in text.lower() for tok in wanted)
        ]
        rest = [i for i in range(len(candidates)) if i not in set(matched)]
        return (matched + rest)[:k]


class ScriptedJudge:
    """Judge double: splits the ground truth on ';' and checks containment."""

    def complete(self, messages: Sequence[dict], temperature: Optional[float] = None) -> str:
        prompt = messages[-1]["content"]
        gt = _between(prompt, "Ground truth answer: ", "\nCandidate answer:")
        cand = _between(prompt, "Candidate answer: ", "\nYour response:")
        parts = [p.strip() for p in gt.split(";") if p.strip()]
        hits = sum(1 for p in parts if p.lower() in cand.lower())
        if parts and hits == len(parts):
            score = 5
        elif hits >= 1:
            score = 2
        else:
            score = 0
        return f"Analysis:\nMatched {hits} of {len(parts)} required items.\n\nFinal Score:\n{score}"


def _between(text: str, start: str, end: str) -> str:
    i = text.find(start)
    if i < 0:
        return ""
    j = text.find(end, i + len(start))
    if j < 0:
        j = len(text)
    return text[i + len(start) : j].strip()


@dataclass
class ScriptedController:
    """Canned controller: replays a fixed list of steps.

    Each step is either a final-answer string or a list of ``(tool_name,
    arguments)`` pairs.  With ``cycle`` the last step repeats forever, which
    models a controller that never finishes.  An empty toolset (the forced
    finish path) always yields ``forced_answer``.
    """

    steps: Sequence[Union[str, Sequence[tuple[str, dict]]]]
    cycle: bool = False
    forced_answer: str = "Best effort: the budget ran out before a grounded answer was found."
    _cursor: int = field(default=0, repr=False)

    def complete_with_tools(self, messages: Sequence[dict], tools: Sequence[ToolSchema]) -> CompletionResult:
        if not tools:
            return CompletionResult(text=self.forced_answer, raw_message={"role": "assistant", "content": self.forced_answer})
        if self._cursor >= len(self.steps):
            if self.cycle and self.steps:
                step = self.steps[-1]
            else:
                step = "No further scripted steps."
        else:
            step = self.steps[self._cursor]
        self._cursor += 1
        return _emit(step, messages, tools, reasoning=f"scripted step {self._cursor}")


class OracleController:
    """Rule-based controller that solves planted questions honestly.

    It never peeks at ground truth: round one searches memory for the quoted
    markers in the question, round two inspects exactly the evidence ranges the
    search surfaced, and the final round answers with the phrases observed
    during inspection, in chronological order.
    """

    def __init__(self, top_k: int = 5):
        self.top_k = top_k

    def complete_with_tools(self, messages: Sequence[dict], tools: Sequence[ToolSchema]) -> CompletionResult:
        if not tools:
            return CompletionResult(
                text="Best effort: no grounded answer found.",
                raw_message={"role": "assistant", "content": "forced finish"},
            )
        question = _question_of(messages)
        markers = _QUOTED_RE.findall(question) or [question]
        searched = _called(messages, TOOL_MEMORY_SEARCH)
        inspected = _called(messages, TOOL_VIDEO_INSPECT)
        if not searched:
            args = {"queries": markers, "summarize_query": question, "top_k": self.top_k}
            return _emit([(TOOL_MEMORY_SEARCH, args)], messages, tools, reasoning="search memory for the quoted markers")
        if not inspected:
            ranges = _marker_ranges(_last_tool_content(messages), markers)
            if not ranges:
                return _emit([(TOOL_FINISH, {"answer": "No relevant events found."})], messages, tools, reasoning="nothing retrieved")
            args = {"time_ranges": [[a, b] for a, b in ranges], "question": question}
            return _emit([(TOOL_VIDEO_INSPECT, args)], messages, tools, reasoning="verify retrieved ranges")
        phrases = _marker_phrases(_last_tool_content(messages), markers)
        answer = "; ".join(phrases) if phrases else "No relevant events found."
        return _emit([(TOOL_FINISH, {"answer": answer})], messages, tools, reasoning="answer from inspected evidence")


class BlindController:
    """Ablated controller: memory search disabled, inspects one leading window.

    Without retrieval it has no idea where evidence lives, so it can only look
    at the start of the stream; anything planted later is invisible to it.
    """

    def __init__(self, probe_s: float = 300.0):
        self.probe_s = probe_s

    def complete_with_tools(self, messages: Sequence[dict], tools: Sequence[ToolSchema]) -> CompletionResult:
        if not tools:
            return CompletionResult(
                text="Best effort: no grounded answer found.",
                raw_message={"role": "assistant", "content": "forced finish"},
            )
        question = _question_of(messages)
        markers = _QUOTED_RE.findall(question) or [question]
        if not _called(messages, TOOL_VIDEO_INSPECT):
            span_s = tools[0].total_span_ms / 1000.0
            args = {"time_ranges": [[0, min(self.probe_s, span_s)]], "question": question}
            return _emit([(TOOL_VIDEO_INSPECT, args)], messages, tools, reasoning="probe the stream head")
        phrases = _marker_phrases(_last_tool_content(messages), markers)
        answer = "; ".join(phrases) if phrases else "No relevant events found."
        return _emit([(TOOL_FINISH, {"answer": answer})], messages, tools, reasoning="answer from the probe")


def _emit(
    step: Union[str, Sequence[tuple[str, dict]]],
    messages: Sequence[dict],
    tools: Sequence[ToolSchema],
    reasoning: str,
) -> CompletionResult:
    if isinstance(step, str):
        return CompletionResult(text=step, raw_message={"role": "assistant", "content": step})
    calls = []
    raw_calls = []
    for idx, (name, arguments) in enumerate(step):
        call_id = f"call-{len(messages)}-{idx}"
        call = validate_tool_call(ToolCall(name=name, arguments=dict(arguments), call_id=call_id), tools)
        calls.append(call)
        raw_calls.append(
            {
                "id": call_id,
                "type": "function",
                "function": {"name": name, "arguments": json.dumps(arguments)},
            }
        )
    raw_message = {
        "role": "assistant",
        "content": f"[REASONING]\n{reasoning}\n[ACTION]\ncalling {', '.join(c.name for c in calls)}",
        "tool_calls": raw_calls,
    }
    return CompletionResult(calls=tuple(calls), raw_message=raw_message)


def _question_of(messages: Sequence[dict]) -> str:
    for message in messages:
        content = message.get("content") or ""
        if isinstance(content, str) and "Question: " in content:
            return content.rsplit("Question: ", 1)[1].strip()
    return ""


def _called(messages: Sequence[dict], tool_name: str) -> bool:
    for message in messages:
        for raw in message.get("tool_calls") or []:
            if raw.get("function", {}).get("name") == tool_name:
                return True
    return False


def _last_tool_content(messages: Sequence[dict]) -> str:
    for message in reversed(list(messages)):
        if message.get("role") == "tool":
            return str(message.get("content") or "")
    return ""


def _event_lines(text: str) -> list[tuple[str, str, str]]:
    """(start, end, phrase) triples from ``[a]-[b] phrase.`` lines."""
    out = []
    for line in text.splitlines():
        m = _EVENT_LINE_RE.search(line.strip())
        if m:
            start = f"{m.group(1)}:{m.group(2)}:{m.group(3)}"
            end = f"{m.group(4)}:{m.group(5)}:{m.group(6)}"
            out.append((start, end, m.group(7).strip()))
    return out


def _marker_ranges(text: str, markers: Sequence[str]) -> list[tuple[str, str]]:
    wanted = [m.lower() for m in markers]
    ranges = []
    for start, end, phrase in _event_lines(text):
        if any(m in phrase.lower() for m in wanted) and (start, end) not in ranges:
            ranges.append((start, end))
    return ranges


def _hms_seconds(stamp: str) -> int:
    hours, minutes, seconds = (int(part) for part in stamp.split(":"))
    return hours * 3600 + minutes * 60 + seconds


def _marker_phrases(text: str, markers: Sequence[str]) -> list[str]:
    wanted = [m.lower() for m in markers]
    entries = []
    for start, end, phrase in _event_lines(text):
        if any(m in phrase.lower() for m in wanted):
            entries.append((_hms_seconds(start), phrase))
    entries.sort(key=lambda item: item[0])
    return list(dict.fromkeys(phrase for _, phrase in entries))
