from __future__ import annotations

import pytest

from memstream.backends import (
    BlindController,
    OracleController,
    ScriptedController,
    ScriptedEmbedder,
    ScriptedVision,
    build_toolset,
)
from memstream.backends.tools import (
    TOOL_FINISH,
    TOOL_MEMORY_SEARCH,
    TOOL_VIDEO_INSPECT,
    ToolCall,
    validate_tool_call,
)
from memstream.errors import ToolArgumentError, ValidationError
from memstream.prompts import NO_EVIDENCE_SENTINEL, build_control_prompt

from conftest import iv

TOOLS = build_toolset(total_span_ms=3_600_000)


# ---------------------------------------------------------------------------
# tool schemas and validation


def test_toolset_exposes_exactly_three_tools():
    assert [t.name for t in TOOLS] == [TOOL_MEMORY_SEARCH, TOOL_VIDEO_INSPECT, TOOL_FINISH]


def test_inspect_validation_parses_hms_and_seconds():
    call = ToolCall(TOOL_VIDEO_INSPECT, {"time_ranges": [["00:02:00", "00:02:10"], [30, 40.5]]})
    out = validate_tool_call(call, TOOLS)
    assert out.canonical["ranges"] == [iv(120, 130), iv(30, 40.5)]


def test_inspect_rejects_reversed_range():
    call = ToolCall(TOOL_VIDEO_INSPECT, {"time_ranges": [["00:10:00", "00:05:00"]]})
    with pytest.raises(ToolArgumentError) as excinfo:
        validate_tool_call(call, TOOLS)
    assert excinfo.value.raw_payload == {"time_ranges": [["00:10:00", "00:05:00"]]}


def test_inspect_rejects_range_beyond_span():
    call = ToolCall(TOOL_VIDEO_INSPECT, {"time_ranges": [[0, 3601]]})
    with pytest.raises(ToolArgumentError, match="span"):
        validate_tool_call(call, TOOLS)


def test_inspect_rejects_negative_and_missing_ranges():
    with pytest.raises(ToolArgumentError):
        validate_tool_call(ToolCall(TOOL_VIDEO_INSPECT, {"time_ranges": [[-5, 10]]}), TOOLS)
    with pytest.raises(ToolArgumentError):
        validate_tool_call(ToolCall(TOOL_VIDEO_INSPECT, {}), TOOLS)


def test_search_validation_normalizes_queries():
    call = ToolCall(TOOL_MEMORY_SEARCH, {"query": " kite ", "queries": ["lantern"], "top_k": 3})
    out = validate_tool_call(call, TOOLS)
    assert out.canonical == {"queries": ["lantern", "kite"], "top_k": 3, "summarize_query": None}


def test_search_rejects_empty_query():
    with pytest.raises(ToolArgumentError):
        validate_tool_call(ToolCall(TOOL_MEMORY_SEARCH, {"query": "  "}), TOOLS)


def test_finish_requires_answer():
    with pytest.raises(ToolArgumentError):
        validate_tool_call(ToolCall(TOOL_FINISH, {}), TOOLS)


def test_unknown_tool_rejected():
    with pytest.raises(ToolArgumentError, match="unknown tool"):
        validate_tool_call(ToolCall("rm_rf_tool", {}), TOOLS)


def test_toolset_requires_positive_span():
    with pytest.raises(ValidationError):
        build_toolset(0)


# ---------------------------------------------------------------------------
# scripted vision


EVENTS = [
    (iv(120, 130), "the amber kite is unveiled near the stage"),
    (iv(400, 420), "the silver falcon is packed into a crate"),
]


def test_scripted_vision_passive_renders_relative_paired_anchors():
    vision = ScriptedVision(EVENTS)
    text = vision.describe_clip("uri", iv(0, 300))
    assert text == "[00:02:00]-[00:02:10] the amber kite is unveiled near the stage."


def test_scripted_vision_clamps_events_to_window():
    vision = ScriptedVision([(iv(295, 305), "the cobalt lantern tips over by the doorway")])
    first = vision.describe_clip("uri", iv(0, 300))
    second = vision.describe_clip("uri", iv(300, 600))
    assert first.startswith("[00:04:55]-[00:05:00]")
    assert second.startswith("[00:00:00]-[00:00:05]")


def test_scripted_vision_query_mode_filters_and_sentinels():
    vision = ScriptedVision(EVENTS)
    hit = vision.describe_clip("uri", iv(0, 300), "where is the 'amber kite'?")
    assert "amber kite" in hit
    miss = vision.describe_clip("uri", iv(0, 300), "any 'silver falcon' here?")
    assert miss == NO_EVIDENCE_SENTINEL


def test_scripted_vision_caps_total_anchor_tokens():
    from memstream.perception import ANCHOR_RE

    events = [(iv(10 * i, 10 * i + 5), f"filler event number {i} occurs") for i in range(15)]
    vision = ScriptedVision(events, max_anchors=10)
    text = vision.describe_clip("uri", iv(0, 300))
    assert len(ANCHOR_RE.findall(text)) <= 10
    assert len(text.splitlines()) == 5


def test_scripted_vision_determinism():
    vision = ScriptedVision(EVENTS)
    assert vision.describe_clip("uri", iv(0, 300)) == vision.describe_clip("uri", iv(0, 300))


# ---------------------------------------------------------------------------
# scripted controllers


def _messages(question: str) -> list[dict]:
    return [{"role": "system", "content": build_control_prompt(question, 3600)}]


def test_scripted_controller_replays_and_validates():
    controller = ScriptedController(steps=[[(TOOL_MEMORY_SEARCH, {"query": "kite"})], "done"])
    first = controller.complete_with_tools(_messages("q?"), TOOLS)
    assert first.calls[0].name == TOOL_MEMORY_SEARCH
    second = controller.complete_with_tools(_messages("q?"), TOOLS)
    assert second.text == "done"


def test_scripted_controller_bad_args_raise_through_validation():
    controller = ScriptedController(steps=[[(TOOL_VIDEO_INSPECT, {"time_ranges": [[10, 5]]})]])
    with pytest.raises(ToolArgumentError):
        controller.complete_with_tools(_messages("q?"), TOOLS)


def test_scripted_controller_forced_finish_on_empty_toolset():
    controller = ScriptedController(steps=[], forced_answer="fallback")
    result = controller.complete_with_tools(_messages("q?"), ())
    assert result.text == "fallback"


def test_oracle_controller_first_action_is_memory_search():
    oracle = OracleController()
    result = oracle.complete_with_tools(_messages("What happens involving 'amber kite'?"), TOOLS)
    assert len(result.calls) == 1
    assert result.calls[0].name == TOOL_MEMORY_SEARCH
    assert result.calls[0].canonical["queries"] == ["amber kite"]


def test_oracle_controller_inspects_evidence_ranges_then_answers():
    oracle = OracleController()
    messages = _messages("What happens involving 'amber kite'?")
    r1 = oracle.complete_with_tools(messages, TOOLS)
    messages.append(r1.raw_message)
    messages.append(
        {
            "role": "tool",
            "tool_call_id": r1.calls[0].call_id,
            "content": "From 00:00:00 to 00:05:00: [00:02:00]-[00:02:10] the amber kite is unveiled near the stage.",
        }
    )
    r2 = oracle.complete_with_tools(messages, TOOLS)
    assert r2.calls[0].name == TOOL_VIDEO_INSPECT
    assert r2.calls[0].canonical["ranges"] == [iv(120, 130)]
    messages.append(r2.raw_message)
    messages.append(
        {
            "role": "tool",
            "tool_call_id": r2.calls[0].call_id,
            "content": "[00:02:00, 00:02:10): [00:02:00]-[00:02:10] the amber kite is unveiled near the stage.",
        }
    )
    r3 = oracle.complete_with_tools(messages, TOOLS)
    assert r3.calls[0].name == TOOL_FINISH
    assert r3.calls[0].canonical["answer"] == "the amber kite is unveiled near the stage"


def test_oracle_controller_unquoted_question_falls_back_to_full_text():
    oracle = OracleController()
    result = oracle.complete_with_tools(_messages("Where did the amber kite end up?"), TOOLS)
    assert result.calls[0].name == TOOL_MEMORY_SEARCH
    assert result.calls[0].canonical["queries"] == ["Where did the amber kite end up?"]


def test_blind_controller_never_searches_memory():
    blind = BlindController()
    messages = _messages("What happens involving 'amber kite'?")
    r1 = blind.complete_with_tools(messages, TOOLS)
    assert r1.calls[0].name == TOOL_VIDEO_INSPECT
    messages.append(r1.raw_message)
    messages.append({"role": "tool", "tool_call_id": r1.calls[0].call_id, "content": NO_EVIDENCE_SENTINEL})
    r2 = blind.complete_with_tools(messages, TOOLS)
    assert r2.calls[0].name == TOOL_FINISH
    assert r2.calls[0].canonical["answer"] == "No relevant events found."


# ---------------------------------------------------------------------------
# scripted embedder edge


def test_embedder_dim_and_types():
    embedder = ScriptedEmbedder(dim=16)
    vecs = embedder.embed(["alpha beta", "gamma"])
    assert all(v.shape == (16,) for v in vecs)
    assert all(str(v.dtype) == "float32" for v in vecs)
