"""Contract tests against a local stub server speaking the chat/embeddings schema."""
from __future__ import annotations

import json
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from memstream.backends import (
    BackendConfig,
    OpenAIChatClient,
    OpenAIEmbeddingClient,
    OpenAIVisionClient,
    build_toolset,
)
from memstream.backends.tools import TOOL_VIDEO_INSPECT
from memstream.errors import ToolArgumentError, TransportError, ValidationError
from memstream.evaluation import judge_answer

from conftest import iv

TOOLS = build_toolset(total_span_ms=3_600_000)


class _StubState:
    def __init__(self):
        self.behaviors = deque()
        self.requests: list[dict] = []
        self.lock = threading.Lock()

    def push(self, *behaviors):
        self.behaviors.extend(behaviors)

    def pop(self):
        with self.lock:
            if self.behaviors:
                return self.behaviors.popleft()
        return ("text", "default stub reply")


def _chat_body(content=None, tool_calls=None):
    message = {"role": "assistant", "content": content}
    if tool_calls:
        message["tool_calls"] = tool_calls
    return {"choices": [{"message": message}]}


class _Handler(BaseHTTPRequestHandler):
    state: _StubState

    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        self.state.requests.append(
            {"path": self.path, "body": body, "auth": self.headers.get("Authorization")}
        )
        behavior = self.state.pop()
        kind = behavior[0]
        if kind == "status":
            self.send_response(behavior[1])
            self.end_headers()
            self.wfile.write(b"server error")
            return
        if kind == "raw":
            payload = behavior[1].encode()
        elif kind == "text":
            payload = json.dumps(_chat_body(content=behavior[1])).encode()
        elif kind == "tool_call":
            name, arguments = behavior[1], behavior[2]
            payload = json.dumps(
                _chat_body(
                    tool_calls=[
                        {
                            "id": "call-1",
                            "type": "function",
                            "function": {"name": name, "arguments": json.dumps(arguments)},
                        }
                    ]
                )
            ).encode()
        elif kind == "embeddings":
            dim = behavior[1]
            inputs = body.get("input", [])
            payload = json.dumps(
                {
                    "data": [
                        {"index": i, "embedding": [float(i + 1)] * dim} for i in range(len(inputs))
                    ]
                }
            ).encode()
        else:
            raise AssertionError(f"unknown stub behavior {kind}")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload)


@pytest.fixture
def stub():
    state = _StubState()
    handler = type("Handler", (_Handler,), {"state": state})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    state.base_url = f"http://127.0.0.1:{server.server_port}/v1"
    try:
        yield state
    finally:
        server.shutdown()
        thread.join(timeout=5)


def _config(stub, max_retries=3):
    return BackendConfig(
        base_url=stub.base_url,
        model_id="stub-model",
        api_key_env="MEMSTREAM_TEST_KEY",
        max_retries=max_retries,
        timeout_s=10.0,
        backoff_base_s=0.01,
    )


def test_retry_backoff_recovers_after_5xx(stub):
    stub.push(("status", 500), ("status", 503), ("text", "recovered"))
    client = OpenAIChatClient(_config(stub))
    out = client.complete([{"role": "user", "content": "hi"}])
    assert out == "recovered"
    assert len(stub.requests) == 3
    record = client.call_log[-1]
    assert record.retries == 2
    assert record.status == 200
    assert record.request_digest


def test_retries_exhausted_raises_transport_error(stub):
    stub.push(("status", 500), ("status", 500), ("status", 500))
    client = OpenAIChatClient(_config(stub, max_retries=2))
    with pytest.raises(TransportError, match="failed after 3 attempt"):
        client.complete([{"role": "user", "content": "hi"}])
    assert len(stub.requests) == 3


def test_429_is_retried(stub):
    stub.push(("status", 429), ("text", "after rate limit"))
    client = OpenAIChatClient(_config(stub))
    assert client.complete([{"role": "user", "content": "hi"}]) == "after rate limit"
    assert len(stub.requests) == 2


def test_4xx_fails_without_retry(stub):
    stub.push(("status", 400))
    client = OpenAIChatClient(_config(stub))
    with pytest.raises(TransportError, match="HTTP 400"):
        client.complete([{"role": "user", "content": "hi"}])
    assert len(stub.requests) == 1


def test_non_json_body_is_transport_error(stub):
    stub.push(("raw", "not json at all"))
    client = OpenAIChatClient(_config(stub))
    with pytest.raises(TransportError, match="non-JSON"):
        client.complete([{"role": "user", "content": "hi"}])


def test_bearer_auth_header_from_env(stub, monkeypatch):
    monkeypatch.setenv("MEMSTREAM_TEST_KEY", "sk-test-123")
    stub.push(("text", "ok"))
    OpenAIChatClient(_config(stub)).complete([{"role": "user", "content": "hi"}])
    assert stub.requests[0]["auth"] == "Bearer sk-test-123"


def test_tool_call_round_trip(stub):
    stub.push(
        ("tool_call", TOOL_VIDEO_INSPECT, {"time_ranges": [["00:02:00", "00:02:10"]], "question": "kite?"})
    )
    client = OpenAIChatClient(_config(stub))
    result = client.complete_with_tools([{"role": "user", "content": "go"}], TOOLS)
    assert result.calls[0].name == TOOL_VIDEO_INSPECT
    assert result.calls[0].canonical["ranges"] == [iv(120, 130)]
    # the wire request advertised all three tool schemas
    sent = stub.requests[0]["body"]
    assert [t["function"]["name"] for t in sent["tools"]] == [t.name for t in TOOLS]


def test_malformed_tool_arguments_surface_argument_error(stub):
    stub.push(("tool_call", TOOL_VIDEO_INSPECT, {"time_ranges": [["00:10:00", "00:05:00"]]}))
    client = OpenAIChatClient(_config(stub))
    with pytest.raises(ToolArgumentError) as excinfo:
        client.complete_with_tools([{"role": "user", "content": "go"}], TOOLS)
    assert excinfo.value.raw_payload == {"time_ranges": [["00:10:00", "00:05:00"]]}


def test_unparseable_tool_argument_json_surfaces_argument_error(stub):
    stub.push(
        (
            "raw",
            json.dumps(
                _chat_body(
                    tool_calls=[
                        {
                            "id": "call-1",
                            "type": "function",
                            "function": {"name": TOOL_VIDEO_INSPECT, "arguments": "{not json"},
                        }
                    ]
                )
            ),
        )
    )
    client = OpenAIChatClient(_config(stub))
    with pytest.raises(ToolArgumentError, match="not valid JSON"):
        client.complete_with_tools([{"role": "user", "content": "go"}], TOOLS)


def test_judge_reask_path_over_the_wire(stub):
    stub.push(("text", "I liked this answer quite a bit."))  # missing Final Score
    stub.push(("text", "Analysis:\nfine\n\nFinal Score:\n4"))
    client = OpenAIChatClient(_config(stub))
    verdict = judge_answer("q?", "gt", "candidate", judge=client)
    assert verdict.valid is True
    assert verdict.raw_score == 4
    assert len(stub.requests) == 2
    # the re-ask carried the format reminder
    retry_messages = stub.requests[1]["body"]["messages"]
    assert "required output format" in retry_messages[-1]["content"]


def test_embeddings_round_trip_and_empty_text_rejected(stub):
    stub.push(("embeddings", 8))
    client = OpenAIEmbeddingClient(_config(stub))
    vectors = client.embed(["alpha", "beta"])
    assert [v.shape for v in vectors] == [(8,), (8,)]
    assert vectors[1][0] == 2.0
    with pytest.raises(ValidationError, match="empty text"):
        client.embed(["ok", " "])
    assert len(stub.requests) == 1  # the invalid batch never hit the wire


def test_embedding_dimension_change_is_transport_error(stub):
    stub.push(("embeddings", 8), ("embeddings", 4))
    client = OpenAIEmbeddingClient(_config(stub))
    client.embed(["alpha"])
    with pytest.raises(TransportError, match="dimension"):
        client.embed(["beta"])


def test_vision_request_carries_prompt_and_frames(stub):
    stub.push(("text", "[00:00:05] a caption"))
    frames = [b"fakejpegbytes-1", b"fakejpegbytes-2"]
    client = OpenAIVisionClient(_config(stub), frame_provider=lambda uri, local, global_iv: frames)
    out = client.describe_clip("media://clip", iv(600, 900), None, media_origin_ms=600_000)
    assert out == "[00:00:05] a caption"
    content = stub.requests[0]["body"]["messages"][0]["content"]
    kinds = [part["type"] for part in content]
    assert kinds == ["text", "image_url", "image_url"]
    assert "Generate a detailed caption" in content[0]["text"]


def test_vision_inspect_prompt_contains_question(stub):
    stub.push(("text", "answer"))
    client = OpenAIVisionClient(_config(stub), frame_provider=lambda uri, local, global_iv: [])
    client.describe_clip("media://clip", iv(0, 60), "did the kettle boil?")
    prompt = stub.requests[0]["body"]["messages"][0]["content"][0]["text"]
    assert "did the kettle boil?" in prompt
    assert "Error: Cannot find corresponding result" in prompt


def test_subprocess_frame_provider_runs_command_template():
    import base64

    from memstream.backends import SubprocessFrameProvider

    provider = SubprocessFrameProvider(
        "python3 -c \"import json, base64; print(json.dumps(["
        "base64.b64encode(b'frame-at-{start_s}').decode(),"
        "base64.b64encode(b'{source_uri}').decode()]))\"",
        fps=0.5,
        max_frames=4,
    )
    frames = provider("media-clip", iv(30, 60), iv(930, 960))
    assert frames[0] == b"frame-at-30.0"
    assert frames[1] == b"media-clip"


def test_subprocess_frame_provider_failures_are_transport_errors():
    from memstream.backends import SubprocessFrameProvider

    failing = SubprocessFrameProvider("python3 -c 'import sys; sys.exit(3)'")
    with pytest.raises(TransportError, match="frame extraction failed"):
        failing("u", iv(0, 1), iv(0, 1))
    garbled = SubprocessFrameProvider("python3 -c \"print('not json')\"")
    with pytest.raises(TransportError, match="non-JSON"):
        garbled("u", iv(0, 1), iv(0, 1))


def test_control_loop_over_the_wire_keeps_message_protocol_coherent(stub):
    """Full loop with the HTTP controller: search -> inspect -> finish."""
    from memstream.backends import ScriptedEmbedder, ScriptedMemoryLLM, ScriptedReranker, ScriptedVision
    from memstream.controller import ControlRuntime, run_control_loop
    from memstream.memory import MemoryBank, mem_manage
    from memstream.perception import Observation
    from memstream.timebase import TimePoint
    from memstream.timeline import ClipMeta, StreamManifest

    manifest = StreamManifest(
        stream_id="w",
        clips=(ClipMeta("a", TimePoint(0), TimePoint(900_000)),),
    )
    bank = mem_manage(
        MemoryBank(),
        Observation(interval=iv(0, 300), text="[00:02:00]-[00:02:10] the amber kite is unveiled."),
        memory_llm=ScriptedMemoryLLM(),
        embedder=ScriptedEmbedder(),
    )
    stub.push(
        ("tool_call", "memory_search_tool", {"query": "amber kite"}),
        ("tool_call", "video_inspect_tool", {"time_ranges": [["00:02:00", "00:02:10"]]}),
        ("tool_call", "finish", {"answer": "the amber kite is unveiled"}),
    )
    runtime = ControlRuntime(
        controller=OpenAIChatClient(_config(stub)),
        vision=ScriptedVision([(iv(120, 130), "the amber kite is unveiled")]),
        memory_llm=ScriptedMemoryLLM(),
        embedder=ScriptedEmbedder(),
        reranker=ScriptedReranker(),
    )
    trace = run_control_loop(
        "What happens involving 'amber kite'?", manifest, bank, 5, runtime=runtime, clock=lambda: 0.0
    )
    assert trace.final_answer == "the amber kite is unveiled"
    assert trace.rounds_used == 3
    assert [iv_.as_seconds() for iv_ in trace.inspected_intervals] == [(120.0, 130.0)]

    # round 2 request must replay the assistant tool_calls message followed by
    # a tool reply carrying the matching call id
    second = stub.requests[1]["body"]["messages"]
    assistant = next(m for m in second if m.get("tool_calls"))
    assert assistant["tool_calls"][0]["function"]["name"] == "memory_search_tool"
    tool_reply = next(m for m in second if m.get("role") == "tool")
    assert tool_reply["tool_call_id"] == assistant["tool_calls"][0]["id"]
    assert "amber kite" in tool_reply["content"]

    # round 3 request carries the inspect reply with the aligned anchor
    third = stub.requests[2]["body"]["messages"]
    inspect_reply = [m for m in third if m.get("role") == "tool"][-1]
    assert "[00:02:00]" in inspect_reply["content"]


def test_forced_finish_over_the_wire_omits_tools(stub):
    from memstream.backends import ScriptedEmbedder, ScriptedMemoryLLM, ScriptedReranker, ScriptedVision
    from memstream.controller import ControlRuntime, run_control_loop
    from memstream.memory import MemoryBank
    from memstream.timebase import TimePoint
    from memstream.timeline import ClipMeta, StreamManifest

    manifest = StreamManifest(
        stream_id="w",
        clips=(ClipMeta("a", TimePoint(0), TimePoint(900_000)),),
    )
    stub.push(
        ("tool_call", "memory_search_tool", {"query": "anything"}),
        ("text", "best effort answer"),
    )
    runtime = ControlRuntime(
        controller=OpenAIChatClient(_config(stub)),
        vision=ScriptedVision([]),
        memory_llm=ScriptedMemoryLLM(),
        embedder=ScriptedEmbedder(),
        reranker=ScriptedReranker(),
    )
    trace = run_control_loop("what?", manifest, MemoryBank(), 1, runtime=runtime, clock=lambda: 0.0)
    assert trace.forced_finish is True
    assert trace.final_answer == "best effort answer"
    # the forced-finish request must not advertise tools
    assert "tools" not in stub.requests[1]["body"]
    assert "answer now" in stub.requests[1]["body"]["messages"][-1]["content"].lower()
