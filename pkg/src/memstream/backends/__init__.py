"""Uniform interfaces to the model roles behind the runtime.

Two families ship here: HTTP clients for OpenAI-compatible endpoints, and
scripted deterministic doubles for offline runs.  Both expose the same duck
interface per role:

* vision — ``describe_clip(frames_ref, interval, question=None, media_origin_ms=0)``
* controller — ``complete_with_tools(messages, tools) -> CompletionResult``
* chat (memory/judge) — ``complete(messages) -> str``
* embedder — ``embed(texts) -> list[np.ndarray]``
"""
from .config import (
    ALL_ROLES,
    ROLE_CONTROLLER,
    ROLE_EMBEDDER,
    ROLE_JUDGE,
    ROLE_MEMORY,
    ROLE_PERCEPTION,
    ROLE_RERANKER,
    BackendConfig,
    RunConfig,
    backend_config_from_dict,
    default_role_models,
    load_run_config,
)
from .openai_client import (
    CallRecord,
    OpenAIChatClient,
    OpenAIEmbeddingClient,
    OpenAIVisionClient,
    SubprocessFrameProvider,
)
from .scripted import (
    BlindController,
    OracleController,
    ScriptedController,
    ScriptedEmbedder,
    ScriptedJudge,
    ScriptedMemoryLLM,
    ScriptedReranker,
    ScriptedVision,
    load_event_map,
    save_event_map,
)
from .tools import (
    TOOL_FINISH,
    TOOL_MEMORY_SEARCH,
    TOOL_NAMES,
    TOOL_VIDEO_INSPECT,
    CompletionResult,
    ToolCall,
    ToolSchema,
    build_toolset,
    validate_tool_call,
)

__all__ = [
    "ALL_ROLES",
    "ROLE_CONTROLLER",
    "ROLE_EMBEDDER",
    "ROLE_JUDGE",
    "ROLE_MEMORY",
    "ROLE_PERCEPTION",
    "ROLE_RERANKER",
    "BackendConfig",
    "RunConfig",
    "backend_config_from_dict",
    "default_role_models",
    "load_run_config",
    "CallRecord",
    "OpenAIChatClient",
    "OpenAIEmbeddingClient",
    "OpenAIVisionClient",
    "SubprocessFrameProvider",
    "BlindController",
    "OracleController",
    "ScriptedController",
    "ScriptedEmbedder",
    "ScriptedJudge",
    "ScriptedMemoryLLM",
    "ScriptedReranker",
    "ScriptedVision",
    "load_event_map",
    "save_event_map",
    "TOOL_FINISH",
    "TOOL_MEMORY_SEARCH",
    "TOOL_NAMES",
    "TOOL_VIDEO_INSPECT",
    "CompletionResult",
    "ToolCall",
    "ToolSchema",
    "build_toolset",
    "validate_tool_call",
]
