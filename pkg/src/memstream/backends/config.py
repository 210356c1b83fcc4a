"""Backend role configuration.

Six model roles drive the runtime: passive/inspect vision captioning, the
control-loop reasoner, memory maintenance summarization, retrieval reranking,
answer judging, and text embedding.  Each is bound to its own endpoint and
decoding settings so roles can mix providers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..errors import ValidationError

ROLE_PERCEPTION = "perception_mllm"
ROLE_CONTROLLER = "controller"
ROLE_MEMORY = "memory_llm"
ROLE_RERANKER = "reranker_llm"
ROLE_JUDGE = "judge_llm"
ROLE_EMBEDDER = "embedder"

ALL_ROLES = (
    ROLE_PERCEPTION,
    ROLE_CONTROLLER,
    ROLE_MEMORY,
    ROLE_RERANKER,
    ROLE_JUDGE,
    ROLE_EMBEDDER,
)


@dataclass(frozen=True)
class BackendConfig:
    """Connection and decoding settings for one remote model role."""

    base_url: str
    model_id: str
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    timeout_s: float = 120.0
    backoff_base_s: float = 0.5

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_retries < 0:
            raise ValidationError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.timeout_s <= 0:
            raise ValidationError(f"timeout must be positive, got {self.timeout_s}")


def default_role_models() -> dict[str, dict]:
    """Stock role bindings for an OpenAI-compatible endpoint."""
    base = "https://api.openai.com/v1"
    return {
        ROLE_PERCEPTION: {"kind": "openai", "base_url": base, "model_id": "gpt-5", "temperature": 0.0},
        ROLE_CONTROLLER: {"kind": "openai", "base_url": base, "model_id": "gpt-5", "temperature": 0.0},
        ROLE_MEMORY: {"kind": "openai", "base_url": base, "model_id": "gpt-4.1-mini", "temperature": 0.1},
        ROLE_RERANKER: {"kind": "openai", "base_url": base, "model_id": "gpt-4.1-mini", "temperature": 0.0},
        ROLE_JUDGE: {"kind": "openai", "base_url": base, "model_id": "gpt-5", "temperature": 0.0},
        ROLE_EMBEDDER: {"kind": "openai", "base_url": base, "model_id": "text-embedding-3-large"},
    }


@dataclass
class RunConfig:
    """Run-level knobs shared by all commands."""

    delta_t_s: float = 300.0
    max_steps: int = 5
    top_k: int = 5
    ref_n: tuple[int, ...] = (60, 300, 600)
    parallelism: int = 1
    seed: int = 0
    year: int = 2025
    prompt_dir: Optional[str] = None
    roles: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.delta_t_s <= 0 or self.max_steps <= 0 or self.top_k <= 0 or self.parallelism <= 0:
            raise ValidationError("delta_t_s, max_steps, top_k, and parallelism must be positive")
        if any(n <= 0 for n in self.ref_n):
            raise ValidationError("ref_n values must be positive")


def load_run_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """Load a JSON run config; missing path yields pure defaults."""
    if path is None:
        return RunConfig()
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    known = {}
    for key in ("delta_t_s", "max_steps", "top_k", "parallelism", "seed", "year", "prompt_dir"):
        if key in raw:
            known[key] = raw[key]
    if "ref_n" in raw:
        known["ref_n"] = tuple(int(n) for n in raw["ref_n"])
    known["roles"] = raw.get("roles", {})
    if raw.get("mode") == "scripted":
        # Shorthand: every role scripted, sharing one events file / policy.
        shared = {"kind": "scripted"}
        if "events" in raw:
            shared["events"] = raw["events"]
        if "policy" in raw:
            shared["policy"] = raw["policy"]
        known["roles"] = {role: dict(shared) for role in ALL_ROLES}
    return RunConfig(**known)


def backend_config_from_dict(raw: dict, extra_keys: frozenset = frozenset()) -> BackendConfig:
    """Connection settings from a role dict; role-specific keys may be declared
    via extra_keys (they are validated by the role's own builder)."""
    allowed = {"base_url", "model_id", "api_key_env", "temperature", "max_retries", "timeout_s", "backoff_base_s"}
    unknown = set(raw) - allowed - extra_keys - {"kind"}
    if unknown:
        raise ValidationError(f"unknown backend config keys: {sorted(unknown)}")
    missing = {"base_url", "model_id"} - set(raw)
    if missing:
        raise ValidationError(f"backend config missing keys: {sorted(missing)}")
    return BackendConfig(**{k: v for k, v in raw.items() if k in allowed})
