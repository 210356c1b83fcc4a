"""HTTP clients for OpenAI-compatible chat-completions and embedding endpoints.

Every remote call is retried with exponential backoff on transport faults and
5xx/429 responses, then recorded (request digest, latency, retry count) in the
client's call log for trace auditing.
"""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import shlex
import subprocess
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import requests

from ..errors import TransportError, ValidationError
from ..prompts import PromptSet, fill
from ..timebase import Interval
from .config import BackendConfig
from .tools import CompletionResult, ToolCall, ToolSchema, validate_tool_call

logger = logging.getLogger(__name__)

DEFAULT_INSPECT_FPS = 0.5
DEFAULT_MAX_FRAMES = 64


@dataclass
class CallRecord:
    """Audit entry for one remote call."""

    endpoint: str
    request_digest: str
    latency_s: float
    retries: int
    status: int


class _HttpBase:
    def __init__(self, config: BackendConfig, session: Optional[requests.Session] = None):
        self.config = config
        self.session = session or requests.Session()
        self.call_log: list[CallRecord] = []

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + path
        body = json.dumps(payload)
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()[:16]
        attempts = self.config.max_retries + 1
        started = time.monotonic()
        last_error: Optional[str] = None
        status = 0
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.config.backoff_base_s * (2 ** (attempt - 1)))
            try:
                response = self.session.post(
                    url, data=body, headers=self._headers(), timeout=self.config.timeout_s
                )
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                logger.warning("POST %s attempt %d/%d failed: %s", path, attempt + 1, attempts, last_error)
                continue
            status = response.status_code
            if status == 429 or status >= 500:
                last_error = f"HTTP {status}: {response.text[:200]}"
                logger.warning("POST %s attempt %d/%d got %s", path, attempt + 1, attempts, status)
                continue
            latency = time.monotonic() - started
            self.call_log.append(CallRecord(path, digest, latency, attempt, status))
            if status != 200:
                raise TransportError(f"{url} returned HTTP {status}: {response.text[:500]}")
            try:
                return response.json()
            except ValueError as exc:
                raise TransportError(f"{url} returned non-JSON body: {exc}") from exc
        latency = time.monotonic() - started
        self.call_log.append(CallRecord(path, digest, latency, attempts - 1, status))
        raise TransportError(
            f"{url} failed after {attempts} attempt(s); last error: {last_error}"
        )


class OpenAIChatClient(_HttpBase):
    """Chat-completions client used for text reasoning, judging, and tool calls."""

    def complete(self, messages: Sequence[dict], temperature: Optional[float] = None) -> str:
        payload = {
            "model": self.config.model_id,
            "messages": list(messages),
            "temperature": self.config.temperature if temperature is None else temperature,
        }
        data = self._post("/chat/completions", payload)
        return _message_content(data)

    def complete_with_tools(self, messages: Sequence[dict], tools: Sequence[ToolSchema]) -> CompletionResult:
        """One reasoning turn: returns validated tool calls or terminal text.

        Malformed tool arguments raise ToolArgumentError with the raw payload;
        the caller owns recovery.
        """
        payload = {
            "model": self.config.model_id,
            "messages": list(messages),
            "temperature": self.config.temperature,
        }
        if tools:
            payload["tools"] = [schema.as_openai() for schema in tools]
        data = self._post("/chat/completions", payload)
        message = _choice_message(data)
        raw_calls = message.get("tool_calls") or []
        if not raw_calls:
            return CompletionResult(text=message.get("content") or "", raw_message=message)
        calls = []
        for raw in raw_calls:
            fn = raw.get("function", {})
            args_text = fn.get("arguments", "{}")
            try:
                arguments = json.loads(args_text) if isinstance(args_text, str) else dict(args_text)
            except (ValueError, TypeError) as exc:
                from ..errors import ToolArgumentError

                raise ToolArgumentError(
                    f"tool arguments are not valid JSON: {exc}", fn.get("name", ""), args_text
                ) from exc
            call = ToolCall(name=fn.get("name", ""), arguments=arguments, call_id=raw.get("id", ""))
            calls.append(validate_tool_call(call, tools))
        return CompletionResult(calls=tuple(calls), raw_message=message)


class OpenAIEmbeddingClient(_HttpBase):
    """Embedding client; one fixed-dimension float32 vector per input text."""

    def __init__(self, config: BackendConfig, session: Optional[requests.Session] = None):
        super().__init__(config, session)
        self._dim: Optional[int] = None

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        texts = list(texts)
        if not texts:
            raise ValidationError("embed requires at least one text")
        if any(not str(t).strip() for t in texts):
            raise ValidationError("empty text")
        data = self._post("/embeddings", {"model": self.config.model_id, "input": texts})
        rows = sorted(data.get("data", []), key=lambda item: item.get("index", 0))
        if len(rows) != len(texts):
            raise TransportError(f"embedding endpoint returned {len(rows)} vectors for {len(texts)} inputs")
        vectors = [np.asarray(row["embedding"], dtype=np.float32) for row in rows]
        for vec in vectors:
            if self._dim is None:
                self._dim = int(vec.shape[0])
            elif vec.shape[0] != self._dim:
                raise TransportError(
                    f"embedding dimension changed from {self._dim} to {vec.shape[0]}"
                )
        return vectors


FrameProvider = Callable[[str, Interval, Interval], list[bytes]]


class SubprocessFrameProvider:
    """Frame acquisition via a templated external command.

    The command receives {source_uri}, {start_s}, {end_s} (media-local), {fps}
    and {max_frames}, and must print a JSON array of base64-encoded images to
    stdout.
    """

    def __init__(self, command_template: str, fps: float = DEFAULT_INSPECT_FPS, max_frames: int = DEFAULT_MAX_FRAMES):
        self.command_template = command_template
        self.fps = fps
        self.max_frames = max_frames

    def __call__(self, source_uri: str, local: Interval, global_iv: Interval) -> list[bytes]:
        command = self.command_template.format(
            source_uri=shlex.quote(source_uri),
            start_s=local.start.seconds,
            end_s=local.end.seconds,
            fps=self.fps,
            max_frames=self.max_frames,
        )
        proc = subprocess.run(command, shell=True, capture_output=True, text=True)
        if proc.returncode != 0:
            raise TransportError(f"frame extraction failed ({proc.returncode}): {proc.stderr[:300]}")
        try:
            encoded = json.loads(proc.stdout)
        except ValueError as exc:
            raise TransportError(f"frame extractor printed non-JSON output: {exc}") from exc
        return [base64.b64decode(item) for item in encoded]


class OpenAIVisionClient(OpenAIChatClient):
    """Vision-language captioning/inspection over sampled frames."""

    def __init__(
        self,
        config: BackendConfig,
        frame_provider: FrameProvider,
        prompts: Optional[PromptSet] = None,
        session: Optional[requests.Session] = None,
    ):
        super().__init__(config, session)
        self.frame_provider = frame_provider
        self.prompts = prompts or PromptSet()

    def describe_clip(
        self,
        frames_ref: str,
        interval: Interval,
        question: Optional[str] = None,
        media_origin_ms: int = 0,
    ) -> str:
        """Caption (passive) or answer a question about (inspect) one time range.

        ``interval`` is on the global stream timeline; frame sampling happens
        at media-local offsets derived from ``media_origin_ms``.
        """
        local = Interval.from_millis(
            interval.start.millis - media_origin_ms, interval.end.millis - media_origin_ms
        )
        frames = self.frame_provider(frames_ref, local, interval)
        if question is None:
            prompt = self.prompts.caption
        else:
            prompt = fill(self.prompts.inspect, question=question)
        content: list[dict] = [{"type": "text", "text": prompt}]
        for frame in frames:
            encoded = base64.b64encode(frame).decode("ascii")
            content.append(
                {"type": "image_url", "image_url": {"url": f"data:image/jpeg;base64,{encoded}"}}
            )
        payload = {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.config.temperature,
        }
        data = self._post("/chat/completions", payload)
        return _message_content(data)


def _choice_message(data: dict) -> dict:
    try:
        return data["choices"][0]["message"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"malformed chat completion response: {exc}") from exc


def _message_content(data: dict) -> str:
    content = _choice_message(data).get("content")
    return content if isinstance(content, str) else ""
