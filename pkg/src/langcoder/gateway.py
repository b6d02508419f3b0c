"""Uniform chat-completion interface with interchangeable backends.

Three backends cover every deployment mode: a live HTTP client speaking the
de-facto chat-completions wire protocol, a deterministic mock for scripted
tests, and a record/replay cassette store for offline re-runs. Mock and
replay are pure functions of the request digest, so any pipeline stage that
only talks through the gateway is replayable byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol

import requests

from .errors import (
    EmptyResponseError,
    HttpStatusError,
    MissingCassetteError,
    MissingFixtureError,
    TransportError,
    ValidationError,
)

logger = logging.getLogger(__name__)

DEFAULT_RETRIES = 3
BACKOFF_BASE_SECONDS = 1.0
RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self) -> None:
        if self.role in (Role.SYSTEM, Role.USER) and not self.content:
            raise ValidationError(f"{self.role.value} message content must be non-empty")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role.value, "content": self.content}

    @classmethod
    def from_dict(cls, data: Mapping[str, str]) -> "ChatMessage":
        return cls(role=Role(data["role"]), content=data["content"])


def system(content: str) -> ChatMessage:
    return ChatMessage(role=Role.SYSTEM, content=content)


def user(content: str) -> ChatMessage:
    return ChatMessage(role=Role.USER, content=content)


def assistant(content: str) -> ChatMessage:
    return ChatMessage(role=Role.ASSISTANT, content=content)


@dataclass(frozen=True)
class CompletionRequest:
    model_id: str
    temperature: float
    messages: tuple[ChatMessage, ...]
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")
        if not self.messages:
            raise ValidationError("request must carry at least one message")
        object.__setattr__(self, "messages", tuple(self.messages))

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "messages": [m.to_dict() for m in self.messages],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CompletionRequest":
        return cls(
            model_id=data["model_id"],
            temperature=data["temperature"],
            max_tokens=data.get("max_tokens"),
            messages=tuple(ChatMessage.from_dict(m) for m in data["messages"]),
        )


def canonical_bytes(request: CompletionRequest) -> bytes:
    """Platform-stable byte serialization used for request digests.

    Temperature is rendered at fixed 6-decimal precision; message order is
    significant. max_tokens is delivery detail and intentionally excluded.
    """
    parts = [request.model_id, f"{request.temperature:.6f}"]
    for message in request.messages:
        parts.append(message.role.value)
        parts.append(message.content)
    return ("\n".join(parts) + "\n").encode("utf-8")


def canonical_digest(request: CompletionRequest) -> str:
    """SHA-256 hex digest of the canonical request bytes."""
    return hashlib.sha256(canonical_bytes(request)).hexdigest()


@dataclass(frozen=True)
class Cassette:
    """One persisted exchange, keyed by the digest of its request."""

    key: str
    request_snapshot: CompletionRequest
    response: str

    def __post_init__(self) -> None:
        if self.key != canonical_digest(self.request_snapshot):
            raise ValidationError(
                f"cassette key {self.key} does not match its request digest"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "key": self.key,
            "request": self.request_snapshot.to_dict(),
            "response": self.response,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Cassette":
        return cls(
            key=data["key"],
            request_snapshot=CompletionRequest.from_dict(data["request"]),
            response=data["response"],
        )


class CassetteStore:
    """One JSON file per digest under a directory; writes are atomic."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._lock = threading.Lock()

    def path_for(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def save(self, cassette: Cassette) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        target = self.path_for(cassette.key)
        payload = json.dumps(cassette.to_dict(), ensure_ascii=False, indent=2)
        with self._lock:
            fd, tmp_name = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as handle:
                    handle.write(payload)
                os.replace(tmp_name, target)
            finally:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
        return target

    def load(self, digest: str) -> Cassette:
        path = self.path_for(digest)
        if not path.exists():
            raise MissingCassetteError(digest)
        with open(path, encoding="utf-8") as handle:
            return Cassette.from_dict(json.load(handle))

    def contains(self, digest: str) -> bool:
        return self.path_for(digest).exists()

    def list(self) -> list[Cassette]:
        if not self.directory.is_dir():
            return []
        cassettes = []
        for path in sorted(self.directory.glob("*.json")):
            with open(path, encoding="utf-8") as handle:
                cassettes.append(Cassette.from_dict(json.load(handle)))
        return cassettes


class Backend(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


class HttpBackend:
    """Live client for the POST <base_url>/chat/completions protocol.

    Transport failures and retryable statuses are retried up to ``retries``
    times with exponential backoff, so a call issues at most 1 + retries
    attempts. The bearer token comes from the LC_API_KEY environment
    variable unless passed explicitly.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        retries: int = DEFAULT_RETRIES,
        backoff_base: float = BACKOFF_BASE_SECONDS,
        timeout: float = 120.0,
        post: Callable[..., Any] | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get("LC_API_KEY", "")
        self.retries = retries
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._post = post or requests.post
        self._sleep = sleeper

    def complete(self, request: CompletionRequest) -> str:
        url = f"{self.base_url}/chat/completions"
        body: dict[str, Any] = {
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": [m.to_dict() for m in request.messages],
        }
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens
        headers = {"Authorization": f"Bearer {self.api_key}"}

        last_error: Exception | None = None
        for attempt in range(1 + self.retries):
            if attempt:
                self._sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                response = self._post(url, json=body, headers=headers, timeout=self.timeout)
            except Exception as exc:  # requests transport errors
                last_error = exc
                logger.warning("transport failure on attempt %d: %s", attempt + 1, exc)
                continue
            status = response.status_code
            if status in RETRYABLE_STATUSES:
                last_error = HttpStatusError(f"status {status} from {url}", status)
                logger.warning("retryable status %d on attempt %d", status, attempt + 1)
                continue
            if status >= 400:
                raise HttpStatusError(f"status {status} from {url}", status)
            try:
                payload = response.json()
                content = payload["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion response: {exc}") from exc
            return content if content is not None else ""
        if isinstance(last_error, HttpStatusError):
            raise last_error
        raise TransportError(f"giving up after {1 + self.retries} attempts: {last_error}")


class MockBackend:
    """Deterministic scripted backend: a pure function of the request.

    Lookup order: exact digest fixture, then the first content rule whose
    substring appears in the final message's content, then the default.
    Matching on the final message keeps multi-turn dialogues scriptable:
    each turn is answered by the rule for its newest prompt.
    """

    def __init__(
        self,
        by_digest: Mapping[str, str] | None = None,
        rules: list[tuple[str, str]] | None = None,
        default: str | None = None,
    ):
        self.by_digest = dict(by_digest or {})
        self.rules = list(rules or [])
        self.default = default

    @classmethod
    def from_script(cls, path: str | Path) -> "MockBackend":
        """Load fixtures from a JSON script file.

        Schema: {"by_digest": {digest: response}, "rules": [{"contains":
        str, "response": str}], "default": str}. All keys optional.
        """
        with open(path, encoding="utf-8") as handle:
            script = json.load(handle)
        rules = [(r["contains"], r["response"]) for r in script.get("rules", [])]
        return cls(
            by_digest=script.get("by_digest"),
            rules=rules,
            default=script.get("default"),
        )

    def complete(self, request: CompletionRequest) -> str:
        digest = canonical_digest(request)
        if digest in self.by_digest:
            return self.by_digest[digest]
        haystack = request.messages[-1].content
        for needle, response in self.rules:
            if needle in haystack:
                return response
        if self.default is not None:
            return self.default
        raise MissingFixtureError(digest)


class RecordBackend:
    """Completes through an inner backend and persists each exchange."""

    def __init__(self, inner: Backend, store: CassetteStore):
        self.inner = inner
        self.store = store

    def complete(self, request: CompletionRequest) -> str:
        response = self.inner.complete(request)
        self.store.save(
            Cassette(key=canonical_digest(request), request_snapshot=request, response=response)
        )
        return response


class ReplayBackend:
    """Returns recorded responses byte-identically; never calls a model."""

    def __init__(self, store: CassetteStore):
        self.store = store

    def complete(self, request: CompletionRequest) -> str:
        return self.store.load(canonical_digest(request)).response


@dataclass
class Gateway:
    """A backend plus the sampling settings every call should use.

    Temperature defaults to 0.0 for reproducibility; override per stage in
    configuration when exploration is wanted.
    """

    backend: Backend
    model_id: str
    temperature: float = 0.0
    max_tokens: int | None = None

    def build_request(self, messages: list[ChatMessage]) -> CompletionRequest:
        return CompletionRequest(
            model_id=self.model_id,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            messages=tuple(messages),
        )

    def complete(self, request: CompletionRequest) -> str:
        text = self.backend.complete(request)
        if not text:
            raise EmptyResponseError(
                f"backend returned empty content for digest {canonical_digest(request)}"
            )
        return text

    def ask(self, messages: list[ChatMessage]) -> str:
        return self.complete(self.build_request(messages))
