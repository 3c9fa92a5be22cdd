"""Chat-completion backends.

Four implementations share one ``chat(request) -> Completion`` surface:

* ``RemoteChatBackend``  OpenAI-compatible ``POST /v1/chat/completions``
* ``ScriptedBackend``    matcher -> response fixtures, fully deterministic
* ``RecordingBackend``   wraps any backend and writes a prompt-hash cassette
* ``ReplayBackend``      serves a cassette, never touches the network
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import httpx

from .errors import (
    BackendError,
    BackendTimeout,
    CassetteMiss,
    NoScriptMatch,
    RateLimited,
    RequestValidationError,
)

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 1024
API_KEY_ENV = "AGENTRAG_API_KEY"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    model_id: str = "default"

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))

    def validate(self) -> None:
        if not self.messages:
            raise RequestValidationError("request has no messages")
        for i, m in enumerate(self.messages):
            if m.role not in ROLES:
                raise RequestValidationError(f"message {i} has unknown role {m.role!r}")
            if m.content is None:
                raise RequestValidationError(f"message {i} has null content")
            if m.role == "system" and i != 0:
                raise RequestValidationError("system message must come first")
        if self.temperature < 0:
            raise RequestValidationError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise RequestValidationError("max_tokens must be positive")

    @property
    def user_message(self) -> str:
        """Content of the last user message, the text script matchers look at."""
        for m in reversed(self.messages):
            if m.role == "user":
                return m.content
        return ""


@dataclass(frozen=True)
class Completion:
    text: str
    usage: dict = field(default_factory=dict)
    latency_ms: float = 0.0
    model_id: str = ""


class ChatBackend(Protocol):
    def chat(self, request: CompletionRequest) -> Completion: ...


def prompt_sha256(messages: Sequence[ChatMessage]) -> str:
    payload = json.dumps(
        [m.to_dict() for m in messages], ensure_ascii=False, separators=(",", ":"), sort_keys=True
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# remote


class RemoteChatBackend:
    """OpenAI-compatible chat endpoint with exponential backoff.

    Retries 429 / 5xx / timeouts / connection errors; ``max_attempts`` counts
    the first try.  Delay for attempt ``n`` (0-based) is
    ``base_delay * factor**n`` capped at ``max_delay``, with full jitter.
    """

    RETRYABLE = {429, 500, 502, 503, 504}

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        *,
        timeout: float = 60.0,
        max_attempts: int = 5,
        base_delay: float = 0.5,
        factor: float = 2.0,
        max_delay: float = 8.0,
        max_in_flight: int = 8,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.url = base_url.rstrip("/") + "/v1/chat/completions"
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.max_attempts = max_attempts
        self.base_delay = base_delay
        self.factor = factor
        self.max_delay = max_delay
        self._client = client or httpx.Client(timeout=timeout)
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._sleep = sleep
        self._rng = rng or random.Random()

    def _delay(self, attempt: int) -> float:
        cap = min(self.max_delay, self.base_delay * self.factor**attempt)
        return self._rng.uniform(0, cap)

    def chat(self, request: CompletionRequest) -> Completion:
        request.validate()
        body = {
            "model": request.model_id,
            "messages": [m.to_dict() for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last: BackendError | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self._delay(attempt - 1))
            start = time.perf_counter()
            try:
                with self._slots:
                    resp = self._client.post(self.url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = BackendTimeout(f"timeout calling {self.url}: {exc}")
                continue
            except httpx.TransportError as exc:
                last = BackendError(f"transport error calling {self.url}: {exc}")
                continue
            if resp.status_code in self.RETRYABLE:
                cls = RateLimited if resp.status_code == 429 else BackendError
                last = cls(f"HTTP {resp.status_code} from {self.url}")
                logger.warning("attempt %d/%d: %s", attempt + 1, self.max_attempts, last)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code} from {self.url}: {resp.text[:200]}")
            try:
                data = resp.json()
                text = data["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"malformed completion payload: {exc}") from exc
            return Completion(
                text=text,
                usage=data.get("usage") or {},
                latency_ms=(time.perf_counter() - start) * 1000.0,
                model_id=data.get("model", request.model_id),
            )
        assert last is not None
        raise last


# --------------------------------------------------------------------------
# scripted

MATCHERS = ("exact", "substring", "regex")


@dataclass
class ScriptEntry:
    matcher: str
    pattern: str
    response: str
    max_uses: int | None = None
    uses: int = 0

    def __post_init__(self):
        if self.matcher not in MATCHERS:
            raise ValueError(f"matcher must be one of {MATCHERS}, got {self.matcher!r}")
        if not self.pattern:
            raise ValueError("script pattern must be non-empty")
        if self.max_uses is not None and self.max_uses < 1:
            raise ValueError("max_uses must be positive")
        self._regex = re.compile(self.pattern) if self.matcher == "regex" else None

    def matches(self, text: str) -> bool:
        if self.max_uses is not None and self.uses >= self.max_uses:
            return False
        if self.matcher == "exact":
            return text == self.pattern
        if self.matcher == "substring":
            return self.pattern in text
        return self._regex.search(text) is not None

    def to_dict(self) -> dict:
        d = {"match": self.matcher, "pattern": self.pattern, "response": self.response}
        if self.max_uses is not None:
            d["max_uses"] = self.max_uses
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScriptEntry":
        return cls(
            matcher=d["match"],
            pattern=d["pattern"],
            response=d["response"],
            max_uses=d.get("max_uses"),
        )


def load_script(path: str | Path) -> list[ScriptEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                entries.append(ScriptEntry.from_dict(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad script entry: {exc}") from exc
    return entries


def write_script(path: str | Path, entries: Iterable[ScriptEntry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e.to_dict(), ensure_ascii=False) + "\n")


class ScriptedBackend:
    """First matching entry, in file order, answers the request.

    ``delay`` lets tests inject per-call latency to shake out ordering bugs;
    it runs outside the bookkeeping lock.
    """

    def __init__(
        self,
        entries: Iterable[ScriptEntry],
        *,
        delay: Callable[[CompletionRequest], float] | None = None,
    ):
        self.entries = list(entries)
        self.delay = delay
        self.call_log: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path, **kw) -> "ScriptedBackend":
        return cls(load_script(path), **kw)

    def chat(self, request: CompletionRequest) -> Completion:
        request.validate()
        text = request.user_message
        with self._lock:
            for entry in self.entries:
                if entry.matches(text):
                    entry.uses += 1
                    response = entry.response
                    break
            else:
                raise NoScriptMatch(f"no script entry matches user message: {text[:120]!r}")
            key = prompt_sha256(request.messages)
            self.call_log.append((key, hashlib.sha256(response.encode("utf-8")).hexdigest()))
        if self.delay is not None:
            time.sleep(self.delay(request))
        return Completion(text=response, usage={}, latency_ms=0.0, model_id="scripted")


# --------------------------------------------------------------------------
# record / replay


def load_cassette(path: str | Path) -> dict[str, str]:
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                table.setdefault(rec["prompt_sha256"], rec["response"])
    return table


class RecordingBackend:
    """Pass-through wrapper that remembers every (prompt hash, response) pair.

    With ``path`` set, each new pair is appended to a JSON Lines cassette as
    soon as the inner call returns.
    """

    def __init__(self, inner: ChatBackend, path: str | Path | None = None):
        self.inner = inner
        self.path = Path(path) if path is not None else None
        self.entries: dict[str, str] = {}
        self._lock = threading.Lock()

    def chat(self, request: CompletionRequest) -> Completion:
        completion = self.inner.chat(request)
        key = prompt_sha256(request.messages)
        with self._lock:
            if key not in self.entries:
                self.entries[key] = completion.text
                if self.path is not None:
                    with open(self.path, "a", encoding="utf-8") as fh:
                        fh.write(
                            json.dumps({"prompt_sha256": key, "response": completion.text}, ensure_ascii=False)
                            + "\n"
                        )
        return completion

    def cassette(self) -> list[dict]:
        with self._lock:
            return [{"prompt_sha256": k, "response": v} for k, v in sorted(self.entries.items())]


def record(inner: ChatBackend, path: str | Path | None = None) -> RecordingBackend:
    return RecordingBackend(inner, path)


class ReplayBackend:
    def __init__(self, table: dict[str, str]):
        self.table = dict(table)

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayBackend":
        return cls(load_cassette(path))

    @classmethod
    def from_entries(cls, entries: Iterable[dict]) -> "ReplayBackend":
        table: dict[str, str] = {}
        for rec in entries:
            table.setdefault(rec["prompt_sha256"], rec["response"])
        return cls(table)

    def chat(self, request: CompletionRequest) -> Completion:
        request.validate()
        key = prompt_sha256(request.messages)
        try:
            text = self.table[key]
        except KeyError:
            raise CassetteMiss(key) from None
        return Completion(text=text, usage={}, latency_ms=0.0, model_id="replay")
