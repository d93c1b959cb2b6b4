"""Chat-completion gateway: request/response types, backends and the replay cache."""
from __future__ import annotations

import enum
import hashlib
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import requests

from .errors import BackendUnavailable, CacheCorrupt, ConfigError, MalformedResponse


class PromptKind(str, enum.Enum):
    NFE = "NFE"
    ENGAGE_PREDICT = "EngagePredict"
    PROFILE_UPDATE = "ProfileUpdate"
    COMMENT_STYLE = "CommentStyle"
    COMMENT_GEN = "CommentGen"
    PROFILE_INIT = "ProfileInit"


SCHEMA_FOR_KIND = {
    PromptKind.NFE: "nfe",
    PromptKind.ENGAGE_PREDICT: "engagement",
    PromptKind.PROFILE_UPDATE: "profile",
    PromptKind.COMMENT_STYLE: "style",
    PromptKind.COMMENT_GEN: "comment",
    PromptKind.PROFILE_INIT: "profile",
}


@dataclass(frozen=True)
class ChatRequest:
    prompt_kind: PromptKind
    system_text: str
    user_text: str
    temperature: float = 0.0
    max_tokens: int = 1024
    schema_id: str | None = None

    def __post_init__(self):
        kind = PromptKind(self.prompt_kind)
        object.__setattr__(self, "prompt_kind", kind)
        if self.schema_id is None:
            object.__setattr__(self, "schema_id", SCHEMA_FOR_KIND[kind])
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if self.schema_id != SCHEMA_FOR_KIND[kind]:
            raise ValueError(f"schema {self.schema_id!r} does not match prompt kind {kind.value}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def canonical(self) -> dict:
        # insertion order is the canonical field order
        return {
            "prompt_kind": self.prompt_kind.value,
            "system_text": self.system_text,
            "user_text": self.user_text,
            "temperature": float(self.temperature),
            "max_tokens": int(self.max_tokens),
            "schema_id": self.schema_id,
        }

    def serialize(self) -> bytes:
        return json.dumps(self.canonical(), ensure_ascii=False, separators=(",", ":")).encode("utf-8")

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.serialize()).hexdigest()

    @classmethod
    def from_canonical(cls, doc: dict) -> "ChatRequest":
        return cls(PromptKind(doc["prompt_kind"]), doc["system_text"], doc["user_text"],
                   doc["temperature"], doc["max_tokens"], doc["schema_id"])


@dataclass(frozen=True)
class ChatResponse:
    text: str
    backend: str
    cached: bool
    request_digest: str


class Backend(Protocol):
    name: str

    def generate(self, req: ChatRequest) -> str: ...


class MockBackend:
    """Deterministic rule-table backend; counts its invocations."""

    name = "Mock"

    def __init__(self, rules):
        from .mock import MockRuleTable

        self.rules = rules if isinstance(rules, MockRuleTable) else MockRuleTable(rules)
        self.calls = 0
        self._lock = threading.Lock()

    def generate(self, req: ChatRequest) -> str:
        from .mock import mock_response

        with self._lock:
            self.calls += 1
        return mock_response(req, self.rules)


class HttpBackend:
    """Chat-completions client with bounded parallelism and exponential backoff."""

    name = "Http"

    def __init__(self, endpoint: str, model: str, *, token_env: str = "DAUD_LLM_TOKEN",
                 attempts: int = 3, backoff: tuple[float, ...] = (1.0, 2.0, 4.0),
                 max_in_flight: int = 4, timeout: float = 60.0,
                 sleep: Callable[[float], None] = time.sleep, session: requests.Session | None = None):
        if not endpoint:
            raise ConfigError("llm endpoint is required for the http backend")
        self.endpoint = endpoint
        self.model = model
        self.token_env = token_env
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self.calls = 0
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._session = session or requests.Session()

    def _payload(self, req: ChatRequest) -> dict:
        messages = []
        if req.system_text:
            messages.append({"role": "system", "content": req.system_text})
        messages.append({"role": "user", "content": req.user_text})
        return {"model": self.model, "messages": messages,
                "temperature": req.temperature, "max_tokens": req.max_tokens}

    def generate(self, req: ChatRequest) -> str:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                self._sleep(self.backoff[min(attempt - 1, len(self.backoff) - 1)])
            self.calls += 1
            try:
                with self._slots:
                    resp = self._session.post(self.endpoint, json=self._payload(req),
                                              headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = BackendUnavailable(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return _extract_text(resp)
        raise BackendUnavailable(f"{self.endpoint} unreachable after {self.attempts} attempts: {last}")


def _extract_text(resp) -> str:
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"unexpected completion payload: {exc}") from exc
    if not isinstance(content, str):
        raise MalformedResponse(f"completion content is {type(content).__name__}, not text")
    return content


def complete(req: ChatRequest, backend: Backend) -> ChatResponse:
    text = backend.generate(req)
    if not isinstance(text, str):
        raise MalformedResponse(f"backend returned {type(text).__name__}, not text")
    return ChatResponse(text=text, backend=backend.name, cached=False, request_digest=req.digest)


def _checksum(request: dict, response: dict) -> str:
    blob = json.dumps({"request": request, "response": response}, ensure_ascii=False,
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseCache:
    """Write-once, content-addressed store: ``<dir>/<first-2-hex>/<digest>.json``."""

    def __init__(self, cache_dir: str | Path):
        self.root = Path(cache_dir)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, digest: str) -> Path:
        return self.root / digest[:2] / f"{digest}.json"

    def get(self, req: ChatRequest) -> ChatResponse | None:
        digest = req.digest
        path = self.path_for(digest)
        if not path.exists():
            return None
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            ok = doc["checksum"] == _checksum(doc["request"], doc["response"])
        except (ValueError, KeyError, TypeError):
            ok = False
        if not ok or doc["request"] != req.canonical():
            raise CacheCorrupt(digest)
        resp = doc["response"]
        return ChatResponse(text=resp["text"], backend=resp["backend"], cached=True, request_digest=digest)

    def put(self, req: ChatRequest, resp: ChatResponse) -> None:
        path = self.path_for(req.digest)
        if path.exists():
            return
        request = req.canonical()
        response = {"text": resp.text, "backend": resp.backend}
        doc = {"request": request, "response": response,
               "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
               "checksum": _checksum(request, response)}
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, ensure_ascii=False, sort_keys=True)
        os.replace(tmp, path)

    def __len__(self):
        return sum(1 for _ in self.root.glob("*/*.json"))


def cached_complete(req: ChatRequest, backend: Backend, cache: ResponseCache | str | Path | None) -> ChatResponse:
    if cache is None:
        return complete(req, backend)
    if not isinstance(cache, ResponseCache):
        cache = ResponseCache(cache)
    hit = cache.get(req)
    if hit is not None:
        return hit
    resp = complete(req, backend)
    cache.put(req, resp)
    return resp
