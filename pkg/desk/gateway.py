# desk/gateway.py
"""
Uniform access to chat-completion backends.

Every call goes through LLMGateway.complete(): the content-addressed cache is
consulted first, a miss is admitted by the backend's rate limiter, sent with
bounded exponential backoff, and the raw text is stored byte-exactly so that a
warm cache replays a whole run without touching the network.
"""
from __future__ import annotations

import hashlib
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import NewType, Optional, Union

import requests
from pydantic import BaseModel

from .errors import BackendUnavailable, EmptyResponse, RateLimited

logger = logging.getLogger(__name__)

BackendId = NewType("BackendId", str)


@dataclass(frozen=True)
class Sampling:
    temperature: float = 0.0
    max_output: int = 512

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output <= 0:
            raise ValueError("max_output must be > 0")


@dataclass(frozen=True)
class CompletionRequest:
    backend: BackendId
    prompt: str
    sampling: Sampling = field(default_factory=Sampling)

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    latency: float
    cache_hit: bool
    cache_key: str
    model: str = ""


def cache_key(req: CompletionRequest) -> str:
    """sha256 over backend name, prompt bytes and sampling parameters."""
    h = hashlib.sha256()
    for part in (req.backend, req.prompt, repr(float(req.sampling.temperature)), str(req.sampling.max_output)):
        data = part.encode("utf-8")
        # length-prefixed so no two field splits can collide
        h.update(len(data).to_bytes(8, "big"))
        h.update(data)
    return h.hexdigest()


class CacheIndexEntry(BaseModel):
    key: str
    backend: str
    model: str
    temperature: float
    max_output: int
    prompt_sha256: str
    prompt_head: str
    created_at: str


class ResponseCache:
    """
    Append-only on-disk store: one blob per key under blobs/<aa>/<key>.txt
    plus index.jsonl, a human-readable line per stored key.
    First writer wins; later writes of an existing key are no-ops.
    """

    def __init__(self, cache_dir: Union[str, Path]):
        self.cache_dir = Path(cache_dir)
        self.blob_dir = self.cache_dir / "blobs"
        self.index_path = self.cache_dir / "index.jsonl"
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _blob(self, key: str) -> Path:
        return self.blob_dir / key[:2] / f"{key}.txt"

    def __contains__(self, key: str) -> bool:
        return self._blob(key).exists()

    def get(self, key: str) -> Optional[str]:
        path = self._blob(key)
        try:
            return path.read_bytes().decode("utf-8")
        except FileNotFoundError:
            return None

    def put(self, key: str, text: str, req: CompletionRequest, model: str = "") -> bool:
        path = self._blob(key)
        with self._lock:
            if path.exists():
                return False
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            with os.fdopen(fd, "wb") as fh:
                fh.write(text.encode("utf-8"))
            os.replace(tmp, path)
            entry = CacheIndexEntry(
                key=key,
                backend=req.backend,
                model=model,
                temperature=req.sampling.temperature,
                max_output=req.sampling.max_output,
                prompt_sha256=hashlib.sha256(req.prompt.encode("utf-8")).hexdigest(),
                prompt_head=req.prompt[:120],
                created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            )
            with open(self.index_path, "a", encoding="utf-8") as fh:
                fh.write(entry.model_dump_json() + "\n")
        return True

    def entries(self):
        if not self.index_path.exists():
            return []
        with open(self.index_path, encoding="utf-8") as fh:
            return [CacheIndexEntry.model_validate_json(line) for line in fh if line.strip()]


# --- backends ---

class TransientBackendError(Exception):
    """Worth retrying: connection trouble or 5xx."""


class RateLimitHit(Exception):
    pass


class Backend:
    kind = "abstract"

    def __init__(self, name: str):
        self.name = BackendId(name)
        self.calls = 0
        self._calls_lock = threading.Lock()

    def _tick(self):
        with self._calls_lock:
            self.calls += 1

    def send(self, prompt: str, sampling: Sampling) -> tuple[str, str]:
        """Return (text, reported model id)."""
        raise NotImplementedError


class ScriptedBackend(Backend):
    """
    Deterministic backend for tests and dry runs. Rules are tried in order,
    the first matcher that accepts the prompt supplies the reply; a plain
    string matches as a substring, "" matches everything. No match -> "".
    """

    kind = "scripted"

    def __init__(self, name: str, rules):
        super().__init__(name)
        self.rules = list(rules.items()) if isinstance(rules, dict) else list(rules)

    @staticmethod
    def _accepts(matcher, prompt: str) -> bool:
        if isinstance(matcher, re.Pattern):
            return matcher.search(prompt) is not None
        if callable(matcher):
            return bool(matcher(prompt))
        return matcher in prompt

    def send(self, prompt, sampling):
        self._tick()
        for matcher, reply in self.rules:
            if self._accepts(matcher, prompt):
                return reply, "scripted"
        return "", "scripted"


class HTTPBackend(Backend):
    def __init__(self, name, base_url, model, api_key, timeout=60.0, session=None):
        super().__init__(name)
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.session = session or requests.Session()

    def _post(self, url, body, headers=None, params=None) -> dict:
        try:
            resp = self.session.post(url, json=body, headers=headers, params=params, timeout=self.timeout)
        except (requests.exceptions.InvalidURL, requests.exceptions.InvalidSchema,
                requests.exceptions.MissingSchema, requests.TooManyRedirects) as e:
            raise BackendUnavailable(self.name, f"request cannot succeed: {e}")
        except requests.RequestException as e:
            raise TransientBackendError(f"{type(e).__name__}: {e}")
        if resp.status_code == 429:
            raise RateLimitHit(f"HTTP 429 from {self.name}")
        if resp.status_code in (401, 403):
            raise BackendUnavailable(self.name, f"authentication failed (HTTP {resp.status_code})")
        if resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendUnavailable(self.name, f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
        except (ValueError, requests.RequestException):
            raise TransientBackendError("response body is not JSON")
        if not isinstance(data, dict):
            raise BackendUnavailable(self.name, f"expected a JSON object, got {type(data).__name__}")
        return data


class ChatCompletionsBackend(HTTPBackend):
    """OpenAI-style POST {base_url}/chat/completions."""

    kind = "chat_completions"

    def send(self, prompt, sampling):
        self._tick()
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": sampling.temperature,
            "max_tokens": sampling.max_output,
        }
        data = self._post(f"{self.base_url}/chat/completions", body,
                          headers={"Authorization": f"Bearer {self.api_key}"})
        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError):
            text = ""
        if not isinstance(text, str):
            raise BackendUnavailable(self.name, f"message content is {type(text).__name__}, not text")
        return text, str(data.get("model") or self.model)


class GenerateContentBackend(HTTPBackend):
    """Google-style POST {base_url}/models/{model}:generateContent."""

    kind = "generate_content"

    def send(self, prompt, sampling):
        self._tick()
        body = {
            "contents": [{"role": "user", "parts": [{"text": prompt}]}],
            "generationConfig": {"temperature": sampling.temperature, "maxOutputTokens": sampling.max_output},
        }
        data = self._post(f"{self.base_url}/models/{self.model}:generateContent", body,
                          params={"key": self.api_key})
        try:
            parts = data["candidates"][0]["content"]["parts"]
            text = "".join(p.get("text", "") for p in parts)
        except (KeyError, IndexError, TypeError, AttributeError):
            text = ""
        return text, str(data.get("modelVersion") or self.model)


class RateLimiter:
    """Serializes admission so calls to one backend are at least 60/rpm seconds apart."""

    def __init__(self, requests_per_minute=None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / requests_per_minute if requests_per_minute else 0.0
        self._clock = clock
        self._sleep = sleep
        self._next = 0.0
        self._lock = threading.Lock()

    def admit(self):
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            wait = self._next - now
            if wait > 0:
                self._sleep(wait)
                now = self._clock()
            self._next = max(now, self._next) + self.interval


@dataclass
class RetryPolicy:
    max_attempts: int = 5
    initial_delay: float = 1.0
    backoff_factor: float = 2.0
    max_delay: float = 60.0


class LLMGateway:
    def __init__(self, cache: ResponseCache, retry: RetryPolicy = None, offline=False, sleep=time.sleep):
        self.cache = cache
        self.retry = retry or RetryPolicy()
        self.offline = offline
        self._sleep = sleep
        self._backends: dict[str, Backend] = {}
        self._limiters: dict[str, RateLimiter] = {}
        self._stats_lock = threading.Lock()
        self.stats = {"remote_calls": 0, "cache_hits": 0, "cache_misses": 0}
        self.models: dict[str, str] = {}

    def register(self, backend: Backend, requests_per_minute=None) -> BackendId:
        self._backends[backend.name] = backend
        self._limiters[backend.name] = RateLimiter(requests_per_minute, sleep=self._sleep)
        return backend.name

    def register_scripted(self, responses, name="scripted") -> BackendId:
        """
        responses: mapping or list of (matcher, reply) pairs, tried in insertion order.
        """
        return self.register(ScriptedBackend(name, responses))

    def backend(self, name) -> Backend:
        try:
            return self._backends[name]
        except KeyError:
            raise BackendUnavailable(name, "backend is not registered")

    def _count(self, key, n=1):
        with self._stats_lock:
            self.stats[key] += n

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        key = cache_key(req)
        started = time.monotonic()
        cached = self.cache.get(key)
        if cached is not None:
            self._count("cache_hits")
            logger.debug("cache hit %s for %s", key[:12], req.backend)
            return CompletionResponse(cached, time.monotonic() - started, True, key,
                                      self.models.get(req.backend, ""))
        self._count("cache_misses")
        if self.offline:
            raise BackendUnavailable(req.backend, f"offline and no cached response for {key[:12]}")

        backend = self.backend(req.backend)
        text, model = self._send_with_retries(backend, req)
        if not text:
            raise EmptyResponse(req.backend, "provider returned no text")
        self.models[req.backend] = model
        self.cache.put(key, text, req, model)
        # first writer wins: a concurrent identical request may have stored first
        stored = self.cache.get(key)
        return CompletionResponse(stored if stored is not None else text,
                                  time.monotonic() - started, False, key, model)

    def _send_with_retries(self, backend: Backend, req: CompletionRequest):
        policy = self.retry
        delay = policy.initial_delay
        last = None
        for attempt in range(1, policy.max_attempts + 1):
            self._limiters[backend.name].admit()
            self._count("remote_calls")
            try:
                return backend.send(req.prompt, req.sampling)
            except RateLimitHit as e:
                last = RateLimited(backend.name, f"{e} after {attempt} attempt(s)")
            except TransientBackendError as e:
                last = BackendUnavailable(backend.name, f"{e} after {attempt} attempt(s)")
            if attempt < policy.max_attempts:
                logger.warning("%s failed (attempt %d/%d), retrying in %.2fs: %s",
                               backend.name, attempt, policy.max_attempts, delay, last)
                self._sleep(delay)
                delay = min(delay * policy.backoff_factor, policy.max_delay)
        raise last
