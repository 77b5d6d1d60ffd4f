"""Completion backends with token and cost accounting.

``MockLLM`` answers from a fixture map keyed by the query signature in the
prompt; ``HttpLLM`` speaks a chat-completion JSON API.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Mapping, Optional, Protocol

from .lexicon import lemma_noun, lemma_verb

log = logging.getLogger(__name__)

API_KEY_ENV = "COOK2LTL_LLM_API_KEY"


class LLMError(RuntimeError):
    def __init__(self, message: str, retry_after: Optional[float] = None, status: Optional[int] = None):
        super().__init__(message)
        self.retry_after = retry_after
        self.status = status


class LLMAuthError(LLMError):
    pass


class LLMQuotaError(LLMError):
    pass


class LLMNetworkError(LLMError):
    pass


class MissingFixture(LLMError):
    def __init__(self, key: str):
        super().__init__(f"no fixture for {key!r}")
        self.key = key


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 256
    temperature: float = 0.0
    stop: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency_ms: int = 0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")


@dataclass(frozen=True)
class CostModel:
    usd_per_1k_prompt_tokens: Decimal = Decimal("0.0015")
    usd_per_1k_completion_tokens: Decimal = Decimal("0.002")

    def __post_init__(self):
        object.__setattr__(self, "usd_per_1k_prompt_tokens", Decimal(str(self.usd_per_1k_prompt_tokens)))
        object.__setattr__(self, "usd_per_1k_completion_tokens", Decimal(str(self.usd_per_1k_completion_tokens)))
        if self.usd_per_1k_prompt_tokens < 0 or self.usd_per_1k_completion_tokens < 0:
            raise ValueError("prices must be non-negative")

    def cost(self, prompt_tokens: int, completion_tokens: int) -> Decimal:
        return (prompt_tokens * self.usd_per_1k_prompt_tokens
                + completion_tokens * self.usd_per_1k_completion_tokens) / 1000


@dataclass(frozen=True)
class UsageReport:
    calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost_usd: Decimal = Decimal(0)
    wall_ms: int = 0

    def __add__(self, other: "UsageReport") -> "UsageReport":
        return UsageReport(self.calls + other.calls, self.prompt_tokens + other.prompt_tokens,
                           self.completion_tokens + other.completion_tokens, self.cost_usd + other.cost_usd,
                           self.wall_ms + other.wall_ms)


def accumulate_usage(responses: Iterable[CompletionResponse], model: CostModel = CostModel()) -> UsageReport:
    total = UsageReport()
    for r in responses:
        total = total + UsageReport(1, r.prompt_tokens, r.completion_tokens,
                                    model.cost(r.prompt_tokens, r.completion_tokens), r.latency_ms)
    return total


class LLMClient(Protocol):
    def complete(self, req: CompletionRequest) -> CompletionResponse: ...


class UsageMeter:
    """Thread-safe record of every response a client returned."""

    def __init__(self):
        self._lock = threading.Lock()
        self._responses: list[CompletionResponse] = []

    def record(self, resp: CompletionResponse):
        with self._lock:
            self._responses.append(resp)

    @property
    def calls(self) -> int:
        with self._lock:
            return len(self._responses)

    def responses(self) -> list[CompletionResponse]:
        with self._lock:
            return list(self._responses)

    def report(self, model: CostModel = CostModel()) -> UsageReport:
        return accumulate_usage(self.responses(), model)


class MeteredClient:
    """Wraps a client and records usage of every successful completion."""

    def __init__(self, inner: LLMClient, meter: Optional[UsageMeter] = None):
        self.inner = inner
        self.meter = meter or UsageMeter()

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        resp = self.inner.complete(req)
        self.meter.record(resp)
        return resp


_SIGNATURE = re.compile(r"^\s*def\s+([A-Za-z_]\w*)\s*\(([^)]*)\)\s*:", re.MULTILINE)


def query_signature(prompt: str) -> tuple[str, list[str]]:
    """Name and parameters of the last function definition in a prompt."""
    matches = list(_SIGNATURE.finditer(prompt))
    if not matches:
        raise LLMError("prompt contains no function signature")
    m = matches[-1]
    params = [p.strip() for p in m.group(2).split(",") if p.strip()]
    return m.group(1), params


def fixture_keys(prompt: str) -> list[str]:
    """Lookup keys for a prompt, most specific first: ``verb/noun`` then ``verb``."""
    name, params = query_signature(prompt)
    verb = lemma_verb(name)
    keys = []
    if params:
        words = [w for w in params[0].split("_") if w]
        if words:
            keys.append(f"{verb}/{lemma_noun(words[-1])}")
    keys.append(verb)
    return keys


def word_count(text: str) -> int:
    return len(text.split())


class MockLLM:
    """Deterministic backend answering from ``{"verb[/noun]": body}`` fixtures."""

    def __init__(self, fixtures: Mapping[str, str], latency_injection_ms: int = 0):
        self.fixtures = dict(fixtures)
        self.latency_injection_ms = latency_injection_ms

    @classmethod
    def from_file(cls, path: str | Path, latency_injection_ms: int = 0) -> "MockLLM":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")), latency_injection_ms)

    def lookup(self, prompt: str) -> str:
        keys = fixture_keys(prompt)
        for key in keys:
            if key in self.fixtures:
                return self.fixtures[key]
        raise MissingFixture(keys[0])

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        text = self.lookup(req.prompt)
        if self.latency_injection_ms:
            time.sleep(self.latency_injection_ms / 1000)
        return CompletionResponse(text, word_count(req.prompt), word_count(text), self.latency_injection_ms)


class HttpLLM:
    """Chat-completion client (bearer auth, one fixed-backoff retry)."""

    def __init__(self, base_url: str, model: str = "gpt-3.5-turbo", api_key: Optional[str] = None,
                 path: str = "/v1/chat/completions", timeout_s: float = 60.0, backoff_s: float = 2.0):
        self.url = base_url.rstrip("/") + path
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout_s = timeout_s
        self.backoff_s = backoff_s

    def _payload(self, req: CompletionRequest) -> bytes:
        body = {"model": self.model, "messages": [{"role": "user", "content": req.prompt}],
                "max_tokens": req.max_tokens, "temperature": req.temperature}
        if req.stop:
            body["stop"] = list(req.stop)
        return json.dumps(body).encode("utf-8")

    def _once(self, req: CompletionRequest) -> CompletionResponse:
        if not self.api_key:
            raise LLMAuthError(f"no API key; set {API_KEY_ENV}")
        request = urllib.request.Request(self.url, data=self._payload(req), method="POST", headers={
            "Content-Type": "application/json", "Authorization": f"Bearer {self.api_key}"})
        start = time.perf_counter()
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_s) as resp:
                data = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            retry_after = _retry_after(exc.headers.get("Retry-After") if exc.headers else None)
            detail = exc.read().decode("utf-8", "replace")[:200]
            if exc.code in (401, 403):
                raise LLMAuthError(f"HTTP {exc.code}: {detail}", retry_after, exc.code) from exc
            if exc.code == 429:
                raise LLMQuotaError(f"HTTP 429: {detail}", retry_after, exc.code) from exc
            raise LLMError(f"HTTP {exc.code}: {detail}", retry_after, exc.code) from exc
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise LLMNetworkError(f"request to {self.url} failed: {exc}") from exc
        latency = int((time.perf_counter() - start) * 1000)
        try:
            text = data["choices"][0]["message"]["content"]
            usage = data.get("usage", {})
        except (KeyError, IndexError, TypeError) as exc:
            raise LLMError(f"unexpected response shape: {str(data)[:200]}") from exc
        return CompletionResponse(text, int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0)),
                                  latency)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        try:
            return self._once(req)
        except LLMAuthError:
            raise
        except (LLMQuotaError, LLMNetworkError) as exc:
            wait = self.backoff_s
            log.warning("LLM request failed (%s); retrying once in %.1fs", exc, wait)
        except LLMError as exc:
            if exc.status is None or exc.status < 500:
                raise
            wait = self.backoff_s
            log.warning("LLM request failed (%s); retrying once in %.1fs", exc, wait)
        time.sleep(wait)
        return self._once(req)


def _retry_after(value: Optional[str]) -> Optional[float]:
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        return None
