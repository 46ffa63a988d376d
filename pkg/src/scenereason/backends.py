"""LLM backends: a chat-completion HTTP client and a scripted stand-in.

Sessions only need one capability, complete(messages) -> text.  Backends
must tolerate concurrent complete() calls from independent sessions.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from typing import Sequence

import requests


class BackendUnavailable(Exception):
    """Transport failure that survived the configured retries."""


class AuthError(BackendUnavailable):
    """The endpoint rejected the credential."""


class ScriptExhausted(BackendUnavailable):
    """A scripted backend ran out of canned turns."""


class LlmBackend:
    def complete(self, messages: Sequence) -> str:
        raise NotImplementedError


class ScriptedBackend(LlmBackend):
    """Replays a fixed list of turns; deterministic and thread-safe."""

    def __init__(self, turns: Sequence[str]):
        if not turns:
            raise ValueError("scripted backend needs at least one turn")
        self._turns = list(turns)
        self._next = 0
        self._lock = threading.Lock()

    def complete(self, messages: Sequence) -> str:
        with self._lock:
            if self._next >= len(self._turns):
                raise ScriptExhausted(
                    f"script exhausted after {len(self._turns)} turns"
                )
            turn = self._turns[self._next]
            self._next += 1
            return turn


def scripted_backend(turns: Sequence[str]) -> ScriptedBackend:
    return ScriptedBackend(turns)


@dataclass(frozen=True)
class HttpBackendConfig:
    base_url: str
    model: str = "gpt-3.5-turbo-16k"
    temperature: float = 0.0
    timeout: float = 60.0
    retries: int = 2
    api_key_env: str = "OPENAI_API_KEY"
    backoff_base: float = 0.5  # seconds; doubles per retry


class HttpBackend(LlmBackend):
    """POSTs {model, temperature, messages} to <base_url>/chat/completions."""

    def __init__(self, config: HttpBackendConfig):
        if "://" not in config.base_url:
            raise ValueError(f"base_url must be a URL, got {config.base_url!r}")
        self.config = config
        self.url = config.base_url.rstrip("/")
        if not self.url.endswith("/chat/completions"):
            self.url += "/chat/completions"

    def complete(self, messages: Sequence) -> str:
        cfg = self.config
        payload = {
            "model": cfg.model,
            "temperature": cfg.temperature,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(cfg.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        for attempt in range(cfg.retries + 1):
            if attempt:
                time.sleep(cfg.backoff_base * 2 ** (attempt - 1))
            try:
                resp = requests.post(
                    self.url, json=payload, headers=headers, timeout=cfg.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"credential rejected with HTTP {resp.status_code}")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = BackendUnavailable(
                    f"HTTP {resp.status_code}: {resp.text[:200]}"
                )
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendUnavailable(f"malformed completion response: {exc}") from None
        raise BackendUnavailable(
            f"gave up after {cfg.retries + 1} attempts: {last_error}"
        )


def http_backend(config: HttpBackendConfig) -> HttpBackend:
    return HttpBackend(config)
