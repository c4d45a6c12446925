"""Chat-completion gateways.

Three backends share one interface: a remote HTTP backend speaking the
``/chat/completions`` convention, a deterministic scripted backend for
tests and golden episodes, and a record/replay wrapper that caches
replies on disk keyed by a request content hash.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

from .errors import CacheMiss, GatewayError, GatewayErrorKind


class ChatGateway(Protocol):
    def complete(self, messages: list[dict], constraint: Optional[dict] = None,
                 temperature: float = 0.0,
                 seed: Optional[int] = None) -> str: ...


@dataclass(frozen=True)
class ScriptedEntry:
    """One canned reply; `match` optionally pins a substring that must
    appear in the last user message of the triggering request."""

    reply: str
    match: Optional[str] = None


class ScriptedGateway:
    """Fully deterministic gateway consuming canned replies in order."""

    def __init__(self, entries: list[ScriptedEntry]):
        self.entries = list(entries)
        self._cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_replies(cls, replies: list[str]) -> "ScriptedGateway":
        return cls([ScriptedEntry(reply=r) for r in replies])

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedGateway":
        """Load a transcript JSON: [{"reply": ..., "match": ...?}, ...]."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([ScriptedEntry(reply=e["reply"], match=e.get("match"))
                    for e in data])

    @property
    def consumed(self) -> int:
        return self._cursor

    def complete(self, messages: list[dict], constraint: Optional[dict] = None,
                 temperature: float = 0.0, seed: Optional[int] = None) -> str:
        _validate_messages(messages)
        with self._lock:
            if self._cursor >= len(self.entries):
                raise GatewayError(GatewayErrorKind.EXHAUSTED,
                                   f"script exhausted after {self._cursor} replies")
            entry = self.entries[self._cursor]
            if entry.match is not None:
                last_user = next(
                    (m["content"] for m in reversed(messages)
                     if m["role"] == "user"), "")
                if entry.match not in last_user:
                    raise GatewayError(
                        GatewayErrorKind.TRANSPORT,
                        f"scripted entry {self._cursor} expected substring "
                        f"{entry.match!r} in the last user message")
            self._cursor += 1
            return entry.reply


def _validate_messages(messages: list[dict]):
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[0].get("role") != "system":
        raise ValueError("first message must be a system message")


class RemoteGateway:
    """HTTP backend for an OpenAI-style chat completions endpoint.

    Transient transport failures are retried up to 3 times with
    exponential backoff. The decoding constraint is attached as
    ``response_format`` when given; callers still validate replies
    client-side regardless of server support.
    """

    def __init__(self, base_url: str, api_key: str, model: str,
                 timeout: float = 120.0, max_retries: int = 3,
                 backoff_s: float = 1.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_s = backoff_s

    def complete(self, messages: list[dict], constraint: Optional[dict] = None,
                 temperature: float = 0.0, seed: Optional[int] = None) -> str:
        import requests

        _validate_messages(messages)
        payload: dict = {
            "model": self.model,
            "messages": messages,
            "temperature": temperature,
        }
        if seed is not None:
            payload["seed"] = seed
        if constraint is not None:
            payload["response_format"] = constraint
        headers = {"Authorization": f"Bearer {self.api_key}"}

        last_exc: Optional[Exception] = None
        for attempt in range(self.max_retries):
            try:
                resp = requests.post(f"{self.base_url}/chat/completions",
                                     json=payload, headers=headers,
                                     timeout=self.timeout)
            except requests.RequestException as exc:
                last_exc = exc
                time.sleep(self.backoff_s * (2 ** attempt))
                continue
            if resp.status_code == 401:
                raise GatewayError(GatewayErrorKind.AUTH, "authentication failed")
            if resp.status_code == 429:
                last_exc = GatewayError(GatewayErrorKind.RATE_LIMITED,
                                        "rate limited")
                time.sleep(self.backoff_s * (2 ** attempt))
                continue
            if resp.status_code >= 500:
                last_exc = GatewayError(GatewayErrorKind.TRANSPORT,
                                        f"server error {resp.status_code}")
                time.sleep(self.backoff_s * (2 ** attempt))
                continue
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError) as exc:
                raise GatewayError(GatewayErrorKind.TRANSPORT,
                                   f"malformed reply: {exc}") from exc
        if isinstance(last_exc, GatewayError):
            raise last_exc
        raise GatewayError(GatewayErrorKind.TRANSPORT, str(last_exc))


def request_hash(messages: list[dict], constraint: Optional[dict],
                 temperature: float, seed: Optional[int]) -> str:
    canonical = json.dumps(
        {"messages": messages, "constraint": constraint,
         "temperature": temperature, "seed": seed},
        sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


class RecordReplayGateway:
    """Wraps another gateway, persisting every (request hash, reply) pair.

    In replay mode no inner gateway is needed; cached replies are served
    byte-identically and unseen requests raise CacheMiss.
    """

    def __init__(self, session_dir: str | Path, inner: Optional[ChatGateway] = None,
                 mode: str = "record"):
        if mode not in ("record", "replay"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "record" and inner is None:
            raise ValueError("record mode requires an inner gateway")
        self.session_dir = Path(session_dir)
        self.session_dir.mkdir(parents=True, exist_ok=True)
        self.inner = inner
        self.mode = mode

    def _path(self, digest: str) -> Path:
        return self.session_dir / f"{digest}.json"

    def complete(self, messages: list[dict], constraint: Optional[dict] = None,
                 temperature: float = 0.0, seed: Optional[int] = None) -> str:
        digest = request_hash(messages, constraint, temperature, seed)
        path = self._path(digest)
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))["reply"]
        if self.mode == "replay":
            raise CacheMiss(f"no cached reply for request {digest}")
        reply = self.inner.complete(messages, constraint, temperature, seed)
        path.write_text(json.dumps(
            {"request": {"messages": messages, "constraint": constraint,
                         "temperature": temperature, "seed": seed},
             "reply": reply}, indent=2), encoding="utf-8")
        return reply


def record_replay(session_dir: str | Path,
                  inner: Optional[ChatGateway] = None) -> RecordReplayGateway:
    """Record when an inner gateway is given, otherwise replay."""
    mode = "record" if inner is not None else "replay"
    return RecordReplayGateway(session_dir, inner=inner, mode=mode)
