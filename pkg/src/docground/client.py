"""Transport layer for querying VLM endpoints, with record/replay.

Two wire flavors are supported: OpenAI-style chat completions and
Anthropic-style messages. Page images ride along base64-encoded inline; the
transcript key is a digest of (endpoint name, prompt text, raw image bytes),
so replayed evaluations detect any prompt or image drift as a hard miss.

Sampling is pinned to temperature 0 with a 512-token cap to keep live runs
as reproducible as the provider allows.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import requests

from .errors import ConfigError, ReplayMissError, TransportError

logger = logging.getLogger(__name__)

FLAVORS = ("openai_chat", "anthropic_messages")
MAX_TOKENS = 512
TEMPERATURE = 0.0
_RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})

_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".webp": "image/webp",
    ".gif": "image/gif",
}


@dataclass(frozen=True)
class ModelEndpoint:
    name: str
    base_url: str
    flavor: str
    auth_env: str | None = None
    max_concurrency: int = 4
    timeout: float = 60.0
    model: str | None = None  # wire-level model id; defaults to name

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ConfigError(f"unknown endpoint flavor {self.flavor!r}")
        if self.max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")

    @property
    def model_id(self) -> str:
        return self.model or self.name


@dataclass(frozen=True)
class Transcript:
    key: str
    endpoint: str
    response: str
    latency_ms: int
    ts: str

    def to_json_dict(self) -> dict:
        return {
            "key": self.key,
            "endpoint": self.endpoint,
            "response": self.response,
            "latency_ms": self.latency_ms,
            "ts": self.ts,
        }


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff_base: float = 1.0  # doubled per retry: 1s, 2s, 4s, ...
    jitter: bool = True


def transcript_key(endpoint_name: str, prompt: str, image_bytes: bytes) -> str:
    """Deterministic digest of (endpoint name, prompt text, image digest)."""
    image_digest = hashlib.sha256(image_bytes).hexdigest()
    h = hashlib.sha256()
    h.update(endpoint_name.encode("utf-8"))
    h.update(b"\x00")
    h.update(prompt.encode("utf-8"))
    h.update(b"\x00")
    h.update(image_digest.encode("ascii"))
    return h.hexdigest()


class TranscriptStore:
    """Newline-delimited JSON store of transcripts keyed by digest.

    Single writer, any number of readers. Appends are flushed immediately so
    a crashed run keeps everything already recorded.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, Transcript] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    t = Transcript(
                        key=obj["key"],
                        endpoint=obj["endpoint"],
                        response=obj["response"],
                        latency_ms=obj["latency_ms"],
                        ts=obj["ts"],
                    )
                    self._entries[t.key] = t

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> Transcript | None:
        return self._entries.get(key)

    def append(self, transcript: Transcript) -> None:
        with self._lock:
            self._entries[transcript.key] = transcript
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(transcript.to_json_dict(), ensure_ascii=False) + "\n")


def _media_type(image_path: Path) -> str:
    return _MEDIA_TYPES.get(image_path.suffix.lower(), "image/png")


def _build_request(endpoint: ModelEndpoint, prompt: str, image_bytes: bytes, media_type: str):
    b64 = base64.b64encode(image_bytes).decode("ascii")
    base = endpoint.base_url.rstrip("/")
    if endpoint.flavor == "openai_chat":
        url = f"{base}/chat/completions"
        payload = {
            "model": endpoint.model_id,
            "temperature": TEMPERATURE,
            "max_tokens": MAX_TOKENS,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt},
                        {
                            "type": "image_url",
                            "image_url": {"url": f"data:{media_type};base64,{b64}"},
                        },
                    ],
                }
            ],
        }
    else:
        url = f"{base}/v1/messages"
        payload = {
            "model": endpoint.model_id,
            "temperature": TEMPERATURE,
            "max_tokens": MAX_TOKENS,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {
                            "type": "image",
                            "source": {
                                "type": "base64",
                                "media_type": media_type,
                                "data": b64,
                            },
                        },
                        {"type": "text", "text": prompt},
                    ],
                }
            ],
        }
    return url, payload


def _auth_headers(endpoint: ModelEndpoint) -> dict:
    if not endpoint.auth_env:
        return {}
    key = os.environ.get(endpoint.auth_env)
    if not key:
        raise ConfigError(
            f"endpoint {endpoint.name!r} requires auth but ${endpoint.auth_env} is not set"
        )
    if endpoint.flavor == "openai_chat":
        return {"Authorization": f"Bearer {key}"}
    return {"x-api-key": key, "anthropic-version": "2023-06-01"}


def _response_text(endpoint: ModelEndpoint, data: dict) -> str:
    if endpoint.flavor == "openai_chat":
        return data["choices"][0]["message"]["content"]
    return "".join(
        block.get("text", "") for block in data.get("content", []) if block.get("type") == "text"
    )


class VlmClient:
    """Thread-safe client for one endpoint with bounded in-flight requests."""

    def __init__(
        self,
        endpoint: ModelEndpoint,
        store: TranscriptStore | None = None,
        retry: RetryPolicy = RetryPolicy(),
        sleep=time.sleep,
        rng: random.Random | None = None,
    ):
        self.endpoint = endpoint
        self.store = store
        self.retry = retry
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._sem = threading.BoundedSemaphore(endpoint.max_concurrency)

    def query(self, prompt: str, image: str | Path) -> str:
        """POST the prompt plus page image; returns the model's raw text.

        Transient failures (429/5xx, timeouts, connection errors) are retried
        with exponential backoff and full jitter; anything else fails fast.
        """
        image_path = Path(image)
        image_bytes = image_path.read_bytes()
        headers = {"Content-Type": "application/json", **_auth_headers(self.endpoint)}
        url, payload = _build_request(self.endpoint, prompt, image_bytes, _media_type(image_path))

        last_error = "no attempt made"
        last_status: int | None = None
        started = time.monotonic()
        with self._sem:
            for attempt in range(1, self.retry.attempts + 1):
                if attempt > 1:
                    delay = self.retry.backoff_base * (2 ** (attempt - 2))
                    if self.retry.jitter:
                        delay = self._rng.uniform(0.0, delay)
                    logger.info(
                        "retrying %s (attempt %d/%d) after %s",
                        self.endpoint.name, attempt, self.retry.attempts, last_error,
                    )
                    self._sleep(delay)
                try:
                    resp = requests.post(
                        url, json=payload, headers=headers, timeout=self.endpoint.timeout
                    )
                except requests.RequestException as exc:
                    last_error = f"{type(exc).__name__}: {exc}"
                    last_status = None
                    continue
                if resp.status_code in _RETRYABLE_STATUS:
                    last_error = f"HTTP {resp.status_code}"
                    last_status = resp.status_code
                    continue
                if resp.status_code != 200:
                    raise TransportError(
                        f"endpoint {self.endpoint.name!r} returned HTTP {resp.status_code}: "
                        f"{resp.text[:200]}",
                        status=resp.status_code,
                    )
                text = _response_text(self.endpoint, resp.json())
                if self.store is not None:
                    latency_ms = int((time.monotonic() - started) * 1000)
                    self.store.append(
                        Transcript(
                            key=transcript_key(self.endpoint.name, prompt, image_bytes),
                            endpoint=self.endpoint.name,
                            response=text,
                            latency_ms=latency_ms,
                            ts=datetime.now(timezone.utc).isoformat(),
                        )
                    )
                return text
        raise TransportError(
            f"endpoint {self.endpoint.name!r} failed after {self.retry.attempts} attempts "
            f"(last: {last_error})",
            status=last_status,
        )


def replay_query(
    store: TranscriptStore, endpoint: ModelEndpoint, prompt: str, image: str | Path
) -> str:
    """Return the recorded response for this exact (endpoint, prompt, image).

    Never touches the network; a missing key is a hard error naming the
    digest so prompt drift surfaces immediately.
    """
    key = transcript_key(endpoint.name, prompt, Path(image).read_bytes())
    t = store.get(key)
    if t is None:
        raise ReplayMissError(f"no transcript for key {key}", key=key)
    return t.response
