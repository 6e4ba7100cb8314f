"""Provider-agnostic completion gateway with record/replay cassettes.

Every request is canonicalized into a stable digest over (model_id,
prompt_text, temperature, top_p, max_tokens).  A cassette is a JSONL
file of digest -> response records:

* ``record`` calls the provider and appends a record per completion.
* ``replay`` answers purely from the cassette; a missing digest raises
  CassetteMiss and no provider is ever touched.
* ``live`` calls the provider without writing anything.

Strict mode (the default) refuses any request that is not greedy
decoding (temperature 0, top_p 1.0), since sampled responses would make
recorded runs unrepeatable.  Transport failures are retried with
exponential backoff up to three attempts; malformed response content is
never retried because parsers downstream must see it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

from .errors import (
    CassetteMiss,
    ConfigViolation,
    MissingCredentials,
    ProviderError,
    ProviderTransportError,
)

logger = logging.getLogger(__name__)

MODES = ("live", "record", "replay")

API_URL_VAR = "TRIPLEKIT_API_URL"
API_KEY_VAR = "TRIPLEKIT_API_KEY"

Provider = Callable[["CompletionRequest"], str]


@dataclass(frozen=True)
class CompletionRequest:
    """One completion call, fully described by five fields."""

    model_id: str
    prompt_text: str
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError("temperature must be in [0, 2]")
        if not (0.0 < self.top_p <= 1.0):
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


def request_digest(request: CompletionRequest) -> str:
    """Stable sha256 digest of the canonical JSON form of a request."""
    canonical = json.dumps(
        {
            "model_id": request.model_id,
            "prompt_text": request.prompt_text,
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionRecord:
    """One cassette line: what was asked (by digest) and what came back."""

    request_digest: str
    response_text: str
    model_id: str
    timestamp: str


def read_cassette(path: str | Path) -> dict[str, str]:
    """Load digest -> response from a cassette; later records win."""
    responses: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                responses[rec["request_digest"]] = rec["response_text"]
    return responses


class LLMGateway:
    """Completion front door; see the module docstring for the modes."""

    def __init__(
        self,
        mode: str,
        provider: Provider | None = None,
        cassette_path: str | Path | None = None,
        strict: bool = True,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        max_parallel: int = 4,
        sleeper: Callable[[float], None] = time.sleep,
    ) -> None:
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if mode in ("live", "record") and provider is None:
            raise MissingCredentials(f"{mode} mode needs a provider")
        if mode in ("record", "replay") and cassette_path is None:
            raise ValueError(f"{mode} mode needs a cassette path")
        self.mode = mode
        self.provider = provider
        self.cassette_path = Path(cassette_path) if cassette_path else None
        self.strict = strict
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.max_parallel = max_parallel
        self._sleep = sleeper
        self._write_lock = threading.Lock()
        self._responses: dict[str, str] = {}
        if mode == "replay":
            assert self.cassette_path is not None
            if not self.cassette_path.exists():
                raise CassetteMiss(f"cassette not found: {self.cassette_path}")
            self._responses = read_cassette(self.cassette_path)
        elif mode == "record" and self.cassette_path is not None and self.cassette_path.exists():
            # Appending to an existing cassette extends it; replay uses the
            # newest record per digest.
            self._responses = read_cassette(self.cassette_path)

    def complete(self, request: CompletionRequest) -> str:
        if self.strict and (request.temperature != 0.0 or request.top_p != 1.0):
            raise ConfigViolation(
                "strict mode requires greedy decoding (temperature=0, top_p=1.0); "
                f"got temperature={request.temperature}, top_p={request.top_p}"
            )
        digest = request_digest(request)
        if self.mode == "replay":
            try:
                return self._responses[digest]
            except KeyError:
                raise CassetteMiss(
                    f"no cassette record for digest {digest[:12]} (model {request.model_id})"
                ) from None
        response = self._call_with_retry(request)
        if self.mode == "record":
            self._append_record(digest, request, response)
        return response

    def complete_many(self, requests: Mapping[str, CompletionRequest]) -> dict[str, str]:
        """Complete a keyed batch; results come back under the same keys.

        Runs up to ``max_parallel`` requests in flight.  Replay batches
        stay deterministic because responses depend only on digests.
        """
        if not requests:
            return {}
        with ThreadPoolExecutor(max_workers=self.max_parallel) as pool:
            futures = {key: pool.submit(self.complete, req) for key, req in requests.items()}
            return {key: future.result() for key, future in futures.items()}

    def _call_with_retry(self, request: CompletionRequest) -> str:
        assert self.provider is not None
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                return self.provider(request)
            except ProviderTransportError as exc:
                last = exc
                if attempt + 1 < self.max_attempts:
                    delay = self.backoff_base * (2**attempt)
                    logger.warning(
                        "transport error (attempt %d/%d), retrying in %.1fs: %s",
                        attempt + 1,
                        self.max_attempts,
                        delay,
                        exc,
                    )
                    self._sleep(delay)
            except Exception as exc:  # non-transport faults are not retried
                raise ProviderError(f"provider failed: {exc}") from exc
        raise ProviderError(
            f"provider failed after {self.max_attempts} attempts: {last}"
        ) from last

    def _append_record(self, digest: str, request: CompletionRequest, response: str) -> None:
        assert self.cassette_path is not None
        record = CompletionRecord(
            request_digest=digest,
            response_text=response,
            model_id=request.model_id,
            timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        )
        line = json.dumps(
            {
                "request_digest": record.request_digest,
                "response_text": record.response_text,
                "model_id": record.model_id,
                "timestamp": record.timestamp,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        with self._write_lock:
            self.cassette_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.cassette_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
            self._responses[digest] = response


def provider_from_env(env: Mapping[str, str] | None = None) -> Provider:
    """Build an HTTP provider from TRIPLEKIT_API_URL / TRIPLEKIT_API_KEY.

    The endpoint receives a JSON body with the five request fields and
    must answer with JSON carrying a ``text`` field.  Network failures
    surface as ProviderTransportError so the gateway can retry them.
    """
    env = os.environ if env is None else env
    url = env.get(API_URL_VAR, "").strip()
    key = env.get(API_KEY_VAR, "").strip()
    if not url or not key:
        raise MissingCredentials(
            f"set {API_URL_VAR} and {API_KEY_VAR} to use the live provider"
        )

    def call(request: CompletionRequest) -> str:
        body = json.dumps(
            {
                "model": request.model_id,
                "prompt": request.prompt_text,
                "temperature": request.temperature,
                "top_p": request.top_p,
                "max_tokens": request.max_tokens,
            }
        ).encode("utf-8")
        http_request = urllib.request.Request(
            url,
            data=body,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {key}",
            },
            method="POST",
        )
        try:
            with urllib.request.urlopen(http_request, timeout=120) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise ProviderTransportError(str(exc)) from exc
        try:
            return payload["text"]
        except (TypeError, KeyError) as exc:
            raise ProviderError(f"provider response missing 'text': {payload!r}") from exc

    return call
