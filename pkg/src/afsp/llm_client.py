"""Chat-completions client for sampling candidate translations.

Speaks the widely implemented JSON shape: POST ``{endpoint}/chat/completions``
with ``model``/``messages``/``temperature``/``top_p``/``n``/``max_tokens``,
reading ``choices[*].message.content``. A bearer token is taken from the
``AFSP_API_KEY`` environment variable when present.

Candidates are requested in one multi-choice call; endpoints that reject
``n > 1`` are retried as n sequential single-completion calls, which yields
an identical CandidateSet. Every raw completion passes through
``extract_translation``; completions that come back empty are dropped.

Transient failures (timeouts, connection errors, HTTP 5xx) are retried with
exponential backoff and jitter inside a total budget of
``(retries + 1) * timeout`` seconds. HTTP 429 honours Retry-After.

For offline runs and tests, :class:`MockClient` serves scripted candidate
lists keyed by prompt fingerprint through the same interface.
"""

from __future__ import annotations

import hashlib
import os
import random
import time
from dataclasses import dataclass, field

import requests

from .errors import (
    AllCandidatesEmpty,
    EmptyOutput,
    MalformedResponse,
    NetworkFailure,
    RateLimited,
    ScriptMiss,
)
from .prompting import extract_translation

API_KEY_ENV = "AFSP_API_KEY"


@dataclass(frozen=True)
class GenerationConfig:
    endpoint: str = "http://localhost:8000/v1"
    model: str = "default"
    n_candidates: int = 30
    temperature: float = 0.8
    top_p: float = 0.95
    max_tokens: int = 256
    timeout: float = 30.0
    retries: int = 2
    top_k: int | None = None
    max_in_flight: int = 4

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")


@dataclass(frozen=True)
class CandidateSet:
    prompt_fingerprint: str
    candidates: tuple[str, ...]
    raw: tuple[dict, ...] = field(default_factory=tuple)


def fingerprint(prompt: str) -> str:
    """Hex digest identifying a prompt; keys mock scripts and audit logs."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def _finalize(
    prompt: str, raw_texts: list[str], metadata: list[dict]
) -> CandidateSet:
    """Apply extraction, drop empties, enforce the at-least-one contract."""
    candidates = []
    kept_meta = []
    for text, meta in zip(raw_texts, metadata):
        try:
            candidates.append(extract_translation(text))
            kept_meta.append(meta)
        except EmptyOutput:
            continue
    if not candidates:
        raise AllCandidatesEmpty(
            f"all {len(raw_texts)} completions were empty after extraction"
        )
    return CandidateSet(
        prompt_fingerprint=fingerprint(prompt),
        candidates=tuple(candidates),
        raw=tuple(kept_meta),
    )


class ChatCompletionsClient:
    """HTTP client for a chat-completions endpoint."""

    def __init__(self, session: requests.Session | None = None):
        self._session = session or requests.Session()

    def generate_candidates(self, prompt: str, cfg: GenerationConfig) -> CandidateSet:
        """Sample cfg.n_candidates completions for one prompt."""
        if not prompt.strip():
            raise ValueError("prompt must be non-empty")
        deadline = time.monotonic() + (cfg.retries + 1) * cfg.timeout
        if cfg.n_candidates == 1:
            texts, meta = self._request(prompt, cfg, n=1, deadline=deadline)
        else:
            try:
                texts, meta = self._request(
                    prompt, cfg, n=cfg.n_candidates, deadline=deadline
                )
            except _MultiChoiceRejected:
                texts, meta = [], []
                for _ in range(cfg.n_candidates):
                    t, m = self._request(prompt, cfg, n=1, deadline=deadline)
                    texts.extend(t)
                    meta.extend(m)
        return _finalize(prompt, texts, meta)

    def _request(
        self, prompt: str, cfg: GenerationConfig, n: int, deadline: float
    ) -> tuple[list[str], list[dict]]:
        body = {
            "model": cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "top_p": cfg.top_p,
            "n": n,
            "max_tokens": cfg.max_tokens,
        }
        if cfg.top_k is not None:
            body["top_k"] = cfg.top_k
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        url = cfg.endpoint.rstrip("/") + "/chat/completions"

        last_error: Exception | None = None
        retry_after: float | None = None
        for attempt in range(cfg.retries + 1):
            if attempt > 0:
                delay = min(0.25 * (2 ** (attempt - 1)) + random.uniform(0, 0.1), cfg.timeout)
                delay = min(delay, max(0.0, deadline - time.monotonic()))
                if delay > 0:
                    time.sleep(delay)
            if time.monotonic() >= deadline:
                break
            try:
                resp = self._session.post(
                    url, json=body, headers=headers, timeout=cfg.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code == 429:
                retry_after = _parse_retry_after(resp.headers.get("Retry-After"))
                last_error = RateLimited("endpoint returned 429", retry_after)
                if retry_after is not None:
                    time.sleep(min(retry_after, max(0.0, deadline - time.monotonic())))
                continue
            if resp.status_code >= 500:
                last_error = NetworkFailure(f"HTTP {resp.status_code}: {resp.text[:200]}")
                continue
            if resp.status_code >= 400:
                if n > 1:
                    raise _MultiChoiceRejected()
                raise NetworkFailure(
                    f"endpoint rejected request: HTTP {resp.status_code}: {resp.text[:200]}"
                )
            return _parse_choices(resp)
        if isinstance(last_error, RateLimited):
            raise last_error
        raise NetworkFailure(
            f"request failed after {cfg.retries + 1} attempts: {last_error}"
        )


class _MultiChoiceRejected(Exception):
    """Internal: endpoint refused a request with n > 1."""


def _parse_retry_after(value: str | None) -> float | None:
    if value is None:
        return None
    try:
        return max(0.0, float(value))
    except ValueError:
        return None


def _parse_choices(resp: requests.Response) -> tuple[list[str], list[dict]]:
    try:
        payload = resp.json()
        choices = payload["choices"]
        texts = [str(choice["message"]["content"]) for choice in choices]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedResponse(f"cannot parse chat-completions response: {exc}") from exc
    meta = [
        {k: v for k, v in choice.items() if k != "message"} for choice in choices
    ]
    return texts, meta


class MockClient:
    """Deterministic client serving scripted candidates by prompt fingerprint."""

    def __init__(self, script: dict[str, list[str]]):
        self.script = dict(script)

    @classmethod
    def from_prompts(cls, prompt_to_candidates: dict[str, list[str]]) -> "MockClient":
        return cls({fingerprint(p): c for p, c in prompt_to_candidates.items()})

    def generate_candidates(self, prompt: str, cfg: GenerationConfig) -> CandidateSet:
        fp = fingerprint(prompt)
        if fp not in self.script:
            raise ScriptMiss(f"no scripted candidates for prompt fingerprint {fp[:12]}...")
        scripted = self.script[fp][: cfg.n_candidates]
        return _finalize(prompt, list(scripted), [{} for _ in scripted])


def generate_candidates(prompt: str, cfg: GenerationConfig) -> CandidateSet:
    """One-shot helper using a fresh HTTP client."""
    return ChatCompletionsClient().generate_candidates(prompt, cfg)


class EndpointTranslator:
    """Plain translator over a chat-completions endpoint, single candidate.

    Satisfies the degeneration module's translator contract for real
    back-translation round trips.
    """

    def __init__(self, cfg: GenerationConfig, client: ChatCompletionsClient | None = None):
        self.cfg = GenerationConfig(
            endpoint=cfg.endpoint,
            model=cfg.model,
            n_candidates=1,
            temperature=cfg.temperature,
            top_p=cfg.top_p,
            max_tokens=cfg.max_tokens,
            timeout=cfg.timeout,
            retries=cfg.retries,
            top_k=cfg.top_k,
        )
        self.client = client or ChatCompletionsClient()

    def __call__(self, text: str, from_lang: str, to_lang: str) -> str:
        prompt = (
            f"Translate the following text from {from_lang} to {to_lang}. "
            f"Provide only the translation.\n{text}"
        )
        return self.client.generate_candidates(prompt, self.cfg).candidates[0]
