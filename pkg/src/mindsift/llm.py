"""Prompt construction, chat providers, response caching, and label parsing
for zero-shot classification and mental-state summarization."""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import requests

from .caching import TextCache
from .corpus import UNPARSEABLE, Post, TaskKind
from .embeddings import _post_with_retries
from .errors import ProviderUnavailable

CLASSIFY_PREAMBLE = (
    "You are a mental health expert. Read the following social media post and "
    "determine the user's mental health condition."
)
SUMMARY_PREAMBLE = (
    "You are a mental health expert. Read the following social media post and "
    "describe the user’s mental state in one or two sentences. Focus on "
    "emotional tone, cognitive state, and any signs of mental health conditions. "
    "Avoid quoting the post verbatim."
)


def build_zero_shot_prompt(task: TaskKind, post: Post) -> str:
    labels = ", ".join(task.prompt_labels)
    return f"{CLASSIFY_PREAMBLE} Choose from the following labels: {labels}.\n\nPost: {post.text}"


def build_summary_prompt(post: Post) -> str:
    return f"{SUMMARY_PREAMBLE}\n\nPost: {post.text}"


def prompt_hash(prompt: str) -> str:
    """Key used by mock fixture files: SHA-256 of the prompt text."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def response_key(model_name: str, prompt: str) -> str:
    return hashlib.sha256((model_name + "\x00" + prompt).encode("utf-8")).hexdigest()


_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def _norm_tokens(text: str) -> list[str]:
    return [t for t in _NON_ALNUM.sub(" ", text.lower()).split() if t]


def parse_label(response: str, labels: Sequence[str]):
    """Two-stage label extraction.

    Stage 1: the normalized response (lowercase, punctuation stripped,
    whitespace collapsed) equals a normalized label. Stage 2: exactly one
    distinct label occurs as a whole-word phrase in the response. Labels are
    tried longest first and matched positions are consumed, so
    "Non-depression" never doubles as a "Depression" hit. Zero or several
    distinct labels yield UNPARSEABLE.
    """
    if not labels:
        raise ValueError("parse_label needs a non-empty label list")
    norm = [(_norm_tokens(lbl), lbl) for lbl in labels]
    resp = _norm_tokens(response)

    for toks, lbl in norm:
        if resp == toks:
            return lbl

    order = sorted(norm, key=lambda p: (-len(p[0]), -sum(len(t) for t in p[0])))
    consumed = [False] * len(resp)
    found = []
    for toks, lbl in order:
        width = len(toks)
        hits = 0
        i = 0
        while i + width <= len(resp):
            if resp[i : i + width] == toks and not any(consumed[i : i + width]):
                consumed[i : i + width] = [True] * width
                hits += 1
                i += width
            else:
                i += 1
        if hits:
            found.append(lbl)
    if len(found) == 1:
        return found[0]
    return UNPARSEABLE


@dataclass(frozen=True)
class LlmOutcome:
    post_id: str
    raw_response: str
    parsed: object  # task label, summary text, or UNPARSEABLE
    error: str | None = None


@dataclass
class ChatProviderConfig:
    kind: str = "mock"  # "mock" | "remote"
    model_name: str = "mock"
    base_url: str | None = None
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 1.0
    concurrency: int = 4
    temperature: float = 0.0
    fixture: str | None = None  # mock: path to {prompt_hash: response} JSON
    default_response: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"unknown chat provider kind {self.kind!r}")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")


class MockChatProvider:
    """Offline provider backed by a prompt-hash -> canned-response mapping."""

    def __init__(
        self,
        responses: Mapping[str, str] | None = None,
        default: str | None = None,
        model_name: str = "mock",
    ):
        self.responses = dict(responses or {})
        self.default = default
        self.model_name = model_name
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path, default: str | None = None, model_name: str = "mock"):
        mapping = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(mapping, default=default, model_name=model_name)

    @classmethod
    def for_prompts(cls, prompt_to_response: Mapping[str, str], **kwargs):
        return cls({prompt_hash(p): r for p, r in prompt_to_response.items()}, **kwargs)

    def complete(self, prompt: str) -> str:
        self.calls += 1
        key = prompt_hash(prompt)
        if key in self.responses:
            return self.responses[key]
        if self.default is not None:
            return self.default
        raise ProviderUnavailable(f"mock provider has no response for prompt hash {key[:12]}")


class RemoteChatProvider:
    """Client for the common chat-completions endpoint.

    Request: {"model", "messages": [{"role": "user", "content": prompt}],
    "temperature"}; the first choice's message content is the raw response.
    Bearer auth from LLM_API_KEY; base URL from config or LLM_BASE_URL.
    """

    def __init__(self, config: ChatProviderConfig, session=None, sleep=time.sleep):
        base = config.base_url or os.environ.get("LLM_BASE_URL")
        if not base:
            raise ValueError("remote chat provider needs a base URL (config or LLM_BASE_URL)")
        self.config = config
        self.model_name = config.model_name
        self.url = base.rstrip("/") + "/chat/completions"
        self.session = session or requests.Session()
        self._sleep = sleep
        self.api_key = os.environ.get("LLM_API_KEY")
        self.calls = 0

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self.calls += 1
        body = _post_with_retries(
            self.session,
            self.url,
            payload,
            headers,
            timeout=self.config.timeout,
            retries=self.config.retries,
            backoff=self.config.backoff,
            sleep=self._sleep,
        )
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed chat response: {exc}") from exc


def make_chat_provider(config: ChatProviderConfig, session=None):
    if config.kind == "mock":
        if config.fixture:
            return MockChatProvider.from_file(
                config.fixture, default=config.default_response, model_name=config.model_name
            )
        return MockChatProvider(default=config.default_response, model_name=config.model_name)
    return RemoteChatProvider(config, session=session)


class ChatService:
    """Cache-first completion with bounded concurrency and per-item accounting.

    Per-item provider failures (after the provider's own retry policy) come
    back as exception objects instead of aborting the batch, so successes are
    cached and reruns resume from cache.
    """

    def __init__(self, provider, cache: TextCache | None = None, concurrency: int = 4):
        self.provider = provider
        self.cache = cache if cache is not None else TextCache(None)
        self.concurrency = max(1, concurrency)
        self.requested = 0
        self.cache_hits = 0
        self.provider_calls = 0

    def complete_many(self, prompts: Sequence[str]) -> list:
        """One entry per prompt, order-aligned: a response string or a
        ProviderUnavailable instance."""
        prompts = list(prompts)
        model = self.provider.model_name
        keys = [response_key(model, p) for p in prompts]
        self.requested += len(prompts)

        to_fetch: list[tuple[str, str]] = []
        pending: set[str] = set()
        for key, p in zip(keys, prompts):
            if key in self.cache or key in pending:
                self.cache_hits += 1
            else:
                pending.add(key)
                to_fetch.append((key, p))

        def attempt(prompt: str):
            try:
                return self.provider.complete(prompt)
            except ProviderUnavailable as exc:
                return exc

        if to_fetch:
            self.provider_calls += len(to_fetch)
            if self.concurrency > 1 and len(to_fetch) > 1:
                with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
                    fetched = list(pool.map(attempt, [p for _, p in to_fetch]))
            else:
                fetched = [attempt(p) for _, p in to_fetch]
            failures: dict[str, ProviderUnavailable] = {}
            for (key, _), result in zip(to_fetch, fetched):  # single writer, input order
                if isinstance(result, ProviderUnavailable):
                    failures[key] = result
                else:
                    self.cache.put(key, model, result)
        else:
            failures = {}

        out = []
        for key in keys:
            cached = self.cache.get(key)
            out.append(cached if cached is not None else failures[key])
        return out


def classify_zero_shot(service: ChatService, task: TaskKind, posts: Sequence[Post]) -> list[LlmOutcome]:
    """Zero-shot label per post; off-list or failed responses become
    UNPARSEABLE outcomes and the run completes."""
    prompts = [build_zero_shot_prompt(task, p) for p in posts]
    results = service.complete_many(prompts)
    outcomes = []
    for post, result in zip(posts, results):
        if isinstance(result, Exception):
            outcomes.append(LlmOutcome(post.id, "", UNPARSEABLE, error=str(result)))
            continue
        display = parse_label(result, task.prompt_labels)
        parsed = UNPARSEABLE if display == UNPARSEABLE else task.from_prompt_label(display)
        outcomes.append(LlmOutcome(post.id, result, parsed))
    return outcomes


def summarize(service: ChatService, posts: Sequence[Post]) -> list[LlmOutcome]:
    """Mental-state summary per post, stored verbatim; an empty summary or a
    failed call is recorded as UNPARSEABLE."""
    prompts = [build_summary_prompt(p) for p in posts]
    results = service.complete_many(prompts)
    outcomes = []
    for post, result in zip(posts, results):
        if isinstance(result, Exception):
            outcomes.append(LlmOutcome(post.id, "", UNPARSEABLE, error=str(result)))
        elif not result.strip():
            outcomes.append(LlmOutcome(post.id, result, UNPARSEABLE))
        else:
            outcomes.append(LlmOutcome(post.id, result, result))
    return outcomes
