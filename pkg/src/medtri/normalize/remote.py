"""LLM-backed normalization over a chat-completions style HTTP endpoint.

Wire contract (request)::

    POST <endpoint>
    Authorization: Bearer $<api_key_env>        # only if the variable is set
    {"model": <model_name>,
     "messages": [{"role": "user", "content": <rendered prompt>}],
     "temperature": 0}

Response: ``{"choices": [{"message": {"content": <text>}}]}``. Any server
that speaks this shape works, including a locally hosted distilled model.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import httpx

from .._text import data_path
from ..errors import BackendTimeout, ConfigError, EmptyOutput, FormatError, MalformedLine, TransportError
from ..ontology import Ontology, default_ontology
from ..schema import NormalizedReport, SegmentTagger, parse_report
from .rule import RawReport

log = logging.getLogger(__name__)

PLACEHOLDER = "{{REPORT}}"
REPAIR_SUFFIX = "Reminder: output ONLY lines of the form [Anatomical Term]: [findings]."
RETRYABLE_STATUS = frozenset({408, 425, 429, 500, 502, 503, 504})


@lru_cache(maxsize=1)
def default_prompt_template() -> str:
    return data_path("prompt_template.txt").read_text(encoding="utf-8")


def render_prompt(template: str, report_text: str) -> str:
    if PLACEHOLDER not in template:
        raise ConfigError(f"prompt template lacks the {PLACEHOLDER} placeholder")
    return template.replace(PLACEHOLDER, report_text.strip())


class BackendKind(str, Enum):
    RULE_BASED = "rule"
    REMOTE_LLM = "remote"


@dataclass
class BackendConfig:
    kind: BackendKind = BackendKind.RULE_BASED
    endpoint: str | None = None
    model_name: str | None = None
    prompt_template: str = field(default_factory=default_prompt_template)
    max_in_flight: int = 4
    retry_limit: int = 3
    timeout: float = 60.0
    backoff_base: float = 0.5
    backoff_max: float = 30.0
    api_key_env: str = "MEDTRI_API_KEY"

    def __post_init__(self):
        self.kind = BackendKind(self.kind)
        remote = self.kind is BackendKind.REMOTE_LLM
        if remote and not (self.endpoint and self.model_name):
            raise ConfigError("remote backend needs both endpoint and model_name")
        if not remote and (self.endpoint or self.model_name):
            raise ConfigError("endpoint/model_name are only valid for the remote backend")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.retry_limit < 0:
            raise ConfigError("retry_limit must be >= 0")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if PLACEHOLDER not in self.prompt_template:
            raise ConfigError(f"prompt template lacks the {PLACEHOLDER} placeholder")


class ChatCompletionClient:
    """Thread-safe client with bounded concurrency and exponential-backoff retries."""

    def __init__(
        self,
        endpoint: str,
        model_name: str,
        *,
        max_in_flight: int = 4,
        retry_limit: int = 3,
        timeout: float = 60.0,
        backoff_base: float = 0.5,
        backoff_max: float = 30.0,
        api_key: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.endpoint = endpoint
        self.model_name = model_name
        self.retry_limit = retry_limit
        self.backoff_base = backoff_base
        self.backoff_max = backoff_max
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        limits = httpx.Limits(max_connections=max_in_flight, max_keepalive_connections=max_in_flight)
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport, limits=limits)
        self.calls = 0
        self._calls_lock = threading.Lock()

    @classmethod
    def from_config(cls, cfg: BackendConfig, **kwargs) -> "ChatCompletionClient":
        return cls(
            cfg.endpoint,
            cfg.model_name,
            max_in_flight=cfg.max_in_flight,
            retry_limit=cfg.retry_limit,
            timeout=cfg.timeout,
            backoff_base=cfg.backoff_base,
            backoff_max=cfg.backoff_max,
            api_key=os.environ.get(cfg.api_key_env),
            **kwargs,
        )

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post(self, prompt: str) -> httpx.Response:
        body = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        with self._slots:
            with self._calls_lock:
                self.calls += 1
            return self._http.post(self.endpoint, json=body)

    def complete(self, prompt: str) -> str:
        last: Exception | None = None
        for attempt in range(self.retry_limit + 1):
            if attempt:
                self._sleep(min(self.backoff_max, self.backoff_base * 2 ** (attempt - 1)))
            try:
                resp = self._post(prompt)
            except httpx.TimeoutException as exc:
                last = BackendTimeout(f"request timed out: {exc}")
                continue
            except httpx.TransportError as exc:
                last = TransportError(f"transport failure: {exc!r}")
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last = TransportError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"unexpected response body: {exc!r}") from exc
            if not isinstance(content, str):
                raise TransportError("completion content is not a string")
            return content
        assert last is not None
        log.debug("giving up after %d attempts: %s", self.retry_limit + 1, last)
        raise last


class RemoteNormalizer:
    """Callable backend wrapping a :class:`ChatCompletionClient`."""

    def __init__(
        self,
        cfg: BackendConfig,
        client: ChatCompletionClient | None = None,
        ontology: Ontology | None = None,
        tagger: SegmentTagger | None = None,
    ):
        if cfg.kind is not BackendKind.REMOTE_LLM:
            raise ConfigError("RemoteNormalizer needs a remote backend config")
        self.cfg = cfg
        self.client = client or ChatCompletionClient.from_config(cfg)
        self.ontology = ontology or default_ontology()
        self.tagger = tagger
        self.name = f"remote:{cfg.model_name}"

    def __call__(self, raw: RawReport) -> NormalizedReport:
        prompt = render_prompt(self.cfg.prompt_template, raw.text)
        reply = self.client.complete(prompt)
        try:
            triplets = parse_report(reply, self.ontology, self.tagger)
        except (MalformedLine, EmptyOutput) as first:
            log.info("report %s: off-format reply (%s), sending repair prompt", raw.report_id, first)
            reply = self.client.complete(f"{prompt}\n\n{REPAIR_SUFFIX}")
            try:
                triplets = parse_report(reply, self.ontology, self.tagger)
            except (MalformedLine, EmptyOutput) as second:
                raise FormatError(
                    f"report {raw.report_id!r}: reply still off-format after repair: {second}", reply
                ) from second
        return NormalizedReport(raw.report_id, tuple(triplets), self.name, raw.source_hash)


def normalize_remote(raw: RawReport, cfg: BackendConfig, client: ChatCompletionClient | None = None) -> NormalizedReport:
    if client is not None:
        return RemoteNormalizer(cfg, client)(raw)
    with ChatCompletionClient.from_config(cfg) as own:
        return RemoteNormalizer(cfg, own)(raw)
