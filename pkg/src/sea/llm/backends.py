"""Completion backends: deterministic mocks and a remote chat-completion endpoint."""

from __future__ import annotations

import hashlib
import logging
import os
import re
import threading
import time
from typing import Optional, Protocol

import httpx

from . import prompts

log = logging.getLogger(__name__)

API_KEY_ENV = "SEA_LLM_API_KEY"


class TransportError(RuntimeError):
    """The endpoint could not be reached after all retries."""

    def __init__(self, message: str, fingerprint: str = ""):
        super().__init__(message)
        self.fingerprint = fingerprint


class ProtocolError(RuntimeError):
    """The endpoint answered with something that is not a completion."""

    def __init__(self, message: str, fingerprint: str = ""):
        super().__init__(message)
        self.fingerprint = fingerprint


def fingerprint(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class Backend(Protocol):
    name: str

    def complete(self, prompt: str, model: str, temperature: float, max_tokens: int) -> str: ...


# ---------------------------------------------------------------------------
# mocks

C_STOPWORDS = frozenset("""
auto break case char const continue default do double else enum extern float for goto if
inline int long register restrict return short signed sizeof static struct switch typedef
union unsigned void volatile while bool true false null size_t uint8_t uint16_t uint32_t
uint64_t int8_t int16_t int32_t int64_t ssize_t the and for with this that are from
summary caller callee local global statement name function target
""".split())

_WORD_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*")
_CAMEL_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")


def tokens(text: str) -> set[str]:
    """Case-folded word tokens; identifiers split on ``_`` and camelCase."""
    out = set()
    for word in _WORD_RE.findall(text.replace("_", " ")):
        for part in _CAMEL_RE.findall(word):
            t = part.lower()
            if len(t) >= 3 and t not in C_STOPWORDS and not t.isdigit():
                out.add(t)
    return out


def _between_template(prompt: str) -> str:
    """The payload of a summary or consolidation prompt (header and instruction stripped)."""
    head, _, rest = prompt.partition("\n\n")
    body, _, _ = rest.rpartition("\n\n")
    return body


def token_summary(prompt: str) -> str:
    return " ".join(sorted(tokens(_between_template(prompt))))


def match_sections(prompt: str) -> tuple[str, str]:
    """Caller and callee halves of a match prompt."""
    body = prompt[:prompt.rfind(prompts.MATCH_INSTRUCTION)]
    caller, sep, callee = body.partition("\n\n# 2.")
    caller = caller.partition("# 1.")[2]
    return caller, callee


class MockBackend:
    """Pure function of the prompt text.

    Summary and consolidation prompts get the sorted distinct tokens of their
    payload.  Match prompts are answered by ``kind``: ``always-yes``,
    ``always-no`` or ``token-overlap`` (yes iff the caller and callee halves
    share at least ``threshold`` tokens).
    """

    KINDS = ("always-yes", "always-no", "token-overlap")

    def __init__(self, kind: str = "token-overlap", threshold: int = 2):
        if kind not in self.KINDS:
            raise ValueError(f"unknown mock oracle {kind!r}; expected one of {', '.join(self.KINDS)}")
        self.kind = kind
        self.threshold = threshold
        self.name = f"mock:{kind}"
        self.calls: list[str] = []
        self._lock = threading.Lock()

    def complete(self, prompt: str, model: str = "", temperature: float = 0.0, max_tokens: int = 0) -> str:
        with self._lock:
            self.calls.append(prompt)
        if not prompts.is_match_prompt(prompt):
            return token_summary(prompt) or "no notable identifiers"
        if self.kind == "always-yes":
            return "yes"
        if self.kind == "always-no":
            return "no"
        caller, callee = match_sections(prompt)
        shared = tokens(caller) & tokens(callee)
        return "yes" if len(shared) >= self.threshold else "no"


# ---------------------------------------------------------------------------
# remote

class RemoteBackend:
    """Chat-completion style endpoint at ``<base_url>/chat/completions``."""

    def __init__(self, base_url: str, retries: int = 3, backoff: float = 0.5, timeout: float = 60.0,
                 transport: Optional[httpx.BaseTransport] = None, api_key: Optional[str] = None):
        self.base_url = base_url.rstrip("/")
        self.name = f"remote:{self.base_url}"
        self.retries = retries
        self.backoff = backoff
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self.client = httpx.Client(timeout=timeout, transport=transport, headers=headers)

    def complete(self, prompt: str, model: str, temperature: float, max_tokens: int) -> str:
        payload = {
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        fp = fingerprint(prompt)
        url = f"{self.base_url}/chat/completions"
        last: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = self.client.post(url, json=payload)
            except httpx.HTTPError as exc:
                last = exc
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = httpx.HTTPStatusError(f"status {resp.status_code}", request=resp.request,
                                                 response=resp)
                elif resp.status_code >= 400:
                    raise ProtocolError(f"endpoint rejected request with status {resp.status_code}", fp)
                else:
                    return self._content(resp, fp)
            log.warning("completion attempt %d/%d failed: %s", attempt + 1, self.retries, last)
            if attempt + 1 < self.retries:
                time.sleep(self.backoff * 2 ** attempt)
        raise TransportError(f"no completion after {self.retries} attempts: {last}", fp)

    @staticmethod
    def _content(resp: httpx.Response, fp: str) -> str:
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion reply: {exc!r}", fp) from exc
        if not isinstance(content, str):
            raise ProtocolError("completion content is not text", fp)
        return content


def make_backend(spec: str, **kwargs) -> Backend:
    """Backend from a ``mock:<kind>`` or ``remote:<url>`` spec."""
    kind, _, arg = spec.partition(":")
    if kind == "mock":
        return MockBackend(arg or "token-overlap")
    if kind == "remote" and arg:
        return RemoteBackend(arg, **kwargs)
    raise ValueError(f"bad backend spec {spec!r}; use mock:always-yes|mock:always-no|"
                     "mock:token-overlap|remote:<url>")
