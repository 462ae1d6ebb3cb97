"""Cached completions, verdict parsing and callee-summary consolidation."""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .backends import Backend, TransportError, fingerprint, make_backend
from .cache import ResponseCache
from .prompts import render_consolidation_prompt, render_summary_prompt

STANDARD_TEMPERATURES = (0.0, 0.25, 0.5, 0.75, 1.0)
YES, NO, AMBIGUOUS = "Yes", "No", "Ambiguous"

_VERDICT_RE = re.compile(r"(?<![A-Za-z0-9_])(yes|no)(?![A-Za-z0-9_])", re.IGNORECASE)


class ConfigError(ValueError):
    pass


@dataclass
class LlmConfig:
    model_name: str = "mock"
    temperature: float = 0.5
    max_tokens: int = 512
    verdict_max_tokens: int = 64
    runs_per_query: int = 1
    concurrency_limit: int = 4
    backend: str = "mock:token-overlap"
    allow_any_temperature: bool = False

    def validate(self) -> "LlmConfig":
        if not 0.0 <= self.temperature <= 1.0:
            raise ConfigError(f"temperature {self.temperature} outside [0, 1]")
        if not self.allow_any_temperature and self.temperature not in STANDARD_TEMPERATURES:
            raise ConfigError(f"temperature {self.temperature} not one of {STANDARD_TEMPERATURES}; "
                              "set allow_any_temperature to override")
        for name in ("max_tokens", "verdict_max_tokens", "runs_per_query", "concurrency_limit"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not self.model_name:
            raise ConfigError("model_name is empty")
        kind = self.backend.partition(":")[0]
        if kind not in ("mock", "remote") or (kind == "remote" and not self.backend[7:]):
            raise ConfigError(f"bad backend {self.backend!r}")
        return self


@dataclass
class MatchVerdict:
    decision: str
    raw_response: str
    prompt_fingerprint: str
    raw_responses: list[str] = field(default_factory=list)


def parse_verdict(raw: str) -> str:
    """Yes/No from standalone tokens; both or neither present gives Ambiguous."""
    found = {m.group(1).lower() for m in _VERDICT_RE.finditer(raw or "")}
    if found == {"yes"}:
        return YES
    if found == {"no"}:
        return NO
    return AMBIGUOUS


def majority(decisions: Sequence[str]) -> str:
    """Majority of Yes/No over runs; Ambiguous votes keep the edge, ties go to Yes."""
    if all(d == AMBIGUOUS for d in decisions):
        return AMBIGUOUS
    keep = sum(d != NO for d in decisions)
    return YES if keep >= len(decisions) - keep else NO


class Engine:
    """Completion front end: cache first, then the backend."""

    def __init__(self, config: LlmConfig, cache: Optional[ResponseCache] = None,
                 backend: Optional[Backend] = None):
        self.config = config.validate()
        self.cache = cache if cache is not None else ResponseCache()
        self.backend = backend if backend is not None else make_backend(config.backend)
        self.backend_calls = 0
        self._locks: dict[tuple[str, int], threading.Lock] = {}
        self._guard = threading.Lock()

    def _key_lock(self, sha: str, run: int) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault((sha, run), threading.Lock())

    def complete(self, prompt: str, max_tokens: Optional[int] = None, run: int = 0) -> str:
        cfg = self.config
        sha = fingerprint(prompt)
        # one in-flight request per key keeps hit/miss counts order-independent
        with self._key_lock(sha, run):
            hit = self.cache.get(sha, cfg.model_name, cfg.temperature, run)
            if hit is not None:
                return hit
            with self._guard:
                self.backend_calls += 1
            text = self.backend.complete(prompt, cfg.model_name, cfg.temperature,
                                         max_tokens or cfg.max_tokens)
            self.cache.put(sha, cfg.model_name, cfg.temperature, run, text)
            return text

    def summarize(self, context_text: str, role: str, target_name: str = "") -> str:
        return self.complete(render_summary_prompt(context_text, role, target_name)).strip()

    def match(self, prompt: str) -> MatchVerdict:
        raws = [self.complete(prompt, self.config.verdict_max_tokens, run)
                for run in range(self.config.runs_per_query)]
        decisions = [parse_verdict(r) for r in raws]
        decision = decisions[0] if len(decisions) == 1 else majority(decisions)
        return MatchVerdict(decision, raws[0], fingerprint(prompt), raws)


def complete(prompt: str, config: LlmConfig, cache: ResponseCache,
             backend: Optional[Backend] = None) -> str:
    return Engine(config, cache, backend).complete(prompt)


def summarize_callee_global(fn_name: str, site_contexts: Sequence, engine: Engine) -> Optional[str]:
    """One summary per site, consolidated when there are several."""
    texts = [c.render() if hasattr(c, "render") else str(c) for c in site_contexts]
    texts = [t for t in texts if t.strip()]
    if not texts:
        return None
    summaries = [engine.summarize(t, "CalleeSite", fn_name) for t in texts]
    if len(summaries) == 1:
        return summaries[0]
    return engine.complete(render_consolidation_prompt(summaries)).strip()


__all__ = ["LlmConfig", "MatchVerdict", "Engine", "ConfigError", "TransportError", "parse_verdict",
           "majority", "complete", "summarize_callee_global", "YES", "NO", "AMBIGUOUS",
           "STANDARD_TEMPERATURES"]
