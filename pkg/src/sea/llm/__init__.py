"""Prompting, completion backends and the response cache."""

from .backends import MockBackend, ProtocolError, RemoteBackend, TransportError, make_backend
from .cache import ResponseCache
from .engine import (
    AMBIGUOUS, NO, YES, ConfigError, Engine, LlmConfig, MatchVerdict, complete, parse_verdict,
    summarize_callee_global,
)
from .prompts import (
    SummaryBundle, render_consolidation_prompt, render_match_prompt, render_summary_prompt,
)
