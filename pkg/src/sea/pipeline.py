"""End-to-end refinement: static candidates pruned by caller-callee matching."""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional

from . import serial
from .cfrontend import IcallSite
from .context import (
    DEFAULT_MAX_DEPTH, caller_global_context, caller_local_context, callee_local_context,
    callee_site_contexts,
)
from .contextdb import BuildConfig, ContextDatabase, build_context_database
from .llm.backends import ProtocolError, TransportError
from .llm.engine import AMBIGUOUS, NO, YES, ConfigError, Engine, LlmConfig
from .llm.prompts import MODES, SummaryBundle, mode_bundle, render_match_prompt
from .resolvers import SCOPE_MODES, RESOLVER_ORDER, StaticEntry, resolve_all

log = logging.getLogger(__name__)

KELP_PASSTHROUGH, LLM_VERDICT, AMBIGUOUS_KEEP = "KelpPassthrough", "LlmVerdict", "AmbiguousKeep"
_LLM_ERRORS = (TransportError, ProtocolError)


@dataclass
class RefineConfig:
    ablation_mode: str = "Full"
    scope_mode: str = "directory-subtree"
    llm: LlmConfig = field(default_factory=LlmConfig)
    max_chain_depth: int = DEFAULT_MAX_DEPTH
    include_summaries_in_report: bool = False
    resolver: str = "cascade"

    def validate(self) -> "RefineConfig":
        if self.ablation_mode not in MODES:
            raise ConfigError(f"ablation_mode must be one of {MODES}, got {self.ablation_mode!r}")
        if self.scope_mode not in SCOPE_MODES:
            raise ConfigError(f"unknown scope_mode {self.scope_mode!r}")
        if self.resolver not in RESOLVER_ORDER:
            raise ConfigError(f"unknown resolver {self.resolver!r}")
        if not isinstance(self.max_chain_depth, int) or self.max_chain_depth < 1:
            raise ConfigError("max_chain_depth must be a positive integer")
        self.llm.validate()
        return self

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RefineConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        llm_data = dict(data.get("llm", {}))
        llm_known = {f.name for f in fields(LlmConfig)}
        if set(llm_data) - llm_known:
            raise ConfigError(f"unknown llm config keys: {', '.join(sorted(set(llm_data) - llm_known))}")
        kwargs = {k: v for k, v in data.items() if k != "llm"}
        return cls(llm=LlmConfig(**llm_data), **kwargs)

    @classmethod
    def load(cls, path: Path | str) -> "RefineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except ValueError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_mapping(data)


@dataclass
class EdgeDecision:
    verdict: str
    decision_source: str
    error: str = ""


@dataclass
class CalleeSummaries:
    local: Optional[str] = None
    global_: Optional[str] = None


@dataclass
class RefinedResult:
    icall_id: str
    resolver: str
    confirmed: bool
    static_candidates: list[str]
    kept: list[str]
    pruned: list[str]
    per_edge: dict[str, EdgeDecision]
    summaries: Optional[dict[str, SummaryBundle]] = None


@dataclass
class Report:
    project: str
    config: RefineConfig
    icalls: list[RefinedResult]
    diagnostics: list[str]
    errors: list[str]
    cache: dict

    @property
    def partial(self) -> bool:
        return bool(self.errors)

    def to_json(self) -> str:
        return serial.dumps(self)


class Refiner:
    """Per-project refinement state: engine plus memoized callee summaries."""

    def __init__(self, db: ContextDatabase, config: RefineConfig, engine: Optional[Engine] = None):
        self.db = db
        self.config = config.validate()
        self.engine = engine if engine is not None else Engine(config.llm)
        self.mode = config.ablation_mode
        self._callee: dict[str, CalleeSummaries] = {}
        self._callee_locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    # summaries -----------------------------------------------------------

    def callee_summaries(self, key: str) -> CalleeSummaries:
        with self._guard:
            lock = self._callee_locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._callee:
                self._callee[key] = self._summarize_callee(key)
            return self._callee[key]

    def _summarize_callee(self, key: str) -> CalleeSummaries:
        from .llm.engine import summarize_callee_global
        out = CalleeSummaries()
        if self.mode in ("Full", "WoGlobal"):
            out.local = self.engine.summarize(callee_local_context(key, self.db).text, "CalleeLocal", key)
        if self.mode in ("Full", "WoLocal"):
            sites = callee_site_contexts(key, self.db, self.config.max_chain_depth)
            out.global_ = summarize_callee_global(key, sites, self.engine)
        return out

    def caller_summaries(self, icall: IcallSite) -> tuple[Optional[str], Optional[str]]:
        local = glob = None
        if self.mode in ("Full", "WoGlobal"):
            ctx = caller_local_context(icall, self.db)
            if ctx is not None and ctx.text.strip():
                local = self.engine.summarize(ctx.text, "CallerLocal")
        if self.mode in ("Full", "WoLocal"):
            g = caller_global_context(icall, self.db)
            if g:
                glob = self.engine.summarize(g.render(), "CallerGlobal")
        return local, glob

    # refinement ----------------------------------------------------------

    def match_prompt(self, icall: IcallSite, bundle: SummaryBundle, callee: str) -> str:
        b = mode_bundle(bundle, self.mode)
        if self.mode == "WoAll" or not any((b.caller_local, b.caller_global, b.callee_local, b.callee_global)):
            # nothing summarized for this edge: match on the statement and name
            return render_match_prompt(b, "WoAll", icall.call_text, callee)
        return render_match_prompt(b, self.mode)

    def refine_icall(self, icall: IcallSite, entry: StaticEntry) -> tuple[RefinedResult, list[str]]:
        cands = list(entry.candidates)
        if entry.confirmed:
            edges = {c: EdgeDecision("", KELP_PASSTHROUGH) for c in cands}
            return RefinedResult(icall.id, entry.resolver, True, cands, cands, [], edges), []
        errors: list[str] = []
        edges: dict[str, EdgeDecision] = {}
        archive: dict[str, SummaryBundle] = {}
        try:
            caller_local, caller_global = self.caller_summaries(icall)
            caller_error = ""
        except _LLM_ERRORS as exc:
            caller_local = caller_global = None
            caller_error = f"caller summary failed: {exc}"
        for callee in cands:
            if caller_error:
                edges[callee] = EdgeDecision(AMBIGUOUS, AMBIGUOUS_KEEP, caller_error)
                errors.append(f"{icall.id} -> {callee}: {caller_error}")
                continue
            try:
                cs = self.callee_summaries(callee)
                bundle = SummaryBundle(caller_local, caller_global, cs.local, cs.global_)
                archive[callee] = bundle
                verdict = self.engine.match(self.match_prompt(icall, bundle, callee))
            except _LLM_ERRORS as exc:
                edges[callee] = EdgeDecision(AMBIGUOUS, AMBIGUOUS_KEEP, str(exc))
                errors.append(f"{icall.id} -> {callee}: {exc}")
                continue
            source = AMBIGUOUS_KEEP if verdict.decision == AMBIGUOUS else LLM_VERDICT
            edges[callee] = EdgeDecision(verdict.decision, source)
        kept = [c for c in cands if edges[c].verdict != NO]
        pruned = [c for c in cands if edges[c].verdict == NO]
        summaries = archive if self.config.include_summaries_in_report else None
        return RefinedResult(icall.id, entry.resolver, False, cands, kept, pruned, edges, summaries), errors

    def run(self, static: Optional[Mapping[str, StaticEntry]] = None) -> Report:
        if static is None:
            static = resolve_all(self.db, self.config.resolver, self.config.scope_mode)
        icalls = {i.id: i for i in self.db.icalls}
        unknown = sorted(set(static) - set(icalls))
        if unknown:
            raise ValueError(f"static results name icalls missing from the database: {unknown[:3]}")
        ids = sorted(static)
        with ThreadPoolExecutor(max_workers=self.config.llm.concurrency_limit) as pool:
            outcomes = list(pool.map(lambda i: self.refine_icall(icalls[i], static[i]), ids))
        results = [r for r, _ in outcomes]
        errors = [e for _, errs in outcomes for e in errs]
        diags = list(self.db.warnings)
        diags += [f"{f}: {len(d.error_regions)} parse error region(s)"
                  for f, d in sorted(self.db.diagnostics.items()) if d.error_regions]
        return Report(self.db.project, self.config, results, diags, errors, self.engine.cache.stats())


def refine_icall(icall: IcallSite, db: ContextDatabase, config: RefineConfig,
                 engine: Optional[Engine] = None, entry: Optional[StaticEntry] = None) -> RefinedResult:
    """Refine one icall; the static entry is computed when not supplied."""
    if entry is None:
        entry = resolve_all(_single(db, icall), config.resolver, config.scope_mode)[icall.id]
    return Refiner(db, config, engine).refine_icall(icall, entry)[0]


def _single(db: ContextDatabase, icall: IcallSite) -> ContextDatabase:
    from dataclasses import replace
    return replace(db, icalls=[icall])


def analyze_project(project_root: Path | str, config: RefineConfig, engine: Optional[Engine] = None,
                    build: Optional[BuildConfig] = None) -> Report:
    """Preprocess, resolve, scope-filter and refine a whole project."""
    db = build_context_database(project_root, build)
    return Refiner(db, config, engine).run()


def load_static(path: Path | str) -> dict[str, StaticEntry]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {k: serial.from_jsonable(StaticEntry, v) for k, v in data.items()}


__all__ = ["RefineConfig", "LlmConfig", "RefinedResult", "EdgeDecision", "Report", "Refiner", "refine_icall",
           "analyze_project", "load_static", "YES", "NO", "AMBIGUOUS"]
