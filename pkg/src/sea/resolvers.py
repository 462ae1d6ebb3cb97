"""Static candidate resolution for indirect calls.

Three resolvers of increasing precision are tried in turn:

* ``kelp-lite``: an intraprocedural approximation of simple function-pointer
  resolution; its sets are confirmed (exact);
* ``mlta``: struct-field confinement of the pointer's (struct, field);
* ``flta``: per-parameter type matching against every address-taken function.

Every answer is a subset of the FLTA set.
"""

from __future__ import annotations

import posixpath
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .cfrontend import IcallSite
from .contextdb import ContextDatabase, FunctionInfo
from .typeexpr import TypeExpr, types_match

__all__ = [
    "CandidateSet", "StaticResolution", "TrailEntry", "types_match", "flta_candidates",
    "mlta_candidates", "resolve_simple_icall", "resolve_static", "scope_filter",
    "resolve_all", "RESOLVER_ORDER",
]

FLTA, MLTA, KELP = "FLTA", "MLTA", "KelpLite"
RESOLVER_ORDER = {
    "cascade": ("kelp-lite", "mlta", "flta"),
    "kelp-lite": ("kelp-lite", "flta"),
    "mlta": ("mlta", "flta"),
    "flta": ("flta",),
}
SCOPE_MODES = {"subtree": "directory-subtree", "directory-subtree": "directory-subtree",
               "project": "whole-project", "whole-project": "whole-project"}

_IDENT_RE = re.compile(r"^[A-Za-z_]\w*$")


@dataclass
class CandidateSet:
    icall_id: str
    candidates: list[str]
    resolver: str
    confirmed: bool = False
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class TrailEntry:
    resolver: str
    outcome: str  # won | declined
    reason: str = ""


@dataclass
class StaticResolution:
    icall_id: str
    result: CandidateSet
    trail: list[TrailEntry] = field(default_factory=list)

    @property
    def winner(self) -> str:
        return self.result.resolver


# ---------------------------------------------------------------------------
# FLTA

def arity_matches(n_args: int, fn: FunctionInfo) -> bool:
    if fn.params_unknown:
        return True
    fixed = len(fn.parameters)
    return n_args >= fixed if fn.is_variadic else n_args == fixed


def signature_accepts(arg_types: Iterable[TypeExpr], fn: FunctionInfo) -> bool:
    """Whether a call with these argument types may target ``fn``."""
    arg_types = list(arg_types)
    if not arity_matches(len(arg_types), fn):
        return False
    if fn.params_unknown:
        return True
    return all(types_match(a, p.type) for a, p in zip(arg_types, fn.parameters))


def flta_candidates(icall: IcallSite, db: ContextDatabase) -> CandidateSet:
    """Address-taken functions whose signature accepts the call's arguments."""
    diags = []
    if icall.args_error:
        diags.append(f"{icall.id}: argument list has parse errors; all address-taken functions kept")
        cands = [k for k in db.address_taken if k in db.function_map]
    else:
        cands = [k for k in db.address_taken
                 if k in db.function_map and signature_accepts(icall.arg_types, db.function_map[k])]
    return CandidateSet(icall.id, sorted(cands), FLTA, False, diags)


# ---------------------------------------------------------------------------
# MLTA

def confinement(db: ContextDatabase, struct: str, fld: str) -> tuple[set[str], Optional[str]]:
    """Functions stored into ``struct.fld`` and an escape reason, if any."""
    funcs: set[str] = set()
    for st in db.field_stores:
        if st.field != fld:
            continue
        if st.struct == "":
            return funcs, f"store into .{fld} through an unknown-typed base: {st.text.strip()[:80]}"
        if st.struct != struct:
            continue
        if st.value != "function":
            return funcs, f"non-function value stored into {struct}.{fld}: {st.text.strip()[:80]}"
        funcs.update(st.functions)
    return funcs, None


def _mlta(icall: IcallSite, db: ContextDatabase, flta: CandidateSet) -> tuple[Optional[CandidateSet], str]:
    pe = icall.pointer_expr
    if pe.kind != "struct-field-access":
        return None, "pointer is not a struct field"
    if not pe.base_type_hint or not pe.field_name:
        return None, "struct type of the base expression is unknown"
    if db.struct(pe.base_type_hint) is None:
        return None, f"struct {pe.base_type_hint} has no parsed definition"
    funcs, escape = confinement(db, pe.base_type_hint, pe.field_name)
    if escape:
        return None, f"type escape: {escape}"
    if not funcs:
        return None, f"empty confinement set for {pe.base_type_hint}.{pe.field_name}"
    inter = sorted(set(flta.candidates) & funcs)
    if not inter:
        return None, "confinement set disjoint from FLTA candidates"
    return CandidateSet(icall.id, inter, MLTA, False), ""


def mlta_candidates(icall: IcallSite, db: ContextDatabase,
                    flta: Optional[CandidateSet] = None) -> Optional[CandidateSet]:
    """Field-confined candidates, or None when MLTA does not apply."""
    flta = flta or flta_candidates(icall, db)
    return _mlta(icall, db, flta)[0]


# ---------------------------------------------------------------------------
# KelpLite

def _direct_function(text: str, db: ContextDatabase, file: str) -> Optional[str]:
    t = text.strip()
    while True:
        if t.startswith("(") and t.endswith(")"):
            t = t[1:-1].strip()
        elif t.startswith("&"):
            t = t[1:].strip()
        else:
            break
    if not _IDENT_RE.match(t):
        return None
    keys = db.function_keys(t, file)
    return keys[0] if len(keys) == 1 else None


def _kelp(icall: IcallSite, db: ContextDatabase, flta: CandidateSet) -> tuple[Optional[CandidateSet], str]:
    pe = icall.pointer_expr
    if pe.kind != "plain-variable":
        return None, "pointer is not a plain variable"
    if pe.binding != "local":
        return None, f"pointer is a {pe.binding or 'unresolved'} variable, not a local"
    fn = db.function(icall.enclosing_function)
    if fn is None:
        return None, "enclosing function not in the database"
    if fn.param(pe.var_name) is not None or fn.local(pe.var_name) is None:
        return None, "pointer is not a plain local of the enclosing function"
    if pe.var_name in fn.unsafe_locals:
        return None, "local's address is taken, it is redeclared or updated in place"
    defs = fn.local_defs.get(pe.var_name, [])
    if not defs:
        return None, "no definition of the local inside the function"
    targets = set()
    for d in defs:
        key = _direct_function(d, db, fn.file)
        if key is None:
            return None, f"definition is not a function identifier: {d.strip()[:80]}"
        targets.add(key)
    if not targets <= set(flta.candidates):
        return None, "definitions disagree with FLTA signature matching"
    return CandidateSet(icall.id, sorted(targets), KELP, True), ""


def resolve_simple_icall(icall: IcallSite, db: ContextDatabase,
                         flta: Optional[CandidateSet] = None) -> Optional[CandidateSet]:
    """Confirmed set for a simple local function pointer, or None."""
    flta = flta or flta_candidates(icall, db)
    return _kelp(icall, db, flta)[0]


# ---------------------------------------------------------------------------
# cascade

def resolve_static(icall: IcallSite, db: ContextDatabase, resolver: str = "cascade") -> StaticResolution:
    """Try the resolvers in cascade order and keep the first that applies."""
    order = RESOLVER_ORDER[resolver]
    flta = flta_candidates(icall, db)
    trail = []
    if db.function(icall.enclosing_function) is None:
        flta.diagnostics.append(f"{icall.id}: enclosing function unknown; FLTA only")
        order = ("flta",)
    for name in order:
        if name == "flta":
            trail.append(TrailEntry(FLTA, "won"))
            return StaticResolution(icall.id, flta, trail)
        step = _kelp if name == "kelp-lite" else _mlta
        result, reason = step(icall, db, flta)
        label = KELP if name == "kelp-lite" else MLTA
        if result is not None:
            result.diagnostics = list(flta.diagnostics)
            trail.append(TrailEntry(label, "won"))
            return StaticResolution(icall.id, result, trail)
        trail.append(TrailEntry(label, "declined", reason))
    raise AssertionError("cascade always ends with FLTA")


def _under(path: str, directory: str) -> bool:
    return directory in ("", ".") or path.startswith(directory.rstrip("/") + "/")


def scope_filter(cands: CandidateSet, caller_file: str, mode: str = "directory-subtree",
                 db: Optional[ContextDatabase] = None) -> CandidateSet:
    """Keep candidates defined under the caller file's directory.

    Confirmed sets and ``whole-project`` mode pass through unchanged.
    """
    mode = SCOPE_MODES[mode]
    if mode == "whole-project" or cands.confirmed:
        return cands
    if db is None:
        raise ValueError("directory-subtree scope needs the database to locate definitions")
    directory = posixpath.dirname(caller_file)
    kept = [c for c in cands.candidates
            if c in db.function_map and _under(db.function_map[c].file, directory)]
    return CandidateSet(cands.icall_id, kept, cands.resolver, cands.confirmed, list(cands.diagnostics))


@dataclass
class StaticEntry:
    """One row of static.json."""

    resolver: str
    confirmed: bool
    candidates: list[str]
    static_candidates: list[str]
    scope: str
    trail: list[TrailEntry]
    diagnostics: list[str] = field(default_factory=list)


def resolve_all(db: ContextDatabase, resolver: str = "cascade",
                scope: str = "directory-subtree") -> dict[str, StaticEntry]:
    """Resolve every icall of the database; rows keyed and sorted by icall id."""
    out = {}
    for icall in sorted(db.icalls, key=lambda i: i.id):
        res = resolve_static(icall, db, resolver)
        scoped = scope_filter(res.result, icall.span.file, scope, db)
        out[icall.id] = StaticEntry(res.result.resolver, res.result.confirmed, scoped.candidates,
                                    res.result.candidates, SCOPE_MODES[scope], res.trail,
                                    res.result.diagnostics)
    return out
