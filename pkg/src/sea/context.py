"""Local and global contexts for callers and callees.

Local context is the full text of a function.  Global context is a list of
source fragments tied to the function pointer (caller side) or to each place
a candidate's address is taken (callee side).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .cfrontend import IcallSite
from .contextdb import AddressTakenSite, ContextDatabase, FunctionInfo, ParamUse

FRAGMENT_CAP = 4000
TRUNCATED = "[truncated]"
DEFAULT_MAX_DEPTH = 4

_IDENT_RE = re.compile(r"[A-Za-z_]\w*")


class ContextError(LookupError):
    """A context was requested for something the database does not define."""


@dataclass
class LocalContext:
    owner: str
    text: str
    partial: bool = False


@dataclass
class Fragment:
    kind: str  # var-declaration | struct-definition | type-alias | assignment-site | initializer-site | call-chain
    text: str


@dataclass
class GlobalContext:
    owner: str
    fragments: list[Fragment] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def add(self, kind: str, text: str) -> None:
        text = cap_fragment(text.strip())
        if text and not any(f.kind == kind and f.text == text for f in self.fragments):
            self.fragments.append(Fragment(kind, text))

    def kinds(self) -> list[str]:
        return [f.kind for f in self.fragments]

    def render(self) -> str:
        return "\n\n".join(f.text for f in self.fragments)

    def __bool__(self) -> bool:
        return bool(self.fragments)


@dataclass
class CallChain:
    links: list[tuple[str, str]]
    terminal: str  # AssignedInTarget | DirectlyInvoked | EndsAtIcall | DepthLimit | Cycle | Unresolved | Untracked
    terminal_text: str = ""
    terminal_use: Optional[ParamUse] = None
    terminal_function: str = ""

    @property
    def flagged(self) -> bool:
        return self.terminal in ("EndsAtIcall", "Unresolved", "Untracked")

    def render(self) -> str:
        lines = ["call chain:"]
        lines += [f"({call.strip()}, {target.strip()})" for call, target in self.links]
        tail = f"{self.terminal}: {self.terminal_text.strip()}" if self.terminal_text else self.terminal
        lines.append(f"ends with {tail}")
        return "\n".join(lines)


def cap_fragment(text: str, cap: int = FRAGMENT_CAP) -> str:
    if len(text) <= cap:
        return text
    return text[:cap] + "\n" + TRUNCATED


# ---------------------------------------------------------------------------
# local contexts

def _function_context(key: str, db: ContextDatabase) -> LocalContext:
    fn = db.function(key)
    if fn is None:
        raise ContextError(f"function {key!r} has no definition in the database")
    return LocalContext(key, fn.body_text, fn.partial)


def caller_local_context(icall: IcallSite, db: ContextDatabase) -> Optional[LocalContext]:
    """Text of the function enclosing the icall; None when it was lost to parse errors."""
    if db.function(icall.enclosing_function) is None:
        return None
    return _function_context(icall.enclosing_function, db)


def callee_local_context(fn_name: str, db: ContextDatabase) -> LocalContext:
    return _function_context(fn_name, db)


# ---------------------------------------------------------------------------
# global-context rules

def add_alias_fragments(ctx: GlobalContext, type_text: str, db: ContextDatabase) -> None:
    """Typedef definitions for every alias named in ``type_text``, following chains."""
    pending = _IDENT_RE.findall(type_text)
    seen = set()
    while pending:
        name = pending.pop(0)
        if name in seen or name not in db.type_alias_map:
            continue
        seen.add(name)
        alias = db.type_alias_map[name]
        ctx.add("type-alias", alias.definition_text)
        pending += _IDENT_RE.findall(alias.source_text)


def add_struct_fragment(ctx: GlobalContext, struct: str, db: ContextDatabase) -> bool:
    info = db.struct(struct)
    if info is None:
        return False
    ctx.add("struct-definition", info.definition_text)
    if struct.startswith("__anon_") or struct in db.type_alias_map:
        add_alias_fragments(ctx, struct, db)
    return True


def _decl_of(var: str, binding: str, fn: Optional[FunctionInfo], file: str,
             db: ContextDatabase) -> Optional[str]:
    if binding in ("local", "param") and fn is not None:
        if binding == "param":
            p = fn.param(var)
            return p.decl_text if p is not None else None
        v = fn.local(var)
        return v.decl_text if v is not None else None
    if binding == "global":
        g = db.global_var(var, file)
        return g.decl_text if g is not None else None
    return None


def add_variable_fragments(ctx: GlobalContext, var: str, binding: str, fn: Optional[FunctionInfo],
                           file: str, db: ContextDatabase) -> None:
    decl = _decl_of(var, binding, fn, file, db)
    if decl is None:
        return
    ctx.add("var-declaration", decl)
    add_alias_fragments(ctx, decl, db)


def add_field_fragments(ctx: GlobalContext, struct: str, fld: str, db: ContextDatabase) -> None:
    if not add_struct_fragment(ctx, struct, db):
        return
    f = db.struct(struct).get(fld)
    if f is not None:
        add_alias_fragments(ctx, f.decl_text, db)


def caller_global_context(icall: IcallSite, db: ContextDatabase) -> GlobalContext:
    """Declarations, struct and typedef text for the icall's function pointer."""
    ctx = GlobalContext(icall.id)
    pe = icall.pointer_expr
    fn = db.function(icall.enclosing_function)
    file = icall.span.file
    if pe.kind == "struct-field-access":
        if pe.base_type_hint and db.struct(pe.base_type_hint) is not None:
            add_field_fragments(ctx, pe.base_type_hint, pe.field_name, db)
        elif pe.var_name:
            # struct unknown: the variable declaration is all we have
            add_variable_fragments(ctx, pe.var_name, pe.binding, fn, file, db)
    elif pe.kind in ("plain-variable", "array-element") and pe.var_name:
        add_variable_fragments(ctx, pe.var_name, pe.binding, fn, file, db)
    return ctx


# ---------------------------------------------------------------------------
# call chains

def build_call_chain(site: AddressTakenSite, fn_name: str, db: ContextDatabase,
                     max_depth: int = DEFAULT_MAX_DEPTH) -> CallChain:
    """Follow ``fn_name`` through the parameters of the functions it is passed to."""
    if site.kind != "call-argument" or site.function != fn_name:
        raise ContextError(f"{site.text!r} is not a call-argument site of {fn_name}")
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    if site.callee_is_icall:
        return CallChain([], "EndsAtIcall", site.text)
    links: list[tuple[str, str]] = []
    seen: set[tuple[str, int]] = set()
    call_text, callee, index = site.text, site.callee, site.arg_index
    while True:
        target = db.function(callee) if callee else None
        if target is None:
            return CallChain(links, "Unresolved", call_text)
        if (callee, index) in seen:
            return CallChain(links, "Cycle", call_text)
        if len(links) >= max_depth:
            return CallChain(links, "DepthLimit", call_text)
        seen.add((callee, index))
        links.append((call_text, target.declarator_text))
        use = next((u for u in target.param_uses if u.param_index == index), None)
        if use is None:
            return CallChain(links, "Untracked", "", None, callee)
        if use.kind == "assigned":
            return CallChain(links, "AssignedInTarget", use.text, use, callee)
        if use.kind == "invoked":
            return CallChain(links, "DirectlyInvoked", use.text, use, callee)
        if use.callee_is_icall:
            return CallChain(links, "EndsAtIcall", use.text, use, callee)
        call_text, callee, index = use.text, use.callee, use.callee_arg_index
        if index < 0:
            return CallChain(links, "Unresolved", call_text)


def _target_fragments(ctx: GlobalContext, struct: str, fld: str, var: str, binding: str,
                      enclosing: str, file: str, db: ContextDatabase) -> None:
    if struct:
        add_field_fragments(ctx, struct, fld, db)
    elif var:
        add_variable_fragments(ctx, var, binding, db.function(enclosing), file, db)


def site_context(site: AddressTakenSite, db: ContextDatabase,
                 max_depth: int = DEFAULT_MAX_DEPTH) -> GlobalContext:
    ctx = GlobalContext(site.function)
    file = site.span.file
    if site.kind == "assignment":
        ctx.add("assignment-site", site.text)
        _target_fragments(ctx, site.target_struct, site.target_field, site.target_var,
                          site.target_binding, site.enclosing_function, file, db)
    elif site.kind == "initializer":
        ctx.add("initializer-site", site.text)
        if site.target_struct:
            add_field_fragments(ctx, site.target_struct, site.target_field, db)
        add_alias_fragments(ctx, site.enclosing_struct_or_var, db)
    else:
        chain = build_call_chain(site, site.function, db, max_depth)
        ctx.add("call-chain", chain.render())
        if chain.flagged:
            ctx.flags.append(f"call chain ends with {chain.terminal}")
        use = chain.terminal_use
        if chain.terminal == "AssignedInTarget" and use is not None:
            target_fn = db.function(chain.terminal_function)
            _target_fragments(ctx, use.target_struct, use.target_field, use.target_var,
                              use.target_binding, chain.terminal_function,
                              target_fn.file if target_fn else file, db)
    return ctx


def callee_site_contexts(fn_name: str, db: ContextDatabase,
                         max_depth: int = DEFAULT_MAX_DEPTH) -> list[GlobalContext]:
    """One global context per address-taken site, in site order."""
    return [site_context(s, db, max_depth) for s in db.sites_of(fn_name)]
