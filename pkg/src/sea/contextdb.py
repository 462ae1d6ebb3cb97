"""The project context database.

Built in passes over every source file:

1. declarations: typedefs, struct definitions, globals, function
   definitions and prototypes (per file, merged order-independently);
2. value uses: address-taken functions with their assignment, initializer
   and call-argument sites, stores into struct fields, indirect-call sites
   and per-function facts about local pointers and parameter flow.

The database is a plain tree of dataclasses serialized as canonical JSON.
"""

from __future__ import annotations

import logging
import posixpath
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional

from . import serial
from .cfrontend import (
    Binding, IcallSite, ParseDiagnostics, ScopeInfo, SourceSpan, SyntaxNode,
    abstract_type_text, anon_struct_name, bind_identifiers, declared_name,
    declarators_of, discover_sources, enclosing_function, enumerate_functions,
    find_icalls, function_name_of, in_excluded_context, is_callee_position,
    is_declared_name, is_function_declarator, parameters_of, parse_file,
    strip_parens, type_prefix_text,
)
from .typeexpr import (
    TypeExpr, TypeResolver, array_dims, signature_type, unknown_type,
)

log = logging.getLogger(__name__)


@dataclass
class TypeAlias:
    name: str
    source_text: str
    type: TypeExpr
    definition_text: str
    file: str
    span: SourceSpan


@dataclass
class StructField:
    name: str
    type: TypeExpr
    decl_text: str
    array_dims: int = 0


@dataclass
class StructInfo:
    name: str
    fields: list[StructField]
    definition_text: str
    file: str
    span: SourceSpan
    kind: str = "struct"

    def field_index(self, name: str) -> int:
        for i, f in enumerate(self.fields):
            if f.name == name:
                return i
        return -1

    def get(self, name: str) -> Optional[StructField]:
        i = self.field_index(name)
        return self.fields[i] if i >= 0 else None


@dataclass
class GlobalVar:
    name: str
    type: TypeExpr
    decl_text: str
    initializer_text: str
    file: str
    span: SourceSpan
    array_dims: int = 0
    is_extern: bool = False


@dataclass
class Param:
    name: str
    type: TypeExpr
    decl_text: str


@dataclass
class LocalVar:
    name: str
    type: TypeExpr
    decl_text: str


@dataclass
class ParamUse:
    """One way a parameter's value flows inside its function.

    ``kind`` is ``assigned`` (stored into ``lhs_text``), ``invoked`` (called
    through) or ``passed`` (forwarded as argument ``callee_arg_index`` of a
    call to ``callee``).
    """

    param_index: int
    kind: str
    text: str
    lhs_text: str = ""
    target_struct: str = ""
    target_field: str = ""
    target_var: str = ""
    target_binding: str = ""
    callee: str = ""
    callee_arg_index: int = -1
    callee_is_icall: bool = False


@dataclass
class FunctionInfo:
    name: str
    key: str
    file: str
    span: SourceSpan
    declarator_text: str
    return_type: TypeExpr
    parameters: list[Param]
    is_variadic: bool
    params_unknown: bool
    local_vars: list[LocalVar]
    body_text: str
    partial: bool = False
    local_defs: dict[str, list[str]] = field(default_factory=dict)
    unsafe_locals: list[str] = field(default_factory=list)
    param_uses: list[ParamUse] = field(default_factory=list)

    def local(self, name: str) -> Optional[LocalVar]:
        return next((v for v in self.local_vars if v.name == name), None)

    def param(self, name: str) -> Optional[Param]:
        return next((p for p in self.parameters if p.name == name), None)


@dataclass
class AddressTakenSite:
    """A place where a function's address is taken.

    ``kind`` is ``assignment``, ``initializer`` or ``call-argument``.  Fields
    not relevant to the kind stay empty.  ``target_struct``/``target_field``
    name the struct field receiving the function when that is known.
    """

    function: str
    kind: str
    span: SourceSpan
    text: str
    enclosing_function: str = ""
    lhs_text: str = ""
    declared_entity: str = ""
    enclosing_struct_or_var: str = ""
    target_struct: str = ""
    target_field: str = ""
    target_var: str = ""
    target_binding: str = ""
    arg_index: int = -1
    callee: str = ""
    callee_is_icall: bool = False


@dataclass
class FieldStore:
    """A value stored into a struct field; ``struct`` is empty when the base type is unknown."""

    struct: str
    field: str
    value: str  # function | other
    functions: list[str]
    text: str
    file: str
    line: int


@dataclass
class ContextDatabase:
    project: str = ""
    type_alias_map: dict[str, TypeAlias] = field(default_factory=dict)
    struct_info_map: dict[str, StructInfo] = field(default_factory=dict)
    global_var_map: dict[str, GlobalVar] = field(default_factory=dict)
    function_map: dict[str, FunctionInfo] = field(default_factory=dict)
    func_to_call_exprs: dict[str, list[AddressTakenSite]] = field(default_factory=dict)
    func_to_declarations: dict[str, list[AddressTakenSite]] = field(default_factory=dict)
    func_to_assignments: dict[str, list[AddressTakenSite]] = field(default_factory=dict)
    address_taken: list[str] = field(default_factory=list)
    declared_functions: list[str] = field(default_factory=list)
    field_stores: list[FieldStore] = field(default_factory=list)
    icalls: list[IcallSite] = field(default_factory=list)
    diagnostics: dict[str, ParseDiagnostics] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    _resolver: Optional[TypeResolver] = field(default=None, init=False, compare=False, repr=False)

    # lookups -------------------------------------------------------------

    def resolver(self) -> TypeResolver:
        if self._resolver is None:
            self._resolver = TypeResolver({k: a.source_text for k, a in self.type_alias_map.items()})
        return self._resolver

    def resolve_type(self, raw_text: str, in_error_region: bool = False) -> TypeExpr:
        return self.resolver().resolve(raw_text, in_error_region)

    def function(self, key: str) -> Optional[FunctionInfo]:
        return self.function_map.get(key)

    def function_keys(self, name: str, file: str = "") -> list[str]:
        """Keys of definitions a bare name may denote from ``file``."""
        if name in self.function_map:
            return [name]
        if file and f"{name}@{file}" in self.function_map:
            return [f"{name}@{file}"]
        prefix = name + "@"
        return sorted(k for k in self.function_map if k.startswith(prefix))

    def global_var(self, name: str, file: str = "") -> Optional[GlobalVar]:
        if file and f"{name}@{file}" in self.global_var_map:
            return self.global_var_map[f"{name}@{file}"]
        return self.global_var_map.get(name)

    def struct(self, name: str) -> Optional[StructInfo]:
        return self.struct_info_map.get(name)

    def icall(self, icall_id: str) -> Optional[IcallSite]:
        return next((i for i in self.icalls if i.id == icall_id), None)

    def sites_of(self, key: str) -> list[AddressTakenSite]:
        """All address-taken sites of a function in file/offset order."""
        sites = (self.func_to_assignments.get(key, []) + self.func_to_declarations.get(key, [])
                 + self.func_to_call_exprs.get(key, []))
        return sorted(sites, key=lambda s: (s.span.file, s.span.byte_range, s.kind))

    # serialization -------------------------------------------------------

    def to_json(self) -> str:
        return serial.dumps(self)

    @classmethod
    def from_json(cls, text: str) -> "ContextDatabase":
        import json
        return serial.from_jsonable(cls, json.loads(text))

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "ContextDatabase":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def bare_name(key: str) -> str:
    return key.split("@", 1)[0]


def resolve_type(raw_type_text: str, db: ContextDatabase, in_error_region: bool = False) -> TypeExpr:
    """Normalize a type spelling against the database's typedefs."""
    return db.resolve_type(raw_type_text, in_error_region)


# ---------------------------------------------------------------------------
# address-taken identification

def address_taken_nodes(root: SyntaxNode, is_variable: Callable[[str, SyntaxNode], bool]
                        ) -> list[SyntaxNode]:
    """Identifier uses that take a function's address.

    An identifier qualifies when it is not the callee of a call expression
    and does not name a global or local variable at its use site.  Declared
    names and identifiers under sizeof/attributes/preprocessor conditions
    are not value uses and are skipped.
    """
    out = []
    for node in root.walk():
        if node.kind != "identifier":
            continue
        if is_callee_position(node) or is_declared_name(node) or in_excluded_context(node):
            continue
        if is_variable(node.text, node):
            continue
        out.append(node)
    return out


def identify_address_taken(root: SyntaxNode, resolver: Callable[[str, SyntaxNode], bool]) -> set[str]:
    """Names used as values that are not variables (see :func:`address_taken_nodes`)."""
    return {n.text for n in address_taken_nodes(root, resolver)}


# ---------------------------------------------------------------------------
# pass 1: declarations

@dataclass
class _RawAlias:
    name: str
    source_text: str
    definition_text: str
    span: SourceSpan
    in_error: bool


@dataclass
class _RawStruct:
    name: str
    kind: str
    fields: list[tuple[str, str, str, bool]]  # name, raw type, decl text, in error
    definition_text: str
    span: SourceSpan


@dataclass
class _RawGlobal:
    name: str
    raw_type: str
    decl_text: str
    initializer_text: str
    span: SourceSpan
    in_error: bool
    is_extern: bool


@dataclass
class _RawFunction:
    name: str
    span: SourceSpan
    declarator_text: str
    return_raw: str
    params: list[tuple[str, str, str]]  # name, raw type, decl text
    is_variadic: bool
    params_unknown: bool
    locals: list[tuple[str, str, str, bool]]
    body_text: str
    partial: bool


@dataclass
class FilePartial:
    """Pass-1 index of one file."""

    file: str
    diagnostics: ParseDiagnostics
    aliases: list[_RawAlias] = field(default_factory=list)
    structs: list[_RawStruct] = field(default_factory=list)
    globals: list[_RawGlobal] = field(default_factory=list)
    functions: list[_RawFunction] = field(default_factory=list)
    prototypes: list[str] = field(default_factory=list)


def _decl_type_text(decl: SyntaxNode, declarator: Optional[SyntaxNode]) -> str:
    return abstract_type_text(type_prefix_text(decl), declarator)


def _struct_fields(body: SyntaxNode) -> list[tuple[str, str, str, bool]]:
    out = []
    for c in body.children:
        if c.kind == "field-declaration":
            decls = [d for d in c.children if d.field == "declarator"]
            if not decls:
                # anonymous struct/union member: its fields are reachable directly
                inner = next((t for t in c.children if t.kind in ("struct-definition", "union-definition")), None)
                if inner is not None and inner.child("body") is not None:
                    out.extend(_struct_fields(inner.child("body")))
                continue
            prefix = type_prefix_text(c)
            for d in decls:
                n = declared_name(d)
                if n is not None:
                    out.append((n.text, abstract_type_text(prefix, d), c.text, c.has_error()))
        elif c.kind.startswith("preproc-") or c.kind == "error":
            out.extend(_struct_fields(c))
    return out


def _return_type_text(fn: SyntaxNode) -> str:
    prefix = type_prefix_text(fn)
    declarator = fn.child("declarator")
    node = declarator
    while node is not None and node.kind != "function-declarator":
        node = node.child("declarator") or next(
            (c for c in node.children if c.kind.endswith("declarator")), None)
    if declarator is None or node is None:
        return prefix
    text = declarator.text
    a = node.start - declarator.start
    b = node.span.byte_range[1] - declarator.start
    return f"{prefix} {(text[:a] + text[b:]).strip()}".strip()


def _overlaps_error(span: SourceSpan, diag: ParseDiagnostics) -> bool:
    return any(span.overlaps(e) or (e.byte_range[0] == e.byte_range[1] and span.contains(e))
               for e in diag.error_regions)


def collect_declarations(path: str, root: SyntaxNode, diag: ParseDiagnostics) -> FilePartial:
    part = FilePartial(path, diag)
    for node in root.walk():
        kind = node.kind
        if kind == "typedef":
            prefix = type_prefix_text(node)
            for d in node.children:
                if d.field != "declarator":
                    continue
                n = declared_name(d)
                if n is None:
                    continue
                part.aliases.append(_RawAlias(n.text, abstract_type_text(prefix, d), node.text,
                                              node.span, node.has_error()))
        elif kind in ("struct-definition", "union-definition"):
            tag = node.child("name")
            name = tag.text if tag is not None else anon_struct_name(node)
            body = node.child("body")
            part.structs.append(_RawStruct(name, kind.split("-")[0], _struct_fields(body) if body else [],
                                           node.text, node.span))
        elif kind == "declaration":
            in_fn = enclosing_function(node) is not None
            if in_fn:
                continue
            is_extern = any(c.kind == "storage-class-specifier" and c.text == "extern"
                            for c in node.children)
            for d, value in declarators_of(node):
                n = declared_name(d)
                if n is None:
                    continue
                if is_function_declarator(d):
                    part.prototypes.append(n.text)
                    continue
                part.globals.append(_RawGlobal(n.text, _decl_type_text(node, d), node.text,
                                               value.text if value is not None else "",
                                               node.span, node.has_error(), is_extern))
    for raw in enumerate_functions(root, diag):
        fn = raw.node
        params, variadic = parameters_of(fn)
        unknown = raw.declarator_broken or raw.kr_style
        plist = []
        for name, pdecl, pd in params:
            if unknown or pdecl is None or pdecl.kind == "error":
                plist.append((name, "", pdecl.text if pdecl is not None else name))
            else:
                plist.append((name, abstract_type_text(type_prefix_text(pdecl), pd)
                              if not pdecl.has_error() else "", pdecl.text))
        locals_ = []
        body = fn.child("body")
        if body is not None:
            for node in body.walk():
                if node.kind != "declaration":
                    continue
                for d, _ in declarators_of(node):
                    n = declared_name(d)
                    if n is None or is_function_declarator(d):
                        continue
                    locals_.append((n.text, _decl_type_text(node, d), node.text, node.has_error()))
        part.functions.append(_RawFunction(
            raw.name, fn.span, raw.declarator_text, _return_type_text(fn), plist, variadic,
            unknown, locals_, fn.text, _overlaps_error(fn.span, diag)))
    return part


# ---------------------------------------------------------------------------
# merge of pass-1 partials

class ProjectIndex:
    """Merged declarations with resolved types; consulted by pass 2."""

    def __init__(self, partials: Iterable[FilePartial]):
        partials = sorted(partials, key=lambda p: p.file)
        self.warnings: list[str] = []
        self.aliases: dict[str, TypeAlias] = {}
        raw_aliases: dict[str, _RawAlias] = {}
        alias_files: dict[str, str] = {}
        for p in partials:
            for a in p.aliases:
                if a.name not in raw_aliases:
                    raw_aliases[a.name] = a
                    alias_files[a.name] = p.file
        self.resolver = TypeResolver({n: a.source_text for n, a in raw_aliases.items()})
        for name, a in raw_aliases.items():
            t = self.resolver.resolve(a.source_text, a.in_error)
            self.aliases[name] = TypeAlias(name, a.source_text, t, a.definition_text,
                                           alias_files[name], a.span)
        for name in sorted(self.resolver.cycles):
            self.warnings.append(f"cyclic typedef chain through {name}")

        self.structs: dict[str, StructInfo] = {}
        for p in partials:
            for s in p.structs:
                if s.name in self.structs:
                    continue
                fields, seen = [], set()
                for fname, raw, text, err in s.fields:
                    if fname in seen:
                        continue
                    seen.add(fname)
                    fields.append(StructField(fname, self.resolver.resolve(raw, err), text,
                                              array_dims(raw)))
                self.structs[s.name] = StructInfo(s.name, fields, s.definition_text, p.file,
                                                  s.span, s.kind)

        by_name: dict[str, list[tuple[str, _RawGlobal]]] = {}
        for p in partials:
            for g in p.globals:
                by_name.setdefault(g.name, []).append((p.file, g))
        self.globals: dict[str, GlobalVar] = {}
        for name, entries in sorted(by_name.items()):
            defs = [(f, g) for f, g in entries if not g.is_extern] or entries[:1]
            files = []
            for f, g in defs:
                if f not in files:
                    files.append(f)
            for f in files:
                g = next(g for ff, g in defs if ff == f)
                key = name if len(files) == 1 else f"{name}@{f}"
                self.globals[key] = GlobalVar(
                    name, self.resolver.resolve(g.raw_type, g.in_error), g.decl_text,
                    g.initializer_text, f, g.span, array_dims(g.raw_type), g.is_extern)

        defs_by_name: dict[str, list[tuple[str, _RawFunction]]] = {}
        for p in partials:
            seen_here = set()
            for fn in p.functions:
                if fn.name in seen_here:
                    self.warnings.append(f"{p.file}: duplicate definition of {fn.name} ignored")
                    continue
                seen_here.add(fn.name)
                defs_by_name.setdefault(fn.name, []).append((p.file, fn))
        self.functions: dict[str, FunctionInfo] = {}
        for name, entries in sorted(defs_by_name.items()):
            for f, fn in entries:
                key = name if len(entries) == 1 else f"{name}@{f}"
                self.functions[key] = self._function_info(key, f, fn)
        self.defined_names = set(defs_by_name)
        self.declared = sorted({n for p in partials for n in p.prototypes} - self.defined_names)
        self.known_functions = self.defined_names | set(self.declared)

    def _function_info(self, key: str, file: str, fn: _RawFunction) -> FunctionInfo:
        r = self.resolver
        params = [Param(n, r.resolve(raw) if raw and not fn.params_unknown else unknown_type(raw),
                        text) for n, raw, text in fn.params]
        locals_ = [LocalVar(n, r.resolve(raw, err), text) for n, raw, text, err in fn.locals]
        return FunctionInfo(fn.name, key, file, fn.span, fn.declarator_text,
                            r.resolve(fn.return_raw), params, fn.is_variadic, fn.params_unknown,
                            locals_, fn.body_text, fn.partial)

    # lookups used by pass 2
    def function_keys(self, name: str, file: str) -> list[str]:
        if name in self.functions:
            return [name]
        if f"{name}@{file}" in self.functions:
            return [f"{name}@{file}"]
        prefix = name + "@"
        return sorted(k for k in self.functions if k.startswith(prefix))

    def qualify(self, name: str, file: str) -> str:
        keys = self.function_keys(name, file)
        return keys[0] if len(keys) == 1 else name

    def global_binding(self, file: str) -> Callable[[str], Optional[Binding]]:
        def lookup(name: str) -> Optional[Binding]:
            g = self.globals.get(f"{name}@{file}") or self.globals.get(name)
            if g is None:
                prefix = name + "@"
                g = next((v for k, v in sorted(self.globals.items()) if k.startswith(prefix)), None)
            if g is None:
                return None
            return Binding(name, "global", None, None, "", g.type)
        return lookup

    def function_type(self, key: str) -> TypeExpr:
        fn = self.functions.get(key)
        if fn is None or fn.params_unknown:
            return unknown_type(key)
        return signature_type(fn.return_type, [p.type for p in fn.parameters], fn.is_variadic)


# ---------------------------------------------------------------------------
# expression typing

_LITERAL_TYPES = {
    "string-literal": TypeExpr("char", 1, raw_text="char *"),
    "concatenated-string": TypeExpr("char", 1, raw_text="char *"),
    "char-literal": TypeExpr("char", 0, raw_text="char"),
    "true": TypeExpr("int", 0, raw_text="int"),
    "false": TypeExpr("int", 0, raw_text="int"),
    "null": TypeExpr("void", 1, raw_text="void *"),
    "sizeof-expression": TypeExpr("unsigned long", 0, raw_text="size_t"),
}
_COMPARISON_OPS = {"==", "!=", "<", ">", "<=", ">=", "&&", "||"}


class ExprTyper:
    """Best-effort static type of an expression node; unknown when unsure."""

    def __init__(self, index: ProjectIndex, bindings: Mapping[int, Binding], file: str):
        self.index = index
        self.bindings = bindings
        self.file = file

    def __call__(self, node: Optional[SyntaxNode]) -> TypeExpr:
        if node is None:
            return unknown_type()
        return self.type_of(node)

    def type_of(self, node: SyntaxNode) -> TypeExpr:
        kind = node.kind
        if kind in _LITERAL_TYPES:
            return _LITERAL_TYPES[kind]
        if kind == "number-literal":
            # literals convert implicitly (and 0 is also a null pointer)
            return unknown_type(node.text)
        if kind == "identifier":
            b = self.bindings.get(node.nid)
            if b is not None:
                return b.type if b.type is not None else unknown_type(node.text)
            if node.text == "NULL":
                return _LITERAL_TYPES["null"]
            keys = self.index.function_keys(node.text, self.file)
            if len(keys) == 1:
                return self.index.function_type(keys[0])
            return unknown_type(node.text)
        if kind == "parenthesized-expression" and node.children:
            return self.type_of(node.children[-1])
        if kind == "cast-expression":
            td = node.child("type")
            return self.index.resolver.resolve(td.text) if td is not None else unknown_type()
        if kind == "pointer-expression":
            inner = self.type_of(node.child("argument"))
            if inner.is_unknown:
                return inner
            if node.op == "&":
                if inner.is_function_pointer:
                    return inner
                return inner.with_depth(inner.pointer_depth + 1)
            if inner.is_function_pointer:
                return inner
            if inner.pointer_depth == 0:
                return unknown_type(node.text)
            return inner.with_depth(inner.pointer_depth - 1)
        if kind == "subscript-expression":
            inner = self.type_of(node.child("argument"))
            if inner.is_unknown or inner.pointer_depth == 0:
                return unknown_type(node.text)
            return inner.with_depth(inner.pointer_depth - 1)
        if kind == "field-expression":
            base = self.type_of(node.child("argument"))
            f = node.child("field")
            if base.is_unknown or f is None or base.struct_name is None:
                return unknown_type(node.text)
            info = self.index.structs.get(base.struct_name)
            fld = info.get(f.text) if info is not None else None
            return fld.type if fld is not None else unknown_type(node.text)
        if kind == "call-expression":
            callee = strip_parens(node.child("function"))
            if callee.kind == "identifier" and callee.nid not in self.bindings:
                keys = self.index.function_keys(callee.text, self.file)
                if len(keys) == 1:
                    return self.index.functions[keys[0]].return_type
            return unknown_type(node.text)
        if kind == "assignment-expression":
            return self.type_of(node.child("left"))
        if kind == "conditional-expression":
            return self.type_of(node.child("consequence") or node.children[-1])
        if kind == "binary-expression":
            if node.op in _COMPARISON_OPS:
                return TypeExpr("int", 0, raw_text="int")
            left = self.type_of(node.child("left"))
            if left.is_unknown or left.pointer_depth:
                return left
            right = self.type_of(node.child("right"))
            return right if right.pointer_depth else left
        if kind == "unary-expression":
            if node.op == "!":
                return TypeExpr("int", 0, raw_text="int")
            return self.type_of(node.child("argument"))
        if kind in ("update-expression", "comma-expression"):
            return self.type_of(node.children[-1]) if node.children else unknown_type()
        return unknown_type(node.text)


# ---------------------------------------------------------------------------
# pass 2: value uses

@dataclass
class FileFacts:
    file: str
    address_taken: set[str] = field(default_factory=set)
    sites: list[AddressTakenSite] = field(default_factory=list)
    field_stores: list[FieldStore] = field(default_factory=list)
    icalls: list[IcallSite] = field(default_factory=list)
    function_facts: dict[str, tuple[dict, list, list]] = field(default_factory=dict)


def _strip_value(node: SyntaxNode) -> SyntaxNode:
    while True:
        node = strip_parens(node)
        if node.kind == "cast-expression" and node.child("value") is not None:
            node = node.child("value")
        elif node.kind == "pointer-expression" and node.op == "&":
            node = node.child("argument")
        else:
            return node


def _statement_text(node: SyntaxNode) -> str:
    p = node.parent
    if p is not None and p.kind == "expression-statement":
        return p.text
    return node.text


class _FileAnalyzer:
    def __init__(self, index: ProjectIndex, path: str, root: SyntaxNode):
        self.index = index
        self.path = path
        self.root = root
        self.global_lookup = index.global_binding(path)
        self.bindings = bind_identifiers(root, self.global_lookup, self._declare)
        self.typer = ExprTyper(index, self.bindings, path)
        self.facts = FileFacts(path)

    def _declare(self, name, decl, declarator, kind) -> TypeExpr:
        if decl is None or decl.kind == "error":
            return unknown_type(name)
        return self.index.resolver.resolve(_decl_type_text(decl, declarator), decl.has_error())

    def is_variable(self, name: str, node: SyntaxNode) -> bool:
        return node.nid in self.bindings

    def function_ref(self, node: SyntaxNode) -> list[str]:
        """Definition keys an identifier value refers to (empty if not a function)."""
        if node.kind != "identifier" or node.nid in self.bindings:
            return []
        if node.text not in self.index.defined_names:
            return []
        return self.index.function_keys(node.text, self.path)

    def is_function_name(self, node: SyntaxNode) -> bool:
        return (node.kind == "identifier" and node.nid not in self.bindings
                and node.text in self.index.known_functions)

    def enclosing_key(self, node: SyntaxNode) -> str:
        fn = enclosing_function(node)
        name = function_name_of(fn) if fn is not None else None
        return self.index.qualify(name, self.path) if name else ""

    def run(self) -> FileFacts:
        for node in address_taken_nodes(self.root, self.is_variable):
            keys = self.function_ref(node)
            if not keys:
                continue
            self.facts.address_taken.update(keys)
            site = self.site_for(node)
            if site is not None:
                for k in keys:
                    self.facts.sites.append(AddressTakenSite(function=k, **site))
        self.collect_field_stores()
        scope = ScopeInfo(self.index.known_functions, {}, self.typer, self.index.qualify, self.bindings)
        self.facts.icalls = find_icalls(self.root, scope)
        for node in self.root.walk():
            if node.kind == "function-definition" and not any(a.kind == "error" for a in node.ancestors()):
                name = function_name_of(node)
                if name:
                    self.facts.function_facts[self.index.qualify(name, self.path)] = self.function_facts(node)
        return self.facts

    # sites -----------------------------------------------------------------

    def site_for(self, ident: SyntaxNode) -> Optional[dict]:
        prev = ident
        for a in ident.ancestors():
            if a.kind == "argument-list" and a.parent is not None and a.parent.kind == "call-expression":
                args = [c for c in a.children if c.kind != "error"]
                if prev not in args:
                    return None
                call = a.parent
                callee = strip_parens(call.child("function"))
                is_icall = not self.is_function_name(callee)
                callee_key = "" if is_icall else self.index.qualify(callee.text, self.path)
                if is_icall and callee.kind == "identifier" and callee.nid not in self.bindings:
                    is_icall = False  # unknown external function, not an icall
                return dict(kind="call-argument", span=call.span, text=call.text,
                            enclosing_function=self.enclosing_key(call), arg_index=args.index(prev),
                            callee=callee_key if callee_key in self.index.functions else "",
                            callee_is_icall=is_icall)
            if a.kind == "assignment-expression":
                if prev.field != "right":
                    return None
                lhs = a.child("left")
                target = self.describe_target(lhs)
                return dict(kind="assignment", span=a.span, text=_statement_text(a),
                            enclosing_function=self.enclosing_key(a), lhs_text=lhs.text, **target)
            if a.kind == "init-declarator":
                if prev.field != "value":
                    return None
                decl = a.parent
                n = declared_name(a.child("declarator"))
                if decl is None or n is None:
                    return None
                raw = _decl_type_text(decl, a.child("declarator"))
                struct, fld = self.initializer_target(decl, a, ident)
                binding = "local" if enclosing_function(decl) is not None else "global"
                return dict(kind="initializer", span=decl.span, text=decl.text,
                            enclosing_function=self.enclosing_key(decl), declared_entity=n.text,
                            enclosing_struct_or_var=raw, target_struct=struct, target_field=fld,
                            target_var=n.text, target_binding=binding)
            if a.kind in ("expression-statement", "compound-statement", "translation-unit",
                          "return-statement", "function-definition"):
                return None
            prev = a
        return None

    def describe_target(self, lhs: SyntaxNode) -> dict:
        lhs = strip_parens(lhs)
        if lhs.kind == "field-expression":
            base = self.typer(lhs.child("argument"))
            f = lhs.child("field")
            return dict(target_struct=base.struct_name or "", target_field=f.text if f else "")
        if lhs.kind == "identifier":
            b = self.bindings.get(lhs.nid)
            return dict(target_var=lhs.text, target_binding=b.kind if b else "")
        return {}

    def initializer_target(self, decl: SyntaxNode, init: SyntaxNode, leaf: SyntaxNode) -> tuple[str, str]:
        """Struct and field that receive ``leaf`` inside a declaration's initializer."""
        steps = []
        node = leaf
        for a in leaf.ancestors():
            if a is init:
                break
            if a.kind == "initializer-list":
                steps.append((a, node))
            node = a
        steps.reverse()
        if not steps:
            return "", ""
        d = init.child("declarator")
        raw = _decl_type_text(decl, d)
        t = self.index.resolver.resolve(raw, decl.has_error())
        return self.walk_initializer(t, array_dims(raw), steps)

    def walk_initializer(self, t: TypeExpr, dims: int, steps) -> tuple[str, str]:
        struct, fld = "", ""
        for lst, child in steps:
            if dims > 0:
                dims -= 1
                t = t.with_depth(max(t.pointer_depth - 1, 0))
                continue
            info = self.index.structs.get(t.struct_name) if t.struct_name and t.pointer_depth == 0 else None
            if info is None:
                return "", ""
            idx = self.element_field_index(lst, child, info)
            if idx < 0 or idx >= len(info.fields):
                return "", ""
            f = info.fields[idx]
            struct, fld = info.name, f.name
            t, dims = f.type, f.array_dims
        return struct, fld

    @staticmethod
    def element_field_index(lst: SyntaxNode, child: SyntaxNode, info: StructInfo) -> int:
        idx = -1
        for c in lst.children:
            if c.kind == "error":
                continue
            if c.kind == "initializer-pair":
                des = c.children[0] if c.children else None
                if des is not None and des.kind == "field-designator" and des.children:
                    idx = info.field_index(des.children[0].text)
                else:
                    idx += 1
            else:
                idx += 1
            if c is child:
                return idx
        return -1

    # field stores -----------------------------------------------------------

    def classify_value(self, value: SyntaxNode) -> tuple[str, list[str]]:
        v = _strip_value(value)
        if v.kind == "conditional-expression":
            kinds, funcs = [], []
            for part in (v.child("consequence"), v.child("alternative")):
                if part is None:
                    continue
                k, fs = self.classify_value(part)
                kinds.append(k)
                funcs += fs
            if "other" in kinds:
                return "other", []
            return ("function", funcs) if funcs else ("null", [])
        keys = self.function_ref(v)
        if keys:
            return "function", keys
        if v.kind == "null" or (v.kind == "identifier" and v.text == "NULL") or (
                v.kind == "number-literal" and v.text == "0"):
            return "null", []
        return "other", []

    def add_store(self, struct: str, fld: str, value: SyntaxNode, text: str, line: int) -> None:
        kind, funcs = self.classify_value(value)
        if kind == "null":
            return
        if kind == "other" and struct:
            info = self.index.structs.get(struct)
            f = info.get(fld) if info is not None else None
            if f is not None and not (f.type.is_unknown or f.type.is_function_pointer
                                      or f.type.resolved_base in ("void", "char")):
                return
        self.facts.field_stores.append(FieldStore(struct, fld, kind, sorted(set(funcs)), text,
                                                  self.path, line))

    def collect_field_stores(self) -> None:
        for node in self.root.walk():
            if node.kind == "assignment-expression" and node.op == "=":
                lhs = strip_parens(node.child("left")) if node.child("left") else None
                rhs = node.child("right")
                if lhs is None or rhs is None or lhs.kind != "field-expression":
                    continue
                base = self.typer(lhs.child("argument"))
                f = lhs.child("field")
                if f is None:
                    continue
                self.add_store(base.struct_name or "" if not base.is_unknown else "", f.text, rhs,
                               _statement_text(node), node.span.start_line)
            elif node.kind == "init-declarator":
                value = node.child("value")
                decl = node.parent
                if value is None or decl is None or value.kind != "initializer-list":
                    continue
                raw = _decl_type_text(decl, node.child("declarator"))
                t = self.index.resolver.resolve(raw, decl.has_error())
                for leaf in self.initializer_leaves(value):
                    struct, fld = self.initializer_target(decl, node, leaf)
                    if struct:
                        self.add_store(struct, fld, leaf, decl.text, leaf.span.start_line)
                del t

    def initializer_leaves(self, lst: SyntaxNode) -> Iterable[SyntaxNode]:
        for c in lst.children:
            if c.kind == "error":
                continue
            if c.kind == "initializer-pair":
                val = c.child("value") or (c.children[-1] if c.children else None)
                if val is None:
                    continue
                if val.kind == "initializer-list":
                    yield from self.initializer_leaves(val)
                else:
                    yield val
            elif c.kind == "initializer-list":
                yield from self.initializer_leaves(c)
            else:
                yield c

    # per-function facts ------------------------------------------------------

    def function_facts(self, fn: SyntaxNode) -> tuple[dict, list, list]:
        body = fn.child("body")
        local_defs: dict[str, list[str]] = {}
        unsafe: set[str] = set()
        declared: dict[str, int] = {}
        uses: list[ParamUse] = []
        params, _ = parameters_of(fn)
        param_index = {name: i for i, (name, _, _) in enumerate(params) if name}
        if body is None:
            return {}, [], []
        for node in body.walk():
            if node.kind == "declaration":
                for d, value in declarators_of(node):
                    n = declared_name(d)
                    if n is None or is_function_declarator(d):
                        continue
                    declared[n.text] = declared.get(n.text, 0) + 1
                    if value is not None:
                        local_defs.setdefault(n.text, []).append(value.text)
            elif node.kind == "assignment-expression":
                lhs = strip_parens(node.child("left")) if node.child("left") else None
                if lhs is not None and lhs.kind == "identifier":
                    b = self.bindings.get(lhs.nid)
                    if b is not None and b.kind == "local":
                        rhs = node.child("right")
                        if node.op != "=":
                            unsafe.add(lhs.text)
                        local_defs.setdefault(lhs.text, []).append(rhs.text if rhs else "")
            elif node.kind == "pointer-expression" and node.op == "&":
                arg = strip_parens(node.child("argument"))
                b = self.bindings.get(arg.nid) if arg.kind == "identifier" else None
                if b is not None and b.kind == "local":
                    unsafe.add(arg.text)
            elif node.kind == "identifier":
                b = self.bindings.get(node.nid)
                if b is not None and b.kind == "param" and b.name in param_index:
                    use = self.param_use(node, param_index[b.name])
                    if use is not None:
                        uses.append(use)
        unsafe.update(n for n, c in declared.items() if c > 1)
        return local_defs, sorted(unsafe), uses

    def param_use(self, ident: SyntaxNode, index: int) -> Optional[ParamUse]:
        node = ident
        parent = node.parent
        while parent is not None and (parent.kind in ("parenthesized-expression", "cast-expression")
                                      or (parent.kind == "pointer-expression" and parent.op == "*")):
            node, parent = parent, parent.parent
        if parent is None:
            return None
        if parent.kind == "call-expression" and node.field == "function":
            return ParamUse(index, "invoked", _statement_text(parent))
        if parent.kind == "assignment-expression" and node.field == "right":
            lhs = parent.child("left")
            return ParamUse(index, "assigned", _statement_text(parent), lhs_text=lhs.text,
                            **self.describe_target(lhs))
        if parent.kind == "init-declarator" and node.field == "value":
            n = declared_name(parent.child("declarator"))
            return ParamUse(index, "assigned", parent.parent.text if parent.parent else parent.text,
                            lhs_text=n.text if n else "", target_var=n.text if n else "",
                            target_binding="local")
        if parent.kind == "argument-list" and parent.parent is not None:
            call = parent.parent
            args = [c for c in parent.children if c.kind != "error"]
            callee = strip_parens(call.child("function"))
            if self.is_function_name(callee):
                key = self.index.qualify(callee.text, self.path)
                return ParamUse(index, "passed", _statement_text(call),
                                callee=key if key in self.index.functions else "",
                                callee_arg_index=args.index(node) if node in args else -1)
            return ParamUse(index, "passed", _statement_text(call),
                            callee_arg_index=args.index(node) if node in args else -1,
                            callee_is_icall=callee.kind != "identifier" or callee.nid in self.bindings)
        return None


# ---------------------------------------------------------------------------
# build

@dataclass
class BuildConfig:
    extensions: tuple[str, ...] = ("c", "h")


def _usable(root: SyntaxNode, diag: ParseDiagnostics) -> bool:
    if not root.children:
        return True
    ok = any(c.kind != "error" for c in root.children)
    diag.parse_succeeded = ok
    return ok


def build_from_sources(sources: Mapping[str, str | bytes], project: str = "") -> ContextDatabase:
    """Build the database from in-memory sources keyed by project-relative path."""
    parsed = {}
    for path in sorted(sources):
        parsed[path] = parse_file(path, sources[path])
    return _build(parsed, project)


def build_context_database(project_root: Path | str, config: Optional[BuildConfig] = None
                           ) -> ContextDatabase:
    """Parse every source file under ``project_root`` and build the database."""
    config = config or BuildConfig()
    root = Path(project_root)
    if not root.is_dir():
        raise OSError(f"project root {root} is not a readable directory")
    parsed = {}
    for path in discover_sources(root, config.extensions):
        parsed[path] = parse_file(path, root_dir=root)
    return _build(parsed, root.name)


def _build(parsed: Mapping[str, tuple[SyntaxNode, ParseDiagnostics]], project: str) -> ContextDatabase:
    usable = {p: rd for p, rd in parsed.items() if _usable(*rd)}
    for p in sorted(set(parsed) - set(usable)):
        log.warning("%s: no usable syntax tree, file skipped", p)
    partials = [collect_declarations(p, root, diag) for p, (root, diag) in usable.items()]
    index = ProjectIndex(partials)
    facts = [_FileAnalyzer(index, p, root).run() for p, (root, _) in usable.items()]
    db = assemble(index, facts, {p: d for p, (_, d) in parsed.items()}, project)
    if not parsed:
        db.warnings.append("empty project: no source files found")
    for p in sorted(set(parsed) - set(usable)):
        db.warnings.append(f"{p}: no usable syntax tree, file skipped")
    return db


def assemble(index: ProjectIndex, facts: Iterable[FileFacts],
             diagnostics: Mapping[str, ParseDiagnostics], project: str = "") -> ContextDatabase:
    """Merge per-file pass-2 facts; the result does not depend on input order."""
    facts = sorted(facts, key=lambda f: f.file)
    functions = dict(index.functions)
    address_taken: set[str] = set()
    by_kind: dict[str, dict[str, list[AddressTakenSite]]] = {
        "call-argument": {}, "initializer": {}, "assignment": {}}
    stores, icalls = [], []
    for f in facts:
        address_taken |= f.address_taken
        for s in f.sites:
            by_kind[s.kind].setdefault(s.function, []).append(s)
        stores += f.field_stores
        icalls += f.icalls
        for key, (defs, unsafe, uses) in f.function_facts.items():
            fn = functions.get(key)
            if fn is not None and fn.file == f.file:
                fn.local_defs = {k: v for k, v in sorted(defs.items())}
                fn.unsafe_locals = list(unsafe)
                fn.param_uses = list(uses)
    order = lambda s: (s.span.file, s.span.byte_range, s.function)
    maps = {k: {fn: sorted(v, key=order) for fn, v in sorted(m.items())} for k, m in by_kind.items()}
    return ContextDatabase(
        project=project,
        type_alias_map=dict(sorted(index.aliases.items())),
        struct_info_map=dict(sorted(index.structs.items())),
        global_var_map=dict(sorted(index.globals.items())),
        function_map=dict(sorted(functions.items())),
        func_to_call_exprs=maps["call-argument"],
        func_to_declarations=maps["initializer"],
        func_to_assignments=maps["assignment"],
        address_taken=sorted(address_taken),
        declared_functions=list(index.declared),
        field_stores=sorted(stores, key=lambda s: (s.file, s.line, s.struct, s.field, s.text)),
        icalls=sorted(icalls, key=lambda i: (i.span.file, i.span.byte_range)),
        diagnostics=dict(sorted(diagnostics.items())),
        warnings=list(index.warnings),
    )
