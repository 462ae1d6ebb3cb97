"""Error-tolerant parsing of un-preprocessed C and discovery of indirect calls.

Parsing is delegated to tree-sitter, whose trees are converted into plain
:class:`SyntaxNode` objects.  Regions tree-sitter could not parse become
``error`` nodes; they never abort a file.
"""

from __future__ import annotations

import bisect
import logging
import posixpath
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterator, Mapping, Optional

import tree_sitter
import tree_sitter_c

from .typeexpr import TypeExpr, unknown_type

log = logging.getLogger(__name__)

_KIND_ALIASES = {
    "ERROR": "error",
    "type_definition": "typedef",
}
DECLARATOR_KINDS = frozenset({
    "pointer-declarator", "array-declarator", "function-declarator",
    "parenthesized-declarator", "attributed-declarator",
})
_DECLARATION_KINDS = frozenset({
    "declaration", "parameter-declaration", "field-declaration", "typedef",
    "function-definition",
})
_EXCLUDED_CONTEXTS = frozenset({
    "sizeof-expression", "alignof-expression", "offsetof-expression",
    "attribute-specifier", "attribute", "attribute-declaration",
    "ms-declspec-modifier", "preproc-def", "preproc-function-def",
    "preproc-call", "preproc-defined", "preproc-include",
})
_SCOPE_KINDS = frozenset({"compound-statement", "for-statement"})

# "type *name MACRO;" statements that tree-sitter cannot read as declarations
_MACRO_DECL_RE = re.compile(
    rb"^(?P<type>(?:(?:const|volatile|static|extern|register|struct|union|enum|unsigned|signed)\s+)*"
    rb"[A-Za-z_]\w*)(?P<stars>[\s*]*?\s*\**)\s*(?P<name>[A-Za-z_]\w*)"
    rb"(?P<macro>(?:\s+[A-Z_][A-Z0-9_]*(?:\([^;()]*\))?)+)\s*;$")


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int
    byte_range: tuple[int, int]

    def contains(self, other: "SourceSpan") -> bool:
        return (self.byte_range[0] <= other.byte_range[0]
                and other.byte_range[1] <= self.byte_range[1])

    def overlaps(self, other: "SourceSpan") -> bool:
        return (self.byte_range[0] < other.byte_range[1]
                and other.byte_range[0] < self.byte_range[1])


class SyntaxNode:
    """A node of the converted syntax tree.

    ``field`` is the grammar field under which the node hangs off its parent
    (``"function"``, ``"declarator"`` ...); ``op`` holds the operator token for
    expression nodes that have one.
    """

    __slots__ = ("kind", "span", "children", "field", "op", "parent", "nid", "_src")

    def __init__(self, kind: str, span: SourceSpan, src: bytes, field: Optional[str] = None,
                 op: Optional[str] = None):
        self.kind = kind
        self.span = span
        self.children: list[SyntaxNode] = []
        self.field = field
        self.op = op
        self.parent: Optional[SyntaxNode] = None
        self.nid = -1
        self._src = src

    @property
    def text(self) -> str:
        a, b = self.span.byte_range
        return self._src[a:b].decode("utf-8", "replace")

    @property
    def start(self) -> int:
        return self.span.byte_range[0]

    def child(self, field_name: str) -> Optional["SyntaxNode"]:
        for c in self.children:
            if c.field == field_name:
                return c
        return None

    def children_of(self, kind: str) -> list["SyntaxNode"]:
        return [c for c in self.children if c.kind == kind]

    def walk(self) -> Iterator["SyntaxNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def ancestors(self) -> Iterator["SyntaxNode"]:
        node = self.parent
        while node is not None:
            yield node
            node = node.parent

    def has_error(self) -> bool:
        return any(n.kind == "error" for n in self.walk())

    def __repr__(self) -> str:
        return f"SyntaxNode({self.kind}, {self.span.start_line}:{self.span.start_col})"


@dataclass
class ParseDiagnostics:
    file: str
    error_regions: list[SourceSpan] = field(default_factory=list)
    parse_succeeded: bool = True
    skipped_functions: list[str] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.error_regions


@dataclass(frozen=True)
class PointerExpr:
    """How an indirect call names its function pointer.

    ``kind`` is one of plain-variable, struct-field-access, array-element or
    other.  ``var_name``/``binding`` describe the root variable when there is
    one; ``base_type_hint`` is the struct tag of a field access when known.
    """

    kind: str
    text: str
    var_name: str = ""
    binding: str = ""
    base_type_hint: str = ""
    field_name: str = ""


@dataclass(frozen=True)
class IcallSite:
    id: str
    span: SourceSpan
    call_text: str
    pointer_expr: PointerExpr
    enclosing_function: str
    enclosing_file_dir: str
    arg_texts: tuple[str, ...] = ()
    arg_types: tuple[TypeExpr, ...] = ()
    args_error: bool = False


@dataclass(frozen=True)
class RawFunction:
    name: str
    declarator_text: str
    body_span: Optional[SourceSpan]
    node: SyntaxNode = field(compare=False, repr=False)
    declarator_broken: bool = False
    kr_style: bool = False


@dataclass(frozen=True)
class Binding:
    """What an identifier refers to at a use site."""

    name: str
    kind: str  # param | local | global
    declaration: Optional[SyntaxNode] = field(default=None, compare=False, repr=False)
    declarator: Optional[SyntaxNode] = field(default=None, compare=False, repr=False)
    function: str = ""
    type: Optional[TypeExpr] = None


@lru_cache(maxsize=1)
def _parser() -> tree_sitter.Parser:
    return tree_sitter.Parser(tree_sitter.Language(tree_sitter_c.language()))


class _Converter:
    def __init__(self, path: str, src: bytes):
        self.path = path
        self.src = src
        self.line_starts = [0] + [m.end() for m in re.finditer(rb"\n", src)]
        self.errors: list[SourceSpan] = []

    def span(self, start: int, end: int) -> SourceSpan:
        sl = bisect.bisect_right(self.line_starts, start) - 1
        el = bisect.bisect_right(self.line_starts, end) - 1
        return SourceSpan(self.path, sl + 1, start - self.line_starts[sl] + 1,
                          el + 1, end - self.line_starts[el] + 1, (start, end))

    def node(self, kind: str, start: int, end: int, field_name=None, op=None) -> SyntaxNode:
        n = SyntaxNode(kind, self.span(start, end), self.src, field_name, op)
        if kind == "error":
            self.errors.append(n.span)
        return n

    def convert(self, ts_node, field_name=None) -> SyntaxNode:
        kind = _KIND_ALIASES.get(ts_node.type, ts_node.type.replace("_", "-"))
        if ts_node.is_missing:
            kind = "error"
        if kind in ("struct-specifier", "union-specifier") and ts_node.child_by_field_name("body"):
            kind = kind.replace("specifier", "definition")
        recovered = self.recover_macro_declaration(ts_node, kind)
        if recovered is not None:
            recovered.field = field_name
            return recovered
        op_node = ts_node.child_by_field_name("operator")
        op = op_node.text.decode() if op_node is not None and not op_node.is_named else None
        node = self.node(kind, ts_node.start_byte, ts_node.end_byte, field_name, op)
        for i, child in enumerate(ts_node.children):
            if not child.is_named or child.type == "comment":
                continue
            c = self.convert(child, ts_node.field_name_for_child(i))
            c.parent = node
            node.children.append(c)
        return node

    def recover_macro_declaration(self, ts_node, kind: str) -> Optional[SyntaxNode]:
        """Rebuild ``T *name MACRO;`` as a declaration whose macro tail is an error."""
        if kind not in ("error", "expression-statement") or not ts_node.has_error:
            return None
        parent = ts_node.parent
        if parent is None or parent.type not in ("translation_unit", "compound_statement"):
            return None
        text = ts_node.text
        m = _MACRO_DECL_RE.match(text)
        if not m:
            return None
        base = ts_node.start_byte
        decl = self.node("declaration", ts_node.start_byte, ts_node.end_byte)
        type_kind = "primitive-type" if m.group("type").split()[-1] in (
            b"int", b"char", b"void", b"long", b"short", b"double", b"float") else "type-identifier"
        parts = [self.node(type_kind, base + m.start("type"), base + m.end("type"), "type")]
        name = self.node("identifier", base + m.start("name"), base + m.end("name"))
        stars = m.group("stars").count(b"*")
        declarator = name
        if stars:
            star_pos = base + m.start("stars") + m.group("stars").index(b"*")
            declarator = self.node("pointer-declarator", star_pos, name.span.byte_range[1])
            declarator.children.append(name)
            name.parent = declarator
            name.field = "declarator"
        declarator.field = "declarator"
        macro_start = base + m.start("macro") + (len(m.group("macro")) - len(m.group("macro").lstrip()))
        parts += [declarator, self.node("error", macro_start, base + m.end("macro"))]
        for p in parts:
            p.parent = decl
            decl.children.append(p)
        return decl


def parse_file(path: str, source_text: str | bytes | None = None,
               root_dir: Path | None = None) -> tuple[SyntaxNode, ParseDiagnostics]:
    """Parse one C file without preprocessing.

    ``path`` is the project-relative path recorded in spans.  When
    ``source_text`` is omitted the file is read from ``root_dir / path``;
    an unreadable file raises :class:`OSError` naming it.
    """
    path = path.replace("\\", "/")
    if source_text is None:
        full = (root_dir or Path(".")) / path
        try:
            source_text = full.read_bytes()
        except OSError as exc:
            raise OSError(exc.errno, f"cannot read {path}: {exc.strerror}", str(full)) from exc
    src = source_text.encode("utf-8") if isinstance(source_text, str) else bytes(source_text)
    tree = _parser().parse(src)
    conv = _Converter(path, src)
    root = conv.convert(tree.root_node)
    for i, node in enumerate(root.walk()):
        node.nid = i
    diag = ParseDiagnostics(path, sorted(conv.errors, key=lambda s: s.byte_range),
                            parse_succeeded=True)
    return root, diag


def declared_name(declarator: Optional[SyntaxNode]) -> Optional[SyntaxNode]:
    """Innermost identifier of a (possibly nested) declarator."""
    node = declarator
    while node is not None:
        if node.kind in ("identifier", "field-identifier", "type-identifier"):
            return node
        if node.kind == "init-declarator":
            node = node.child("declarator")
        elif node.kind in DECLARATOR_KINDS:
            inner = node.child("declarator")
            if inner is None:
                # parenthesized/attributed declarators carry an unnamed child
                inner = next((c for c in node.children if c.kind != "error"
                              and c.kind != "parameter-list"), None)
            node = inner
        elif node.kind == "error":
            node = next((c for c in node.children), None)
        else:
            return None
    return None


def is_function_declarator(declarator: Optional[SyntaxNode]) -> bool:
    """True when the declarator declares a function rather than a variable.

    The wrapper nearest the name decides: ``f(int)`` and ``*f(int)`` are
    functions, ``(*f)(int)`` is a pointer variable.
    """
    name = declared_name(declarator)
    if name is None:
        return False
    node = name.parent
    while node is not None and node.kind == "parenthesized-declarator":
        node = node.parent
    return node is not None and node.kind == "function-declarator"


def abstract_type_text(type_prefix: str, declarator: Optional[SyntaxNode]) -> str:
    """Spell the declared type with the declarator's name cut out."""
    if declarator is None:
        return type_prefix.strip()
    name = declared_name(declarator)
    text = declarator.text
    if name is not None:
        a = name.start - declarator.start
        b = name.span.byte_range[1] - declarator.start
        text = text[:a] + text[b:]
    return f"{type_prefix.strip()} {text.strip()}".strip()


def anon_struct_name(node: SyntaxNode) -> str:
    """Stable name for a struct/union definition without a tag."""
    parent = node.parent
    if parent is not None and parent.kind == "typedef":
        for c in parent.children:
            if c.field == "declarator":
                n = declared_name(c)
                if n is not None:
                    return n.text
    stem = re.sub(r"\W", "_", node.span.file)
    return f"__anon_{stem}_{node.start}"


def type_prefix_text(decl: SyntaxNode) -> str:
    """Specifier/qualifier text of a declaration (everything before the declarators)."""
    parts = []
    for c in decl.children:
        if c.field == "declarator" or c.kind in ("init-declarator", "error", "compound-statement"):
            continue
        if c.kind in ("storage-class-specifier", "attribute-specifier", "ms-declspec-modifier"):
            continue
        if c.kind in ("struct-definition", "union-definition", "enum-specifier"):
            tag = c.child("name")
            kw = c.kind.split("-")[0]
            parts.append(f"{kw} {tag.text if tag is not None else anon_struct_name(c)}")
            continue
        parts.append(c.text)
    return " ".join(parts)


def declarators_of(decl: SyntaxNode) -> list[tuple[SyntaxNode, Optional[SyntaxNode]]]:
    """(declarator, initializer value) pairs of a declaration node."""
    out = []
    for c in decl.children:
        if c.kind == "init-declarator":
            out.append((c.child("declarator"), c.child("value")))
        elif c.field == "declarator":
            out.append((c, None))
    return out


def _function_declarator(fn: SyntaxNode) -> Optional[SyntaxNode]:
    node = fn.child("declarator")
    while node is not None and node.kind != "function-declarator":
        nxt = node.child("declarator")
        if nxt is None:
            nxt = next((c for c in node.children if c.kind in DECLARATOR_KINDS), None)
        node = nxt
    return node


def enumerate_functions(root: SyntaxNode, diagnostics: Optional[ParseDiagnostics] = None
                        ) -> list[RawFunction]:
    """Function definitions in source order.

    Definitions swallowed by an error region are skipped and noted in
    ``diagnostics``.  A declarator broken by a macro suffix or written in
    K&R style is flagged so its parameters are treated as unknown.
    """
    out = []
    for node in root.walk():
        if node.kind != "function-definition":
            continue
        fdecl = _function_declarator(node)
        name_node = declared_name(fdecl) if fdecl is not None else None
        if name_node is None:
            if diagnostics is not None:
                diagnostics.skipped_functions.append(node.text.split("(")[0].strip()[-60:])
            continue
        if any(a.kind == "error" for a in node.ancestors()):
            if diagnostics is not None:
                diagnostics.skipped_functions.append(name_node.text)
            continue
        params = fdecl.child("parameters")
        broken = any(c.kind in ("error", "call-expression") for c in fdecl.children) or (
            params is not None and params.has_error())
        kr = params is not None and any(c.kind == "identifier" for c in params.children)
        if broken and diagnostics is not None:
            diagnostics.messages.append(
                f"{name_node.text}: declarator damaged by macro, parameter types unknown")
        body = node.child("body")
        out.append(RawFunction(name_node.text, fdecl.text, body.span if body else None,
                               node, broken, kr))
    return out


def parameters_of(fn: SyntaxNode) -> tuple[list[tuple[str, Optional[SyntaxNode], Optional[SyntaxNode]]], bool]:
    """Ordered (name, parameter-declaration, declarator) triples and a variadic flag.

    K&R definitions yield their identifier list with the matching
    old-style declarations when present.
    """
    fdecl = _function_declarator(fn)
    params = fdecl.child("parameters") if fdecl is not None else None
    if params is None:
        return [], False
    out = []
    variadic = False
    kr_decls = {}
    for c in fn.children:
        if c.kind == "declaration" and c.field != "body":
            for d, _ in declarators_of(c):
                n = declared_name(d)
                if n is not None:
                    kr_decls[n.text] = (c, d)
    for c in params.children:
        if c.kind == "variadic-parameter":
            variadic = True
        elif c.kind == "parameter-declaration":
            d = c.child("declarator")
            n = declared_name(d)
            if n is None and d is None and c.text.strip() == "void":
                continue
            out.append((n.text if n is not None else "", c, d))
        elif c.kind == "identifier":
            decl, d = kr_decls.get(c.text, (None, None))
            out.append((c.text, decl, d))
        elif c.kind == "error":
            n = next((x for x in c.walk() if x.kind == "identifier"), None)
            out.append((n.text if n is not None else "", c, None))
    return out, variadic


def is_declared_name(ident: SyntaxNode) -> bool:
    """True when the identifier is the name introduced by a declarator."""
    node, parent = ident, ident.parent
    if parent is not None and parent.kind == "parameter-list":
        return True  # K&R identifier list
    while parent is not None and parent.kind in DECLARATOR_KINDS:
        if parent.kind != "parenthesized-declarator" and node.field != "declarator":
            return False
        node, parent = parent, parent.parent
    if parent is None:
        return False
    if parent.kind == "init-declarator" or parent.kind in _DECLARATION_KINDS:
        return node.field == "declarator"
    return False


def in_excluded_context(ident: SyntaxNode) -> bool:
    """Identifiers in sizeof/attribute/preprocessor positions are not value uses."""
    prev = ident
    for a in ident.ancestors():
        if a.kind in _EXCLUDED_CONTEXTS:
            return True
        if a.kind in ("preproc-ifdef", "preproc-elifdef") and prev.field == "name":
            return True
        if a.kind in ("preproc-if", "preproc-elif") and prev.field == "condition":
            return True
        prev = a
    return False


def is_callee_position(ident: SyntaxNode) -> bool:
    return ident.field == "function" and ident.parent is not None \
        and ident.parent.kind == "call-expression"


def function_name_of(fn: SyntaxNode) -> Optional[str]:
    n = declared_name(_function_declarator(fn))
    return n.text if n is not None else None


def bind_identifiers(root: SyntaxNode, globals_: Mapping[str, Binding] | Callable[[str], Optional[Binding]],
                     declare: Optional[Callable[[str, SyntaxNode, Optional[SyntaxNode], str], Optional[TypeExpr]]] = None
                     ) -> dict[int, Binding]:
    """Resolve every identifier use to a parameter, local or global variable.

    Resolution is lexical: parameters, then block-scoped locals (visible after
    their declaration), then globals.  The result maps node ids of resolved
    identifier nodes to their binding; unresolved identifiers are absent.
    ``declare`` computes the type of a newly declared local.
    """
    lookup_global = globals_.get if isinstance(globals_, Mapping) else globals_
    result: dict[int, Binding] = {}
    scopes: list[dict[str, Binding]] = []
    fname = ""

    def lookup(name: str) -> Optional[Binding]:
        for scope in reversed(scopes):
            if name in scope:
                return scope[name]
        return lookup_global(name)

    def typed(name, decl, declarator, kind) -> Optional[TypeExpr]:
        return declare(name, decl, declarator, kind) if declare else None

    def visit(node: SyntaxNode) -> None:
        nonlocal fname
        kind = node.kind
        if kind == "function-definition":
            fname = function_name_of(node) or ""
            params, _ = parameters_of(node)
            scope = {}
            for name, decl, declarator in params:
                if name:
                    scope[name] = Binding(name, "param", decl, declarator, fname,
                                          typed(name, decl, declarator, "param"))
            scopes.append(scope)
            for c in node.children:
                if c.field == "body":
                    visit(c)
            scopes.pop()
            fname = ""
            return
        if kind == "identifier":
            if not is_declared_name(node):
                b = lookup(node.text)
                if b is not None:
                    result[node.nid] = b
            return
        pushed = kind in _SCOPE_KINDS and bool(fname)
        if pushed:
            scopes.append({})
        for c in node.children:
            visit(c)
        if kind == "declaration" and fname and scopes:
            for declarator, _ in declarators_of(node):
                if is_function_declarator(declarator):
                    continue
                n = declared_name(declarator)
                if n is not None:
                    scopes[-1][n.text] = Binding(n.text, "local", node, declarator, fname,
                                                 typed(n.text, node, declarator, "local"))
        if pushed:
            scopes.pop()

    visit(root)
    return result


@dataclass
class ScopeInfo:
    """Project-level name tables consulted when looking for indirect calls.

    ``functions`` holds every defined or declared function name; ``globals``
    maps global variable names to bindings.  ``typer`` (optional) types an
    expression node given the identifier bindings; ``qualify`` maps a
    function name in a file to its project key.
    """

    functions: set[str] = field(default_factory=set)
    globals: Mapping[str, Binding] = field(default_factory=dict)
    typer: Optional[Callable[[SyntaxNode], TypeExpr]] = None
    qualify: Callable[[str, str], str] = lambda name, file: name
    bindings: Optional[dict[int, Binding]] = None


def strip_parens(node: SyntaxNode) -> SyntaxNode:
    while node.kind == "parenthesized-expression" and len(node.children) == 1:
        node = node.children[0]
    return node


def root_variable(expr: SyntaxNode) -> Optional[SyntaxNode]:
    """Leftmost identifier of a field/subscript/deref chain."""
    node = strip_parens(expr)
    while True:
        if node.kind == "identifier":
            return node
        if node.kind == "field-expression":
            node = strip_parens(node.child("argument"))
        elif node.kind == "subscript-expression":
            node = strip_parens(node.child("argument"))
        elif node.kind == "pointer-expression":
            node = strip_parens(node.child("argument"))
        else:
            return None


def enclosing_function(node: SyntaxNode) -> Optional[SyntaxNode]:
    for a in node.ancestors():
        if a.kind == "function-definition":
            return a
    return None


def find_icalls(root: SyntaxNode, scope_info: ScopeInfo) -> list[IcallSite]:
    """Every call whose callee is not a plain, unshadowed function name.

    A bare identifier callee is an indirect call only when it resolves to a
    visible variable; unknown names (macros, external functions) are not.
    """
    bindings = scope_info.bindings
    if bindings is None:
        bindings = bind_identifiers(root, scope_info.globals)
    out = []
    for node in root.walk():
        if node.kind != "call-expression":
            continue
        callee = node.child("function")
        if callee is None:
            continue
        target = strip_parens(callee)
        if target.kind == "pointer-expression" and target.op == "*":
            target = strip_parens(target.child("argument"))
        if target.kind == "identifier":
            b = bindings.get(target.nid)
            if b is None:
                continue
            pexpr = PointerExpr("plain-variable", callee.text, target.text, b.kind)
        elif target.kind == "field-expression":
            var = root_variable(target)
            b = bindings.get(var.nid) if var is not None else None
            hint = ""
            if scope_info.typer is not None:
                bt = scope_info.typer(target.child("argument"))
                hint = bt.struct_name or ""
            fld = target.child("field")
            pexpr = PointerExpr("struct-field-access", callee.text,
                                var.text if var is not None else "", b.kind if b else "",
                                hint, fld.text if fld is not None else "")
        elif target.kind == "subscript-expression":
            var = root_variable(target)
            b = bindings.get(var.nid) if var is not None else None
            pexpr = PointerExpr("array-element", callee.text,
                                var.text if var is not None else "", b.kind if b else "")
        else:
            pexpr = PointerExpr("other", callee.text)
        fn = enclosing_function(node)
        fname = function_name_of(fn) if fn is not None else ""
        args = node.child("arguments")
        arg_nodes = [c for c in args.children if c.kind != "error"] if args is not None else []
        args_error = args is None or args.has_error()
        if scope_info.typer is not None:
            arg_types = tuple(scope_info.typer(a) for a in arg_nodes)
        else:
            arg_types = tuple(unknown_type(a.text) for a in arg_nodes)
        span = node.span
        out.append(IcallSite(
            id=f"{span.file}:{span.start_line}:{span.start_col}",
            span=span,
            call_text=node.text,
            pointer_expr=pexpr,
            enclosing_function=scope_info.qualify(fname, span.file) if fname else "",
            enclosing_file_dir=posixpath.dirname(span.file),
            arg_texts=tuple(a.text for a in arg_nodes),
            arg_types=arg_types,
            args_error=args_error,
        ))
    return out


def discover_sources(root: Path, extensions=("c", "h")) -> list[str]:
    """Project-relative paths of source files, sorted."""
    exts = {"." + e.lstrip(".") for e in extensions}
    files = [p.relative_to(root).as_posix() for p in root.rglob("*")
             if p.is_file() and p.suffix in exts]
    return sorted(files)
