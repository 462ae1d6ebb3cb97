"""Source-level C type expressions.

Types are spelled as raw text (``"const char *"``, ``"void (*)(void *)"``)
and normalized into a :class:`TypeExpr`: a canonical base name, a pointer
depth and a function-pointer flag.  Arrays decay to pointers.  Function
types carry their canonical signature (``"void(void*)"``) as the base so
that two function pointers match only when their signatures agree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Optional

QUALIFIERS = frozenset({
    "const", "volatile", "restrict", "__restrict", "__restrict__", "__const",
    "__volatile__", "static", "extern", "register", "inline", "__inline",
    "__inline__", "auto", "_Thread_local", "__thread", "_Atomic", "_Noreturn",
})
BUILTIN_WORDS = frozenset({
    "void", "char", "short", "int", "long", "float", "double", "signed",
    "unsigned", "_Bool", "bool", "_Complex",
})
TAG_WORDS = frozenset({"struct", "union", "enum"})

_TOKEN_RE = re.compile(r"\.\.\.|[A-Za-z_]\w*|\S")


@dataclass(frozen=True)
class TypeExpr:
    resolved_base: str = ""
    pointer_depth: int = 0
    is_function_pointer: bool = False
    is_unknown: bool = False
    raw_text: str = ""

    @property
    def effective_depth(self) -> int:
        # a bare function type decays to a pointer in value positions
        if self.is_function_pointer and self.pointer_depth == 0:
            return 1
        return self.pointer_depth

    @property
    def struct_name(self) -> Optional[str]:
        """Tag name when the base is a struct or union, else None."""
        for tag in ("struct ", "union "):
            if self.resolved_base.startswith(tag):
                return self.resolved_base[len(tag):]
        return None

    def canonical(self) -> str:
        if self.is_unknown:
            return "?"
        return self.resolved_base + "*" * self.pointer_depth

    def with_depth(self, depth: int) -> "TypeExpr":
        return replace(self, pointer_depth=depth)


def unknown_type(raw_text: str = "") -> TypeExpr:
    return TypeExpr(is_unknown=True, raw_text=raw_text)


class TypeParseError(ValueError):
    pass


# parsed type tree: ("base", words) | ("ptr", T) | ("arr", T) | ("fn", T, params, variadic)

class _Parser:
    def __init__(self, text: str):
        self.toks = _TOKEN_RE.findall(text)
        self.pos = 0

    def peek(self, k: int = 0) -> Optional[str]:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise TypeParseError("unexpected end of type")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        if self.take() != tok:
            raise TypeParseError(f"expected {tok!r}")

    def specifiers(self) -> list[str]:
        words: list[str] = []
        named = False
        while True:
            tok = self.peek()
            if tok is None or not _is_ident(tok):
                break
            if tok in QUALIFIERS or tok.startswith("__attribute"):
                self.pos += 1
                continue
            if tok in TAG_WORDS:
                self.pos += 1
                tag = self.take()
                if not _is_ident(tag):
                    raise TypeParseError("missing tag name")
                words += [tok, tag]
                named = True
                continue
            if tok in BUILTIN_WORDS:
                words.append(tok)
                self.pos += 1
                continue
            if named or words:
                break  # declarator name
            words.append(tok)
            named = True
            self.pos += 1
        if not words:
            raise TypeParseError("no type specifier")
        return words

    def declarator(self) -> Callable:
        if self.peek() == "*":
            self.pos += 1
            while self.peek() in QUALIFIERS:
                self.pos += 1
            inner = self.declarator()
            return lambda t: inner(("ptr", t))
        return self.direct()

    def direct(self) -> Callable:
        nested: Callable = lambda t: t
        tok = self.peek()
        if tok == "(" and self.peek(1) in ("*", "(", "^"):
            self.pos += 1
            nested = self.declarator()
            self.expect(")")
        elif tok is not None and _is_ident(tok) and tok not in QUALIFIERS:
            self.pos += 1  # declarator name, dropped
        suffixes = []
        while self.peek() in ("[", "("):
            if self.take() == "[":
                depth = 1
                while depth:
                    t = self.take()
                    depth += (t == "[") - (t == "]")
                suffixes.append(("arr",))
            else:
                suffixes.append(("fn",) + self.params())
        def wrap(t):
            for suffix in reversed(suffixes):
                t = ("arr", t) if suffix[0] == "arr" else ("fn", t, suffix[1], suffix[2])
            return nested(t)
        return wrap

    def params(self):
        chunks: list[str] = []
        current: list[str] = []
        depth = 0
        while True:
            tok = self.take()
            if tok in ("(", "["):
                depth += 1
            if tok in (")", "]"):
                if depth == 0:
                    break
                depth -= 1
            if tok == "," and depth == 0:
                chunks.append(" ".join(current))
                current = []
                continue
            current.append(tok)
        if current:
            chunks.append(" ".join(current))
        variadic = bool(chunks) and chunks[-1] == "..."
        if variadic:
            chunks = chunks[:-1]
        if chunks == ["void"]:
            chunks = []
        return tuple(chunks), variadic


def _is_ident(tok: str) -> bool:
    return tok[0].isalpha() or tok[0] == "_"


def parse_type_text(text: str):
    """Parse a type spelling (optionally naming a declarator) into a type tree."""
    p = _Parser(text)
    base = ("base", tuple(p.specifiers()))
    tree = p.declarator()(base)
    if p.peek() is not None:
        raise TypeParseError(f"trailing tokens in {text!r}")
    return tree


def canonical_base_words(words: tuple[str, ...]) -> Optional[str]:
    """Normalize specifier words; None when they cannot form one known type."""
    if len(words) == 2 and words[0] in TAG_WORDS:
        return f"{words[0]} {words[1]}"
    if len(words) == 1 and words[0] not in BUILTIN_WORDS:
        return None  # typedef name with no definition in the project
    if not all(w in BUILTIN_WORDS for w in words):
        return None
    ws = list(words)
    if "bool" in ws or "_Bool" in ws:
        return "_Bool"
    if "void" in ws:
        return "void" if ws == ["void"] else None
    unsigned = "unsigned" in ws
    ws = [w for w in ws if w not in ("signed", "unsigned")]
    for solo in ("char", "float"):
        if solo in ws and len(ws) > 1:
            return None
    if "double" in ws and any(w != "long" for w in ws if w != "double"):
        return None
    if "char" in ws:
        core = "char"
    elif "double" in ws:
        core = "long double" if "long" in ws else "double"
    elif "float" in ws:
        core = "float"
    elif ws.count("long") >= 2:
        core = "long long"
    elif "long" in ws:
        core = "long"
    elif "short" in ws:
        core = "short"
    else:
        core = "int"
    return f"unsigned {core}" if unsigned else core


class TypeResolver:
    """Resolves raw type text against a typedef table, following alias chains."""

    def __init__(self, aliases: Mapping[str, str]):
        self.aliases = aliases
        self._memo: dict[str, TypeExpr] = {}
        self.cycles: set[str] = set()

    def resolve(self, raw_text: str, in_error_region: bool = False) -> TypeExpr:
        if in_error_region:
            return unknown_type(raw_text)
        key = raw_text
        if key not in self._memo:
            self._memo[key] = self._resolve(raw_text, frozenset())
        return self._memo[key]

    def _resolve(self, raw_text: str, seen: frozenset) -> TypeExpr:
        try:
            tree = parse_type_text(raw_text)
        except (TypeParseError, IndexError):
            return unknown_type(raw_text)
        t = self._from_tree(tree, seen)
        return replace(t, raw_text=raw_text)

    def _from_tree(self, tree, seen: frozenset) -> TypeExpr:
        depth = 0
        while tree[0] in ("ptr", "arr"):
            depth += 1
            tree = tree[1]
        if tree[0] == "fn":
            ret = self._from_tree(tree[1], seen)
            params = [self._resolve(p, seen) for p in tree[2]]
            sig_params = ",".join(_sig_part(p) for p in params)
            if tree[3]:
                sig_params += ",..." if sig_params else "..."
            sig = f"{_sig_part(ret)}({sig_params})"
            return TypeExpr(sig, depth, True, False)
        words = tree[1]
        if len(words) == 1 and words[0] in self.aliases:
            name = words[0]
            if name in seen:
                self.cycles.add(name)
                return unknown_type()
            target = self._resolve(self.aliases[name], seen | {name})
            if target.is_unknown:
                return target
            return replace(target, pointer_depth=target.pointer_depth + depth)
        base = canonical_base_words(words)
        if base is None:
            return unknown_type()
        return TypeExpr(base, depth, False, False)


def _sig_part(t: TypeExpr) -> str:
    if t.is_unknown:
        return "?"
    return t.resolved_base + "*" * t.effective_depth


def resolve_type_text(raw_text: str, aliases: Mapping[str, str] | None = None,
                      in_error_region: bool = False) -> TypeExpr:
    return TypeResolver(aliases or {}).resolve(raw_text, in_error_region)


def is_generic_pointer(t: TypeExpr) -> bool:
    return (not t.is_unknown and not t.is_function_pointer
            and t.pointer_depth == 1 and t.resolved_base in ("void", "char"))


def types_match(arg: TypeExpr, param: TypeExpr) -> bool:
    """Conservative per-parameter compatibility check.

    Unknown types match anything; ``void*``/``char*`` on either side match any
    pointer; otherwise base and depth must agree after alias resolution.
    """
    if arg.is_unknown or param.is_unknown:
        return True
    a_depth, p_depth = arg.effective_depth, param.effective_depth
    if a_depth >= 1 and p_depth >= 1 and (is_generic_pointer(arg) or is_generic_pointer(param)):
        return True
    return (arg.resolved_base == param.resolved_base and a_depth == p_depth
            and arg.is_function_pointer == param.is_function_pointer)


def array_dims(raw_text: str) -> int:
    """Number of outermost array layers in a type spelling (0 when unparsable)."""
    try:
        tree = parse_type_text(raw_text)
    except (TypeParseError, IndexError):
        return 0
    n = 0
    while tree[0] == "arr":
        n += 1
        tree = tree[1]
    return n


def signature_type(ret: TypeExpr, params: list[TypeExpr], variadic: bool) -> TypeExpr:
    """Function-pointer type for a function with the given parts."""
    sig_params = ",".join(_sig_part(p) for p in params)
    if variadic:
        sig_params += ",..." if sig_params else "..."
    return TypeExpr(f"{_sig_part(ret)}({sig_params})", 1, True, False)
