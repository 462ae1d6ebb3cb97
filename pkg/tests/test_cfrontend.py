import json
from pathlib import Path

import pytest

from sea.cfrontend import (
    ScopeInfo, discover_sources, enumerate_functions, find_icalls, parse_file,
)
from sea.contextdb import build_from_sources

FIX = Path(__file__).parent / "fixtures"
CORPUS = FIX / "corpus"
LABELS = json.loads((FIX / "corpus_labels.json").read_text())


def test_simple_function_parses_clean():
    root, diag = parse_file("a.c", "int f(void){return 0;}")
    assert [c.kind for c in root.children] == ["function-definition"]
    assert diag.clean and diag.parse_succeeded


def test_flarg_macro_declaration_contained():
    src = "struct dns_rdataset; typedef struct dns_rdataset dns_rdataset_t;\n" \
          "void f(void) {\n    dns_rdataset_t *rdataset DNS__FLARG;\n    int after = 1;\n}\n"
    root, diag = parse_file("a.c", src)
    decls = [n for n in root.walk() if n.kind == "declaration" and "rdataset DNS__FLARG" in n.text]
    assert decls, "macro-laden declaration must still be a declaration node"
    assert any(n.kind == "error" for n in decls[0].walk()) or diag.messages
    assert any(n.kind == "declaration" and n.text == "int after = 1;" for n in root.walk())


def test_cairo_conditional_initializer():
    src = (CORPUS / "12_cairo_ifdef.c").read_bytes()
    root, diag = parse_file("12_cairo_ifdef.c", src)
    assert diag.error_regions
    idents = {n.text for n in root.walk() if n.kind == "identifier"}
    assert "fc_create" in idents


def test_enumerate_functions_in_order():
    root, _ = parse_file("a.c", "int f(void){return 0;}\nstatic int g(int x){return x;}\nint h(void);")
    assert [f.name for f in enumerate_functions(root)] == ["f", "g"]


def test_enumerate_functions_empty_header():
    root, _ = parse_file("a.h", "struct s { int x; };\nint decl(void);\n")
    assert enumerate_functions(root) == []


def test_macro_broken_declarator_recorded():
    name = "11_macro_noapi.c"
    db = build_from_sources({name: (CORPUS / name).read_bytes()})
    fn = db.function_map["H5G_loc_find"]
    assert fn.params_unknown


def test_kr_definition_has_unknown_params():
    name = "14_kr_style.c"
    db = build_from_sources({name: (CORPUS / name).read_bytes()})
    kr = [f for f in db.function_map.values() if f.params_unknown]
    assert kr


def _icalls(src, funcs=()):
    root, _ = parse_file("a.c", src)
    return find_icalls(root, ScopeInfo(functions=set(funcs)))


def test_local_pointer_call_is_plain_variable():
    src = "void g(int); void f(void) { void (*fp)(int) = g; fp(3); }"
    sites = _icalls(src, ["g", "f"])
    assert len(sites) == 1
    assert sites[0].pointer_expr.kind == "plain-variable"
    assert sites[0].id == f"a.c:1:{src.index('fp(3)') + 1}"


def test_field_call_is_struct_field_access():
    sites = _icalls("void *f(struct m *ctx, void *cf) { return ctx->create_main_conf(cf); }")
    assert len(sites) == 1
    pe = sites[0].pointer_expr
    assert pe.kind == "struct-field-access" and pe.field_name == "create_main_conf"


def test_direct_call_is_not_icall():
    assert _icalls('int printf(const char *, ...); void f(void) { printf("x"); }', ["printf"]) == []


def test_unknown_name_call_is_not_icall():
    assert _icalls("void f(void) { EXTERNAL_MACRO(1); }") == []


def test_array_and_deref_calls():
    sites = _icalls("void f(void (**tab)(void), void (*p)(void)) { tab[1](); (*p)(); }")
    assert sorted(s.pointer_expr.kind for s in sites) == ["array-element", "plain-variable"]


def test_nginx_field_icall_classified():
    db = build_from_sources({p.relative_to(FIX / "projects/nginx").as_posix(): p.read_bytes()
                             for p in (FIX / "projects/nginx").rglob("*.[ch]")})
    (icall,) = db.icalls
    assert icall.id == "src/http/ngx_http.c:8:16"
    assert icall.pointer_expr.field_name == "create_main_conf"
    assert icall.pointer_expr.base_type_hint == "ngx_http_module_t"


def test_parse_is_deterministic():
    for f in sorted(CORPUS.glob("*.c")):
        src = f.read_bytes()
        a, da = parse_file(f.name, src)
        b, db = parse_file(f.name, src)
        assert [(n.kind, n.span) for n in a.walk()] == [(n.kind, n.span) for n in b.walk()]
        assert da == db


def test_icall_ids_match_labels_exactly():
    for name, lab in sorted(LABELS.items()):
        db = build_from_sources({name: (CORPUS / name).read_bytes()})
        got = {i.id.split(":", 1)[1]: i.pointer_expr.kind for i in db.icalls}
        assert got == lab["icalls"], name


def test_spans_are_one_based_and_nested():
    root, _ = parse_file("x/y.c", "int f(void)\n{\n  return 0;\n}\n")
    for n in root.walk():
        assert n.span.start_line >= 1 and n.span.start_col >= 1
        assert n.span.file == "x/y.c"
        for c in n.children:
            assert n.span.contains(c.span)


def test_unreadable_file_raises_with_path(tmp_path):
    with pytest.raises(OSError, match="missing.c"):
        parse_file("missing.c", root_dir=tmp_path)


def test_malformed_input_never_raises():
    for junk in ["}}}{{{", "int (*(*)", "#if\nstruct {", "\x00\x01", "f(" * 200]:
        root, diag = parse_file("j.c", junk)
        assert root is not None and diag.parse_succeeded


INJECTION = b" BOGUS_FLARG"


def _node_set(root):
    return {(n.kind, n.span.byte_range) for n in root.walk()}


def _injection_cases():
    for f in sorted(CORPUS.glob("*.c")):
        src = f.read_bytes()
        root, _ = parse_file(f.name, src)
        for item in root.children:
            if item.kind == "declaration" and item.text.endswith(";") and not item.has_error():
                yield pytest.param(f.name, item.span.byte_range, id=f"{f.stem}@{item.span.start_line}")


@pytest.mark.parametrize("name,rng", list(_injection_cases()))
def test_error_containment(name, rng):
    src = (CORPUS / name).read_bytes()
    root, _ = parse_file(name, src)
    a, b = rng
    damaged = src[:b - 1] + INJECTION + src[b - 1:]
    r2, _ = parse_file(name, damaged)
    k = len(INJECTION)
    before = {x for x in _node_set(root) if x[1][1] <= a}
    after = {(kind, (s + k, e + k)) for kind, (s, e) in _node_set(root) if s >= b}
    assert (before | after) <= _node_set(r2)


def test_discover_sources(tmp_path):
    (tmp_path / "d").mkdir()
    for p in ["a.c", "d/b.h", "d/c.txt", "e.cc"]:
        (tmp_path / p).write_text("")
    assert discover_sources(tmp_path) == ["a.c", "d/b.h"]
    assert discover_sources(tmp_path, ("cc",)) == ["e.cc"]
