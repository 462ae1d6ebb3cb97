import json
import random
from pathlib import Path

import pytest

from sea.cfrontend import parse_file
from sea.contextdb import (
    ContextDatabase, ProjectIndex, _FileAnalyzer, assemble, build_context_database,
    build_from_sources, collect_declarations, identify_address_taken, resolve_type,
)

FIX = Path(__file__).parent / "fixtures"
CORPUS = FIX / "corpus"
LABELS = json.loads((FIX / "corpus_labels.json").read_text())
PROJECTS = FIX / "projects"


def _db(name):
    return build_from_sources({name: (CORPUS / name).read_bytes()})


def observe(db):
    """Database facts in the same shape as the hand labels."""
    def sites(m, f):
        return {k: sorted(f(s) for s in v) for k, v in m.items()}
    return {
        "address_taken": sorted(db.address_taken),
        "icalls": {i.id.split(":", 1)[1]: i.pointer_expr.kind for i in db.icalls},
        "type_aliases": sorted(db.type_alias_map),
        "structs": sorted(db.struct_info_map),
        "globals": sorted(db.global_var_map),
        "functions": sorted(db.function_map),
        "declared": db.declared_functions,
        "call_exprs": sites(db.func_to_call_exprs, lambda s: [s.enclosing_function, s.arg_index]),
        "declarations": sites(db.func_to_declarations, lambda s: s.declared_entity),
        "assignments": sites(db.func_to_assignments, lambda s: s.lhs_text),
    }


def _normalize(key, value):
    if isinstance(value, dict) and key != "icalls":
        return {a: sorted(b) for a, b in value.items()}
    return value


def test_corpus_size():
    assert len(LABELS) >= 30
    assert sorted(LABELS) == sorted(p.name for p in CORPUS.glob("*.c"))


@pytest.mark.parametrize("name", sorted(LABELS))
def test_corpus_oracle(name):
    obs = observe(_db(name))
    for key, expected in LABELS[name].items():
        if key == "caller_fragments":
            continue  # checked in test_context
        assert obs[key] == _normalize(key, expected), f"{name}: {key}"


def test_oracle_detects_a_planted_error():
    name = "01_assign_simple.c"
    planted = dict(LABELS[name])
    planted["address_taken"] = planted["address_taken"] + ["not_a_function"]
    obs = observe(_db(name))
    assert obs["address_taken"] != planted["address_taken"]


def _all_dbs():
    for name in sorted(LABELS):
        yield _db(name)
    for p in sorted(PROJECTS.iterdir()):
        yield build_context_database(p)


def test_site_closure():
    for db in _all_dbs():
        taken = set(db.address_taken)
        for m in (db.func_to_call_exprs, db.func_to_declarations, db.func_to_assignments):
            for fn, sites in m.items():
                assert fn in taken
                assert all(s.function == fn for s in sites)


def test_address_taken_are_defined_functions():
    for db in _all_dbs():
        assert set(db.address_taken) <= set(db.function_map)


def test_call_argument_index_in_range():
    for db in _all_dbs():
        for sites in db.func_to_call_exprs.values():
            for s in sites:
                assert 0 <= s.arg_index


def test_round_trip_and_determinism(tmp_path):
    for p in sorted(PROJECTS.iterdir()):
        a = build_context_database(p)
        b = build_context_database(p)
        assert a.to_json() == b.to_json()
        back = ContextDatabase.from_json(a.to_json())
        assert back == a
        assert back.to_json() == a.to_json()
        a.save(tmp_path / "db.json")
        assert ContextDatabase.load(tmp_path / "db.json") == a


def _sources(project):
    return {p.relative_to(project).as_posix(): p.read_bytes()
            for p in sorted(project.rglob("*")) if p.suffix in (".c", ".h")}


@pytest.mark.parametrize("project", ["mini", "nginx", "dupes", "scope"])
def test_merge_order_independent(project):
    sources = _sources(PROJECTS / project)
    reference = build_from_sources(sources, project).to_json()
    rng = random.Random(7)
    for _ in range(5):
        parsed = {p: parse_file(p, s) for p, s in sources.items()}
        order = list(parsed)
        rng.shuffle(order)
        partials = [collect_declarations(p, *parsed[p]) for p in order]
        index = ProjectIndex(partials)
        rng.shuffle(order)
        facts = [_FileAnalyzer(index, p, parsed[p][0]).run() for p in order]
        db = assemble(index, facts, {p: parsed[p][1] for p in order}, project)
        assert db.to_json() == reference


def test_empty_project_warns(tmp_path):
    db = build_context_database(tmp_path)
    assert db.function_map == {} and db.icalls == []
    assert any("empty project" in w for w in db.warnings)


def test_missing_root_raises(tmp_path):
    with pytest.raises(OSError):
        build_context_database(tmp_path / "nope")


def test_typedef_function_pointer_alias():
    db = build_from_sources({"a.c": "typedef void (*sdp_free_func_t)(void*);\n"})
    t = db.type_alias_map["sdp_free_func_t"].type
    assert t.is_function_pointer and t.resolved_base == "void(void*)"
    assert resolve_type("sdp_free_func_t", db).is_function_pointer


def test_resolve_type_examples():
    db = build_from_sources({"a.c": "typedef int myint; typedef myint *intp;\n"})
    t = resolve_type("const char *", db)
    assert (t.resolved_base, t.pointer_depth) == ("char", 1)
    t = resolve_type("intp *", db)
    assert (t.resolved_base, t.pointer_depth) == ("int", 2)
    assert resolve_type("int", db, in_error_region=True).is_unknown


def test_alias_idempotence_over_projects():
    for db in _all_dbs():
        for alias in db.type_alias_map.values():
            t = alias.type
            if t.is_unknown or t.is_function_pointer:
                continue
            again = resolve_type(t.canonical(), db)
            assert (again.resolved_base, again.pointer_depth) == (t.resolved_base, t.pointer_depth)


def test_cyclic_typedef_warns():
    db = build_from_sources({"a.c": "typedef b_t a_t; typedef a_t b_t; a_t x;"})
    assert db.type_alias_map["a_t"].type.is_unknown
    assert any("cyclic" in w for w in db.warnings)


def test_nginx_initializer_site():
    db = build_context_database(PROJECTS / "nginx")
    (site,) = db.func_to_declarations["ngx_http_log_create_main_conf"]
    assert site.declared_entity == "ngx_http_log_module_ctx"
    assert (site.target_struct, site.target_field) == ("ngx_http_module_t", "create_main_conf")


def test_register_call_argument_index():
    db = build_from_sources({"a.c": "int cmp(int a) { return a; }\n"
                                    "void reg(int (*f)(int), int n);\n"
                                    "void g(void) { reg(cmp, 3); }\n"})
    (site,) = db.func_to_call_exprs["cmp"]
    assert site.arg_index == 0 and site.enclosing_function == "g"


def test_duplicate_statics_are_qualified():
    db = build_context_database(PROJECTS / "dupes")
    assert "cleanup@a.c" in db.function_map and "cleanup@b.c" in db.function_map
    assert "cleanup" not in db.function_map
    assert db.function_keys("cleanup", "a.c") == ["cleanup@a.c"]
    assert db.function_keys("cleanup") == ["cleanup@a.c", "cleanup@b.c"]


def test_prototypes_are_not_candidates():
    db = build_from_sources({"a.c": "void ext(void);\nvoid (*p)(void) = ext;\n"})
    assert "ext" in db.declared_functions
    assert db.address_taken == []


# identify_address_taken on snippets, checked against a brute-force oracle
# that applies the rule directly to every identifier.

def _address_taken(src, variables=()):
    root, _ = parse_file("s.c", src)
    return identify_address_taken(root, lambda name, node: name in variables)


def _brute_force(src, variables=()):
    from sea.cfrontend import in_excluded_context, is_callee_position, is_declared_name
    root, _ = parse_file("s.c", src)
    out = set()
    for n in root.walk():
        if n.kind == "identifier" and n.text not in variables and not (
                is_callee_position(n) or is_declared_name(n) or in_excluded_context(n)):
            out.add(n.text)
    return out


SNIPPETS = [
    ("void f(void) { foo(); bar(x); }", ("x",), set()),
    ("void f(void) { cb = handler; qsort(a, n, sz, cmp); int y = x; }",
     ("cb", "a", "n", "sz", "x", "y"), {"handler", "cmp"}),
    ("static T ctx = { NULL, ngx_http_log_create_main_conf, ngx_http_log_init };", ("NULL",),
     {"ngx_http_log_create_main_conf", "ngx_http_log_init"}),
    ("void f(void) { n = sizeof(handler); }", ("n",), set()),
    ("void f(void) { g(h)(k); }", (), {"h", "k"}),
]


@pytest.mark.parametrize("src,variables,expected", SNIPPETS)
def test_identify_address_taken_snippets(src, variables, expected):
    assert _address_taken(src, variables) == expected
    assert _brute_force(src, variables) == expected
