import json

import httpx
import pytest

from sea.context import FRAGMENT_CAP, TRUNCATED, GlobalContext
from sea.llm import (
    AMBIGUOUS, NO, YES, ConfigError, Engine, LlmConfig, MockBackend, ProtocolError, RemoteBackend,
    ResponseCache, SummaryBundle, TransportError, make_backend, parse_verdict,
    render_consolidation_prompt, render_match_prompt, render_summary_prompt,
    summarize_callee_global,
)
from sea.llm.backends import fingerprint, match_sections, tokens
from sea.llm.engine import majority
from sea.llm.prompts import PromptError

CALLER_SENTENCE = "Analyze the functionality of the indirect call and response with a concise summary."
CONSOLIDATE_SENTENCE = "Please consolidate those summaries."
MATCH_SENTENCE = ("Assess if the caller could invoke callee based on the semantic information given "
                  "above. Answer with `yes' or `no'.")
FULL = SummaryBundle("CL", "CG", "EL", "EG")


# prompts ---------------------------------------------------------------------

def test_caller_local_prompt_snapshot():
    p = render_summary_prompt("int f(void) { return g(); }", "CallerLocal")
    assert p == ("The local context for the indirect-call is listed as follows:\n\n"
                 "int f(void) { return g(); }\n\n" + CALLER_SENTENCE)


def test_callee_site_prompt_names_target():
    p = render_summary_prompt("x.fn = target;", "CalleeSite", "target")
    assert "address-taken site" in p and "target" in p
    assert p.startswith("The address-taken site for the target function target is listed as follows:")
    assert p.endswith("with a concise summary.")


@pytest.mark.parametrize("role", ["CallerLocal", "CallerGlobal", "CalleeLocal", "CalleeSite"])
def test_every_role_embeds_context_verbatim(role):
    ctx = "struct s {\n    int (*cb)(void);\n};"
    p = render_summary_prompt(ctx, role, "fn")
    assert f"\n\n{ctx}\n\n" in p and p.endswith("concise summary.")


def test_truncated_context_reaches_prompt():
    g = GlobalContext("x")
    g.add("struct-definition", "y" * (FRAGMENT_CAP * 2))
    assert TRUNCATED in render_summary_prompt(g.render(), "CallerGlobal")


def test_summary_prompt_contract():
    with pytest.raises(PromptError):
        render_summary_prompt("  ", "CallerLocal")
    with pytest.raises(PromptError):
        render_summary_prompt("x", "Nobody")


def test_consolidation_prompt_snapshot():
    p = render_consolidation_prompt(["first", "second"])
    assert p == ("The summaries of each address-taken site for the target function are:\n\n"
                 "first,\n\nsecond\n\n" + CONSOLIDATE_SENTENCE)
    with pytest.raises(PromptError):
        render_consolidation_prompt(["only"])


def test_full_match_prompt_layout():
    p = render_match_prompt(FULL)
    assert p == ("The subsequent text provides the summary of the caller and callee:\n\n"
                 "# 1.summary of caller\n\n## 1.1.CallerLocalSummary\n\nCL\n\n"
                 "## 1.2.CallerGlobalSummary\n\nCG\n\n# 2.summary of callee\n\n"
                 "## 2.1.CalleeLocalSummary\n\nEL\n\n## 2.2.CalleeGlobalSummary\n\nEG\n\n"
                 + MATCH_SENTENCE)


def test_ablation_modes_omit_sections():
    wo_local = render_match_prompt(FULL, "WoLocal")
    assert "1.1." not in wo_local and "2.1." not in wo_local
    assert "CG" in wo_local and "EG" in wo_local
    wo_global = render_match_prompt(FULL, "WoGlobal")
    assert "1.2." not in wo_global and "2.2." not in wo_global
    assert "CL" in wo_global and "EL" in wo_global


def test_woall_uses_statement_and_name_only():
    p = render_match_prompt(FULL, "WoAll", "isc->log(ctx, msg)", "towire_compare")
    assert "isc->log(ctx, msg)" in p and "towire_compare" in p and p.endswith(MATCH_SENTENCE)
    for s in ("CL", "CG", "EL", "EG"):
        assert f"\n{s}\n" not in p
    with pytest.raises(PromptError):
        render_match_prompt(FULL, "WoAll")


def test_woglobal_equals_full_without_globals():
    b = SummaryBundle("CL", None, "EL", None)
    assert render_match_prompt(b, "WoGlobal") == render_match_prompt(b, "Full")


def test_match_prompt_contract():
    with pytest.raises(PromptError):
        render_match_prompt(SummaryBundle())
    with pytest.raises(PromptError):
        render_match_prompt(FULL, "Partial")


# verdicts --------------------------------------------------------------------

@pytest.mark.parametrize("raw,expected", [
    ("Yes, the caller clearly invokes it.", YES),
    ("no.", NO),
    ("NO", NO),
    ("It depends on runtime state", AMBIGUOUS),
    ("yes or no, hard to say", AMBIGUOUS),
    ("Yesterday nobody knew", AMBIGUOUS),
    ("answer: `yes'", YES),
    ("", AMBIGUOUS),
    (None, AMBIGUOUS),
    ("\x00\xff yes\n", YES),
])
def test_parse_verdict(raw, expected):
    assert parse_verdict(raw) == expected


@pytest.mark.parametrize("votes,expected", [
    ([YES, NO, NO], NO),
    ([YES, YES, NO], YES),
    ([YES, NO], YES),
    ([AMBIGUOUS, NO], YES),
    ([AMBIGUOUS, NO, NO], NO),
    ([AMBIGUOUS, AMBIGUOUS], AMBIGUOUS),
])
def test_majority(votes, expected):
    assert majority(votes) == expected


# cache -----------------------------------------------------------------------

def test_cache_round_trip_on_disk(tmp_path):
    path = tmp_path / "c.jsonl"
    c = ResponseCache(path)
    c.put("sha", "m", 0.5, 0, "réponse\nmultiline")
    c.put("sha", "m", 0.5, 0, "ignored")
    assert c.get("sha", "m", 0.5, 0) == "réponse\nmultiline"
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    rec = json.loads(lines[0])
    assert set(rec) == {"key_hash", "model", "temperature", "run", "prompt_sha", "response"}
    again = ResponseCache(path)
    assert again.get("sha", "m", 0.5, 0) == "réponse\nmultiline"
    assert again.get("sha", "m", 0.5, 1) is None
    assert again.get("sha", "m", 0.25, 0) is None
    assert again.stats() == {"entries": 1, "hits": 1, "misses": 2, "writes": 0}


def test_cache_corrupt_line_reports_location(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"key_hash": "a", "response": "x"}\nnot json\n')
    with pytest.raises(ValueError, match="c.jsonl:2"):
        ResponseCache(path)


def test_engine_second_call_uses_cache():
    backend = MockBackend("always-yes")
    eng = Engine(LlmConfig(), ResponseCache(), backend)
    p = render_match_prompt(FULL)
    first = eng.complete(p)
    second = eng.complete(p)
    assert first == second == "yes"
    assert eng.backend_calls == 1 and len(backend.calls) == 1


def test_runs_per_query_majority():
    answers = iter(["yes", "no", "no"])

    class Scripted:
        name = "scripted"

        def complete(self, prompt, model, temperature, max_tokens):
            return next(answers)

    eng = Engine(LlmConfig(runs_per_query=3), ResponseCache(), Scripted())
    v = eng.match(render_match_prompt(FULL))
    assert v.decision == NO and v.raw_responses == ["yes", "no", "no"]
    assert v.prompt_fingerprint == fingerprint(render_match_prompt(FULL))


# mocks -----------------------------------------------------------------------

def test_mock_is_pure():
    p = render_match_prompt(FULL)
    for kind, answer in (("always-yes", "yes"), ("always-no", "no")):
        assert MockBackend(kind).complete(p) == answer
    s = render_summary_prompt("int log_error(void);", "CalleeLocal", "log_error")
    assert MockBackend().complete(s) == MockBackend().complete(s) == "error log"


def test_token_overlap_bind9_style():
    caller = SummaryBundle("writes log error message via callback", None, None, None)
    shared = SummaryBundle(caller.caller_local, None, "prints log error text to stderr", None)
    compare = SummaryBundle(caller.caller_local, None, "compare two buffers with memcmp", None)
    m = MockBackend("token-overlap")
    assert m.complete(render_match_prompt(shared)) == "yes"
    assert m.complete(render_match_prompt(compare)) == "no"


def test_match_sections_split():
    caller, callee = match_sections(render_match_prompt(FULL))
    assert "CL" in caller and "CG" in caller and "EL" not in caller
    assert "EL" in callee and "EG" in callee and "CL" not in callee


def test_tokens_split_identifiers():
    assert tokens("ngx_http_logCreate(int x)") == {"ngx", "http", "log", "create"}


def test_make_backend_specs():
    assert make_backend("mock:always-no").kind == "always-no"
    assert make_backend("remote:http://h/v1").base_url == "http://h/v1"
    for bad in ("mock:sometimes", "remote:", "ftp:x"):
        with pytest.raises(ValueError):
            make_backend(bad)


# remote backend --------------------------------------------------------------

def _reply(text):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


def test_remote_wire_format(monkeypatch):
    monkeypatch.setenv("SEA_LLM_API_KEY", "k123")
    seen = []

    def handler(request):
        seen.append(request)
        return _reply("yes")

    rb = RemoteBackend("http://h/v1/", transport=httpx.MockTransport(handler), backoff=0)
    assert rb.complete("P", "qwen", 0.5, 64) == "yes"
    (req,) = seen
    assert str(req.url) == "http://h/v1/chat/completions"
    assert req.headers["Authorization"] == "Bearer k123"
    assert json.loads(req.content) == {"model": "qwen", "messages": [{"role": "user", "content": "P"}],
                                       "temperature": 0.5, "max_tokens": 64}


def test_remote_no_key_no_header(monkeypatch):
    monkeypatch.delenv("SEA_LLM_API_KEY", raising=False)
    seen = []
    rb = RemoteBackend("http://h", transport=httpx.MockTransport(lambda r: seen.append(r) or _reply("no")))
    rb.complete("P", "m", 0, 1)
    assert "Authorization" not in seen[0].headers


def test_remote_retries_then_succeeds():
    statuses = iter([429, 503])

    def handler(request):
        code = next(statuses, 200)
        return _reply("ok") if code == 200 else httpx.Response(code)

    rb = RemoteBackend("http://h", transport=httpx.MockTransport(handler), backoff=0)
    assert rb.complete("P", "m", 0, 1) == "ok"


def test_remote_transport_error_after_retries():
    count = []

    def handler(request):
        count.append(1)
        raise httpx.ConnectError("refused", request=request)

    rb = RemoteBackend("http://h", transport=httpx.MockTransport(handler), backoff=0)
    with pytest.raises(TransportError) as info:
        rb.complete("P", "m", 0, 1)
    assert len(count) == 3
    assert info.value.fingerprint == fingerprint("P")


@pytest.mark.parametrize("response", [
    httpx.Response(400, text="bad"),
    httpx.Response(200, text="<html>"),
    httpx.Response(200, json={"choices": []}),
    httpx.Response(200, json={"choices": [{"message": {"content": 3}}]}),
])
def test_remote_protocol_errors(response):
    rb = RemoteBackend("http://h", transport=httpx.MockTransport(lambda r: response), backoff=0)
    with pytest.raises(ProtocolError):
        rb.complete("P", "m", 0, 1)


def test_engine_propagates_transport_error():
    def handler(request):
        return httpx.Response(500)

    rb = RemoteBackend("http://h", transport=httpx.MockTransport(handler), backoff=0)
    cache = ResponseCache()
    eng = Engine(LlmConfig(backend="remote:http://h"), cache, rb)
    with pytest.raises(TransportError):
        eng.complete("P")
    assert len(cache) == 0


# configuration -----------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"temperature": 0.3},
    {"temperature": 1.5, "allow_any_temperature": True},
    {"max_tokens": 0},
    {"runs_per_query": -1},
    {"concurrency_limit": 1.5},
    {"model_name": ""},
    {"backend": "remote:"},
    {"backend": "local"},
])
def test_config_rejects(kwargs):
    with pytest.raises(ConfigError):
        LlmConfig(**kwargs).validate()


def test_config_accepts_defaults_and_override():
    for temp in (0, 0.25, 0.5, 0.75, 1):
        LlmConfig(temperature=temp).validate()
    LlmConfig(temperature=0.3, allow_any_temperature=True).validate()
    assert LlmConfig().temperature == 0.5
    assert (LlmConfig().max_tokens, LlmConfig().verdict_max_tokens) == (512, 64)


# callee global summaries ---------------------------------------------------------

@pytest.mark.parametrize("sites,calls,consolidated", [
    (["a.fn = f;", "b.cb = f;"], 3, True),
    (["a.fn = f;"], 1, False),
    ([], 0, None),
])
def test_summarize_callee_global(sites, calls, consolidated):
    backend = MockBackend()
    eng = Engine(LlmConfig(), ResponseCache(), backend)
    out = summarize_callee_global("f", sites, eng)
    assert len(backend.calls) == calls
    if consolidated is None:
        assert out is None
    else:
        assert backend.calls[-1].startswith("The summaries of each") is consolidated
        assert out
