"""Command-line entry point: ``sea <command> ...``.

Exit codes: 0 success, 1 configuration or I/O error, 2 partial result (some
edges kept only because the completion endpoint failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import serial
from .context import (
    DEFAULT_MAX_DEPTH, ContextError, callee_local_context, callee_site_contexts,
    caller_global_context, caller_local_context,
)
from .contextdb import BuildConfig, ContextDatabase, build_context_database
from .evaluation import EvaluationError, GroundTruth, evaluate, load_metrics, render_table, report_rows
from .llm.cache import ResponseCache
from .llm.engine import ConfigError, Engine
from .pipeline import RefineConfig, Refiner, load_static
from .resolvers import RESOLVER_ORDER, resolve_all

log = logging.getLogger("sea")

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2


def _write(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_preprocess(a) -> int:
    exts = tuple(e.strip() for e in a.ext.split(",") if e.strip())
    db = build_context_database(a.root, BuildConfig(exts))
    for w in db.warnings:
        log.warning(w)
    _write(db.to_json(), a.output)
    log.info("%d functions, %d address-taken, %d icalls", len(db.function_map),
             len(db.address_taken), len(db.icalls))
    return EXIT_OK


def cmd_resolve(a) -> int:
    db = ContextDatabase.load(a.db)
    _write(serial.dumps(resolve_all(db, a.resolver, a.scope)), a.output)
    return EXIT_OK


def _refine_config(a) -> RefineConfig:
    cfg = RefineConfig.load(a.config) if a.config else RefineConfig()
    if a.backend:
        cfg.llm.backend = a.backend
    if a.mode:
        cfg.ablation_mode = a.mode
    if a.temperature is not None:
        cfg.llm.temperature = a.temperature
    if a.model:
        cfg.llm.model_name = a.model
    if a.scope:
        cfg.scope_mode = a.scope
    if a.include_summaries:
        cfg.include_summaries_in_report = True
    return cfg.validate()


def cmd_refine(a) -> int:
    cfg = _refine_config(a)
    db = ContextDatabase.load(a.db)
    static = load_static(a.static) if a.static else None
    engine = Engine(cfg.llm, ResponseCache(a.cache) if a.cache else None)
    report = Refiner(db, cfg, engine).run(static)
    _write(report.to_json(), a.output)
    if report.partial:
        log.error("%d edge(s) kept without a verdict after endpoint failures", len(report.errors))
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_evaluate(a) -> int:
    data = json.loads(Path(a.results).read_text(encoding="utf-8"))
    doc = evaluate(data, GroundTruth.load(a.truth), project=a.project, label=a.label)
    _write(serial.dumps(doc), a.output)
    for note in doc.diagnostics:
        log.warning(note)
    if doc.empty:
        log.error("no valid icalls to evaluate")
        return EXIT_ERROR
    return EXIT_OK


def cmd_report(a) -> int:
    docs = [load_metrics(p) for p in a.metrics]
    rows = report_rows([d for d in docs if not d.get("empty")])
    sys.stdout.write(render_table(rows))
    if a.figure:
        from .plotting import plot_f1
        plot_f1(rows, a.figure)
        log.info("figure written to %s", a.figure)
    return EXIT_OK


def cmd_context(a) -> int:
    db = ContextDatabase.load(a.db)
    icall = db.icall(a.icall)
    if icall is None:
        raise ContextError(f"no icall {a.icall!r} in {a.db}")
    out = {"icall": icall.id, "caller_local": caller_local_context(icall, db),
           "caller_global": caller_global_context(icall, db)}
    if a.callee:
        out["callee"] = a.callee
        out["callee_local"] = callee_local_context(a.callee, db)
        out["callee_sites"] = callee_site_contexts(a.callee, db, a.max_depth)
    _write(serial.dumps(out), "-")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sea", description="Indirect-call analysis for C projects.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="parse a source tree into a context database")
    p.add_argument("root")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--ext", default="c,h", help="comma-separated source extensions")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("resolve", help="static candidate sets for every icall")
    p.add_argument("db")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--resolver", choices=sorted(RESOLVER_ORDER), default="cascade")
    p.add_argument("--scope", choices=["subtree", "project"], default="subtree")
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("refine", help="prune static candidates with caller-callee matching")
    p.add_argument("db")
    p.add_argument("static", nargs="?")
    p.add_argument("--config")
    p.add_argument("--backend", help="mock:always-yes|mock:always-no|mock:token-overlap|remote:<url>")
    p.add_argument("--cache")
    p.add_argument("--mode", choices=["Full", "WoLocal", "WoGlobal", "WoAll"])
    p.add_argument("--temperature", type=float)
    p.add_argument("--model")
    p.add_argument("--scope", choices=["subtree", "project"])
    p.add_argument("--include-summaries", action="store_true")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("evaluate", help="metrics of static.json or refined.json against truth")
    p.add_argument("results")
    p.add_argument("truth")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--project", default="")
    p.add_argument("--label", default="")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aligned table (and F1 figure) over metrics files")
    p.add_argument("metrics", nargs="+")
    p.add_argument("--figure", default="report.png", help="PNG path; empty string disables")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("context", help="dump the contexts used for one icall")
    p.add_argument("db")
    p.add_argument("--icall", required=True)
    p.add_argument("--callee")
    p.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH)
    p.set_defaults(func=cmd_context)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="sea: %(levelname)s: %(message)s")
    try:
        return a.func(a)
    except (OSError, ConfigError, EvaluationError, ContextError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
