"""Indirect-call analysis for C: type-based static resolution refined by
LLM summaries of caller and callee contexts."""

from .cfrontend import IcallSite, ParseDiagnostics, SourceSpan, SyntaxNode, find_icalls, parse_file
from .contextdb import ContextDatabase, build_context_database, build_from_sources, identify_address_taken
from .evaluation import per_icall_metrics
from .pipeline import RefineConfig, analyze_project, refine_icall
from .resolvers import flta_candidates, mlta_candidates, resolve_simple_icall, resolve_static, scope_filter
from .typeexpr import TypeExpr, types_match

__version__ = "0.1.0"
