"""Prompt templates for summaries, consolidation and caller-callee matching."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

ROLES = ("CallerLocal", "CallerGlobal", "CalleeLocal", "CalleeSite")
MODES = ("Full", "WoLocal", "WoGlobal", "WoAll")

CALLER_INSTRUCTION = "Analyze the functionality of the indirect call and response with a concise summary."
CALLEE_INSTRUCTION = "Analyze the functionality of the target function and response with a concise summary."
CONSOLIDATE_INSTRUCTION = "Please consolidate those summaries."
MATCH_INSTRUCTION = ("Assess if the caller could invoke callee based on the semantic information "
                     "given above. Answer with `yes' or `no'.")

_HEADERS = {
    "CallerLocal": "The local context for the indirect-call is listed as follows:",
    "CallerGlobal": ("The declaration, struct and typedef context for the function pointer used by "
                     "the indirect-call is listed as follows:"),
    "CalleeLocal": "The target function {name} is listed as follows:",
    "CalleeSite": "The address-taken site for the target function {name} is listed as follows:",
}
CONSOLIDATE_HEADER = "The summaries of each address-taken site for the target function are:"
MATCH_HEADER = "The subsequent text provides the summary of the caller and callee:"
WOALL_HEADER = "The subsequent text provides the caller statement and the callee name:"


class PromptError(ValueError):
    """A prompt was requested with inputs that violate its contract."""


@dataclass
class SummaryBundle:
    caller_local: Optional[str] = None
    caller_global: Optional[str] = None
    callee_local: Optional[str] = None
    callee_global: Optional[str] = None


def render_summary_prompt(context_text: str, role: str, target_name: str = "") -> str:
    if role not in _HEADERS:
        raise PromptError(f"unknown summary role {role!r}")
    if not context_text or not context_text.strip():
        raise PromptError(f"{role} summary needs a nonempty context")
    header = _HEADERS[role].format(name=target_name or "").replace("  ", " ")
    instruction = CALLER_INSTRUCTION if role.startswith("Caller") else CALLEE_INSTRUCTION
    return f"{header}\n\n{context_text}\n\n{instruction}"


def render_consolidation_prompt(summaries: Sequence[str]) -> str:
    if len(summaries) < 2:
        raise PromptError("consolidation needs at least two summaries; use the single summary directly")
    body = ",\n\n".join(summaries)
    return f"{CONSOLIDATE_HEADER}\n\n{body}\n\n{CONSOLIDATE_INSTRUCTION}"


def mode_bundle(bundle: SummaryBundle, mode: str) -> SummaryBundle:
    """The bundle restricted to the fields ``mode`` uses."""
    if mode == "Full":
        return bundle
    if mode == "WoLocal":
        return SummaryBundle(None, bundle.caller_global, None, bundle.callee_global)
    if mode == "WoGlobal":
        return SummaryBundle(bundle.caller_local, None, bundle.callee_local, None)
    if mode == "WoAll":
        return SummaryBundle()
    raise PromptError(f"unknown ablation mode {mode!r}")


def render_match_prompt(bundle: SummaryBundle, mode: str = "Full", caller_stmt: str = "",
                        callee_name: str = "") -> str:
    if mode not in MODES:
        raise PromptError(f"unknown ablation mode {mode!r}")
    if mode == "WoAll":
        if not caller_stmt or not callee_name:
            raise PromptError("WoAll needs the caller statement and the callee name")
        return (f"{WOALL_HEADER}\n\n# 1.caller statement\n\n{caller_stmt}\n\n"
                f"# 2.callee name\n\n{callee_name}\n\n{MATCH_INSTRUCTION}")
    b = mode_bundle(bundle, mode)
    caller = [(f"1.1.CallerLocalSummary", b.caller_local), ("1.2.CallerGlobalSummary", b.caller_global)]
    callee = [("2.1.CalleeLocalSummary", b.callee_local), ("2.2.CalleeGlobalSummary", b.callee_global)]
    if not any(t for _, t in caller + callee):
        raise PromptError(f"{mode} match prompt with every summary absent")
    parts = [MATCH_HEADER, "# 1.summary of caller"]
    parts += [f"## {label}\n\n{text}" for label, text in caller if text]
    parts.append("# 2.summary of callee")
    parts += [f"## {label}\n\n{text}" for label, text in callee if text]
    parts.append(MATCH_INSTRUCTION)
    return "\n\n".join(parts)


def is_match_prompt(prompt: str) -> bool:
    return prompt.rstrip().endswith(MATCH_INSTRUCTION)


def is_consolidation_prompt(prompt: str) -> bool:
    return prompt.startswith(CONSOLIDATE_HEADER)
