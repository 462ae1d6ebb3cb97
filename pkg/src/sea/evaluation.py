"""Metrics against dynamically observed ground truth."""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

CATEGORIES = ("FltaExclusive", "MltaExclusive", "KelpExclusive")
_CATEGORY_OF = {"KelpLite": "KelpExclusive", "MLTA": "MltaExclusive", "FLTA": "FltaExclusive"}
SETUP_OF_RESOLVER = {"flta": "FLTA", "mlta": "MLTA", "kelp-lite": "Kelp", "cascade": "Kelp"}


class EvaluationError(ValueError):
    pass


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: Optional[float] = None


def f_measure(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def per_icall_metrics(cpr: Iterable[str], cgt: Iterable[str]) -> Metrics:
    """Precision, recall and F1 of a predicted callee set; an empty prediction scores 0."""
    cpr, cgt = set(cpr), set(cgt)
    if not cgt:
        raise EvaluationError("ground-truth target set is empty")
    inter = len(cpr & cgt)
    p = inter / len(cpr) if cpr else 0.0
    r = inter / len(cgt)
    return Metrics(p, r, f_measure(p, r))


# ---------------------------------------------------------------------------
# ground truth and name alignment

@dataclass
class GroundTruth:
    entries: dict[str, set[str]]
    project: str = ""

    @classmethod
    def from_json(cls, data: Mapping) -> "GroundTruth":
        try:
            rows = data["icalls"]
            entries = {r["id"]: set(r["targets"]) for r in rows}
        except (KeyError, TypeError) as exc:
            raise EvaluationError(f"truth file lacks icalls[].id/targets: {exc}") from exc
        return cls(entries, data.get("project", ""))

    @classmethod
    def load(cls, path: Path | str) -> "GroundTruth":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _bare(name: str) -> str:
    return name.split("@", 1)[0]


def align(predicted: Iterable[str], truth: set[str]) -> tuple[set[str], list[str]]:
    """Map predicted (possibly qualified) names onto truth spellings.

    A qualified name counts under its own spelling when the truth uses it,
    else under its bare name.
    """
    out, notes, by_bare = set(), [], {}
    for name in predicted:
        if name in truth:
            out.add(name)
            continue
        bare = _bare(name)
        out.add(bare if bare in truth else name)
        if bare in truth:
            by_bare.setdefault(bare, []).append(name)
    for bare, names in sorted(by_bare.items()):
        if len(names) > 1:
            notes.append(f"bare truth name {bare} matches {len(names)} definitions: {', '.join(sorted(names))}")
    return out, notes


def edge_is_true(callee: str, truth: set[str]) -> bool:
    return callee in truth or _bare(callee) in truth


def edge_classification_metrics(edges: Iterable[tuple[str, str, bool]],
                                truth: Mapping[str, set[str]]) -> tuple[Metrics, dict]:
    """All-edge accuracy with P/R/F over (icall, callee, kept) triples."""
    tp = fp = tn = fn = 0
    missing = set()
    for icall, callee, kept in edges:
        if icall not in truth or not truth[icall]:
            missing.add(icall)
            continue
        actual = edge_is_true(callee, truth[icall])
        if kept and actual:
            tp += 1
        elif kept:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    n = tp + fp + tn + fn
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    a = (tp + tn) / n if n else 0.0
    coverage = {"edges": n, "tp": tp, "fp": fp, "tn": tn, "fn": fn,
                "icalls_without_truth": sorted(missing)}
    return Metrics(p, r, f_measure(p, r), a), coverage


def categorize_icall(resolver: str, confirmed: bool = False) -> str:
    if confirmed:
        return "KelpExclusive"
    return _CATEGORY_OF[resolver]


# ---------------------------------------------------------------------------
# aggregation

@dataclass
class IcallRow:
    id: str
    project: str
    category: str
    predicted: list[str]
    truth: list[str]
    metrics: Metrics


def _mean(ms: Sequence[Metrics]) -> Metrics:
    return Metrics(statistics.fmean(m.precision for m in ms), statistics.fmean(m.recall for m in ms),
                   statistics.fmean(m.f1 for m in ms))


def aggregate(rows: Sequence[IcallRow], grouping: str = "per-project") -> dict[str, Metrics]:
    """Unweighted means: per project (plus an ``overall`` macro mean) or per category."""
    if not rows:
        return {}
    if grouping == "per-category":
        return {c: _mean([r.metrics for r in rows if r.category == c])
                for c in CATEGORIES if any(r.category == c for r in rows)}
    if grouping != "per-project":
        raise ValueError(f"unknown grouping {grouping!r}")
    projects = sorted({r.project for r in rows})
    out = {p: _mean([r.metrics for r in rows if r.project == p]) for p in projects}
    out["overall"] = _mean([out[p] for p in projects])
    return out


# ---------------------------------------------------------------------------
# results files

@dataclass
class Prediction:
    icall_id: str
    resolver: str
    confirmed: bool
    candidates: list[str]
    kept: list[str]


@dataclass
class MetricsDoc:
    label: str
    temperature: Optional[float]
    setup: str
    source: str
    rows: list[IcallRow]
    per_project: dict[str, Metrics]
    per_category: dict[str, Metrics]
    edges: Metrics
    coverage: dict
    diagnostics: list[str] = field(default_factory=list)
    empty: bool = False


def read_predictions(data: Mapping) -> tuple[str, dict, list[Prediction]]:
    """(source kind, metadata, predictions) from a refined.json or static.json document."""
    if isinstance(data.get("icalls"), list) and "config" in data:
        cfg = data["config"]
        meta = {"project": data.get("project", ""), "label": cfg["llm"]["model_name"],
                "temperature": cfg["llm"]["temperature"],
                "setup": SETUP_OF_RESOLVER.get(cfg.get("resolver", "cascade"), "Kelp")}
        preds = [Prediction(r["icall_id"], r["resolver"], r["confirmed"], r["static_candidates"], r["kept"])
                 for r in data["icalls"]]
        return "refined", meta, preds
    preds = []
    first = []
    for icall_id, e in sorted(data.items()):
        if not isinstance(e, dict) or "candidates" not in e:
            raise EvaluationError(f"{icall_id}: not a static.json or refined.json entry")
        preds.append(Prediction(icall_id, e["resolver"], e["confirmed"], e["candidates"], e["candidates"]))
        if not first and e.get("trail"):
            first = [t["resolver"] for t in e["trail"]]
    setup = {"KelpLite": "Kelp", "MLTA": "MLTA"}.get(first[0] if first else "FLTA", "FLTA")
    return "static", {"project": "", "label": "baseline", "temperature": None, "setup": setup}, preds


def evaluate(data: Mapping, truth: GroundTruth, project: str = "", label: str = "") -> MetricsDoc:
    source, meta, preds = read_predictions(data)
    project = project or meta["project"] or truth.project or "project"
    rows, notes, edges = [], [], []
    skipped = 0
    for pr in preds:
        gt = truth.entries.get(pr.icall_id)
        for c in pr.candidates:
            edges.append((pr.icall_id, c, c in pr.kept))
        if not gt:
            skipped += 1
            continue
        predicted, n = align(pr.kept, gt)
        notes += [f"{pr.icall_id}: {x}" for x in n]
        rows.append(IcallRow(pr.icall_id, project, categorize_icall(pr.resolver, pr.confirmed),
                             sorted(pr.kept), sorted(gt), per_icall_metrics(predicted, gt)))
    missing = sorted(set(truth.entries) - {p.icall_id for p in preds})
    edge_metrics, coverage = edge_classification_metrics(edges, truth.entries)
    coverage.update({"icalls_predicted": len(preds), "icalls_evaluated": len(rows),
                     "icalls_skipped_no_truth": skipped, "truth_icalls_not_predicted": missing})
    if missing:
        notes.append(f"{len(missing)} truth icall(s) have no prediction (parse loss or id mismatch)")
    return MetricsDoc(label or meta["label"], meta["temperature"], meta["setup"], source, rows,
                      aggregate(rows, "per-project"), aggregate(rows, "per-category"),
                      edge_metrics, coverage, notes, empty=not rows)


# ---------------------------------------------------------------------------
# report table

def load_metrics(path: Path | str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


@dataclass
class ReportRow:
    label: str
    temperature: str
    cells: dict[str, Optional[Metrics]]


GROUPS = ("FLTA", "MLTA", "Kelp", "FLTA-exclusive", "MLTA-exclusive")


def report_rows(docs: Sequence[Mapping]) -> list[ReportRow]:
    """One row per (label, temperature), one P/R/F cell group per setup.

    Runs of the same setup over several projects are macro-averaged across
    projects.  Exclusive columns come from the most cascaded setup present.
    """
    grouped: dict[tuple[str, str], dict[str, list[Mapping]]] = {}
    for d in docs:
        temp = "-" if d.get("temperature") is None else f"{d['temperature']:g}"
        grouped.setdefault((d["label"], temp), {}).setdefault(d["setup"], []).append(d)
    out = []
    for (label, temp), by_setup in grouped.items():
        cells: dict[str, Optional[Metrics]] = {g: None for g in GROUPS}
        for setup, ds in by_setup.items():
            projects = [Metrics(**pm) for d in ds for p, pm in d["per_project"].items() if p != "overall"]
            if projects:
                cells[setup] = _mean(projects)
        for setup in ("Kelp", "MLTA", "FLTA"):
            if setup not in by_setup:
                continue
            for cat, col in (("FltaExclusive", "FLTA-exclusive"), ("MltaExclusive", "MLTA-exclusive")):
                rows = [Metrics(**r["metrics"]) for d in by_setup[setup] for r in d["rows"]
                        if r["category"] == cat]
                if rows:
                    cells[col] = _mean(rows)
            break
        out.append(ReportRow(label, temp, cells))
    order = lambda r: (r.label == "baseline", r.label, r.temperature)
    return sorted(out, key=order)


def render_table(rows: Sequence[ReportRow]) -> str:
    """Aligned text table; values are percentages with one decimal."""
    head1 = ["", ""] + [g for g in GROUPS for _ in range(3)]
    head2 = ["Model", "Temp"] + ["P", "R", "F"] * len(GROUPS)
    body = []
    for r in rows:
        line = [r.label, r.temperature]
        for g in GROUPS:
            m = r.cells[g]
            line += ["-"] * 3 if m is None else [f"{100 * v:.1f}" for v in (m.precision, m.recall, m.f1)]
        body.append(line)
    widths = [max(len(x[i]) for x in [head2] + body) for i in range(len(head2))]
    for gi in range(len(GROUPS)):
        cols = range(2 + 3 * gi, 5 + 3 * gi)
        need = len(GROUPS[gi]) - (sum(widths[c] for c in cols) + 2)
        if need > 0:
            widths[cols[-1]] += need

    def fmt(cells):
        return "  ".join(c.rjust(w) if i >= 2 else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths)))

    group_line = "  ".join(["".ljust(widths[0]), "".ljust(widths[1])] + [
        GROUPS[gi].center(sum(widths[c] for c in range(2 + 3 * gi, 5 + 3 * gi)) + 4)
        for gi in range(len(GROUPS))])
    lines = [group_line.rstrip(), fmt(head2)]
    lines.append("-" * len(lines[-1]))
    lines += [fmt(b) for b in body]
    return "\n".join(lines) + "\n"
