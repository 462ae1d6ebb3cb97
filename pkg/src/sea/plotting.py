"""Figure rendering for `sea report`."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import GROUPS, ReportRow  # noqa: E402


def plot_f1(rows: Sequence[ReportRow], path: Path | str) -> Path:
    """Grouped bar chart of F1 per setup, one bar per report row."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(GROUPS)), 3.6))
    width = 0.8 / max(len(rows), 1)
    for i, row in enumerate(rows):
        xs = [g + i * width for g in range(len(GROUPS))]
        ys = [100 * row.cells[g].f1 if row.cells[g] is not None else 0.0 for g in GROUPS]
        label = row.label if row.temperature == "-" else f"{row.label} t={row.temperature}"
        ax.bar(xs, ys, width, label=label)
    ax.set_xticks([g + 0.4 - width / 2 for g in range(len(GROUPS))])
    ax.set_xticklabels(GROUPS)
    ax.set_ylabel("F1 (%)")
    ax.set_ylim(0, 100)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
