"""Figure rendering for evaluation reports.

Writes per-sector and per-question F1 bar charts as PNG files next to the
JSON/text report output. Uses the Agg backend so the CLI and service can
render headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dataset import NUM_QUESTIONS
from .evaluator import EvalReport, SECTOR_ORDER

_SPLIT_COLORS = {"train": "#6a9f58", "val": "#4c78a8", "dev": "#4c78a8", "test": "#e45756"}


def _color(tag: str, fallback_idx: int) -> str:
    return _SPLIT_COLORS.get(tag, f"C{fallback_idx}")


def render_report_figures(reports: list[EvalReport], out_dir: str | Path) -> list[Path]:
    """Render sector and question F1 charts; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    written.append(_sector_figure(reports, out_dir / "f1_by_sector.png"))
    written.append(_question_figure(reports, out_dir / "f1_by_question.png"))
    return written


def _sector_figure(reports: list[EvalReport], path: Path) -> Path:
    names = sorted({n for r in reports for n in r.by_sector},
                   key=lambda n: SECTOR_ORDER.index(n))
    fig, ax = plt.subplots(figsize=(max(6.0, 1.3 * len(names) + 2), 4.0))
    x = np.arange(len(names))
    width = 0.8 / max(1, len(reports))
    for i, r in enumerate(reports):
        values = [100 * r.by_sector[n].f1 if n in r.by_sector else 0.0 for n in names]
        ax.bar(x + i * width, values, width, label=r.split_tag, color=_color(r.split_tag, i))
    ax.set_xticks(x + width * (len(reports) - 1) / 2)
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("F1 (%)")
    ax.set_ylim(0, 105)
    ax.set_title("F1 by sector")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _question_figure(reports: list[EvalReport], path: Path) -> Path:
    qids = list(range(1, NUM_QUESTIONS + 1))
    fig, ax = plt.subplots(figsize=(10.0, 4.0))
    x = np.arange(len(qids))
    width = 0.8 / max(1, len(reports))
    for i, r in enumerate(reports):
        values = []
        for qid in qids:
            m = r.by_question.get(qid)
            values.append(100 * m.f1 if m is not None else np.nan)
        offsets = x + i * width
        ax.bar(offsets, np.nan_to_num(values), width, label=r.split_tag,
               color=_color(r.split_tag, i))
        for xo, v in zip(offsets, values):
            if np.isnan(v):
                ax.text(xo, 2, "N/A", rotation=90, ha="center", va="bottom", fontsize=7)
    ax.set_xticks(x + width * (len(reports) - 1) / 2)
    ax.set_xticklabels([f"Q{q}" for q in qids], fontsize=8)
    ax.set_ylabel("F1 (%)")
    ax.set_ylim(0, 105)
    ax.set_title("F1 by question (N/A = no positive labels in slice)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
