"""Positive-class precision/recall/F1 with the reporting slices used for
disclosure QA: overall, per sector, per question, and validation-vs-test
deltas.

Question slices with zero positive labels are reported as N/A and excluded
from averages; degenerate predictions elsewhere fall back to 0 by the
usual zero-division convention. Slice averages are unweighted means of the
slice F1 scores. Validation-test differences are additionally summarized
as both a signed mean and a mean of absolute values, since the two can
diverge substantially and both readings are informative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .dataset import NUM_QUESTIONS, POSITIVE, QAPair
from .pdf_extract import Sector

SECTOR_ORDER = [s.value for s in Sector]


class LengthMismatch(Exception):
    pass


class KeyMismatch(Exception):
    pass


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp,
                         self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    support_pos: int
    support_neg: int


@dataclass(frozen=True)
class Prediction:
    """One scored pair reduced to what evaluation needs."""

    qid: int
    sector: Sector
    label: bool
    decision: bool
    score: float | None = None


@dataclass(frozen=True)
class EvalReport:
    split_tag: str
    overall: Metrics
    by_sector: dict[str, Metrics]
    by_question: dict[int, Metrics | None]  # None marks an N/A slice
    sector_f1_mean: float | None
    question_f1_mean: float | None


@dataclass(frozen=True)
class DiffReport:
    """Per-slice test-minus-validation F1 differences in percentage points."""

    overall: float
    by_sector: dict[str, float]
    by_question: dict[int, float | None]
    sector_mean_signed: float | None
    sector_mean_abs: float | None
    question_mean_signed: float | None
    question_mean_abs: float | None


def confusion(decisions: list[bool], labels: list[bool]) -> Confusion:
    if len(decisions) != len(labels):
        raise LengthMismatch(f"{len(decisions)} decisions vs {len(labels)} labels")
    tp = fp = fn = tn = 0
    for d, y in zip(decisions, labels):
        if d and y:
            tp += 1
        elif d and not y:
            fp += 1
        elif not d and y:
            fn += 1
        else:
            tn += 1
    return Confusion(tp, fp, fn, tn)


def metrics(c: Confusion) -> Metrics:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(precision=precision, recall=recall, f1=f1,
                   support_pos=c.tp + c.fn, support_neg=c.fp + c.tn)


def predictions_from_pairs(pairs: list[QAPair], scores, threshold: float) -> list[Prediction]:
    if len(pairs) != len(scores):
        raise LengthMismatch(f"{len(pairs)} pairs vs {len(scores)} scores")
    return [
        Prediction(qid=p.qid, sector=p.sector, label=p.label == POSITIVE,
                   decision=float(s) >= threshold, score=float(s))
        for p, s in zip(pairs, scores)
    ]


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def report(predictions: list[Prediction], split_tag: str) -> EvalReport:
    """Slice the predictions and compute metrics per slice.

    Sector slices cover the sectors present in the data; question slices
    always cover all 14 ids, with zero-positive slices marked N/A.
    """
    overall = confusion([p.decision for p in predictions], [p.label for p in predictions])

    by_sector: dict[str, Metrics] = {}
    for sector_name in SECTOR_ORDER:
        rows = [p for p in predictions if p.sector.value == sector_name]
        if rows:
            by_sector[sector_name] = metrics(
                confusion([p.decision for p in rows], [p.label for p in rows])
            )

    by_question: dict[int, Metrics | None] = {}
    for qid in range(1, NUM_QUESTIONS + 1):
        rows = [p for p in predictions if p.qid == qid]
        if not any(p.label for p in rows):
            by_question[qid] = None
            continue
        by_question[qid] = metrics(
            confusion([p.decision for p in rows], [p.label for p in rows])
        )

    return EvalReport(
        split_tag=split_tag,
        overall=metrics(overall),
        by_sector=by_sector,
        by_question=by_question,
        sector_f1_mean=_mean([m.f1 for m in by_sector.values()]),
        question_f1_mean=_mean([m.f1 for m in by_question.values() if m is not None]),
    )


def f1_diff_pp(val_f1: float, test_f1: float) -> float:
    """Signed test-minus-validation difference in percentage points."""
    return (test_f1 - val_f1) * 100.0


def val_test_diff(val: EvalReport, test: EvalReport) -> DiffReport:
    """Per-slice F1 differences; N/A on either side propagates to N/A."""
    if set(val.by_sector) != set(test.by_sector):
        raise KeyMismatch(
            f"sector slices differ: {sorted(val.by_sector)} vs {sorted(test.by_sector)}"
        )
    if set(val.by_question) != set(test.by_question):
        raise KeyMismatch("question slices differ")

    by_sector = {
        name: f1_diff_pp(val.by_sector[name].f1, test.by_sector[name].f1)
        for name in val.by_sector
    }
    by_question: dict[int, float | None] = {}
    for qid in val.by_question:
        v, t = val.by_question[qid], test.by_question[qid]
        by_question[qid] = None if v is None or t is None else f1_diff_pp(v.f1, t.f1)

    sector_diffs = list(by_sector.values())
    question_diffs = [d for d in by_question.values() if d is not None]
    return DiffReport(
        overall=f1_diff_pp(val.overall.f1, test.overall.f1),
        by_sector=by_sector,
        by_question=by_question,
        sector_mean_signed=_mean(sector_diffs),
        sector_mean_abs=_mean([abs(d) for d in sector_diffs]),
        question_mean_signed=_mean(question_diffs),
        question_mean_abs=_mean([abs(d) for d in question_diffs]),
    )


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

def _metrics_json(m: Metrics | None):
    if m is None:
        return None
    return {
        "precision": m.precision, "recall": m.recall, "f1": m.f1,
        "support_pos": m.support_pos, "support_neg": m.support_neg,
    }


def report_json(
    reports: list[EvalReport],
    diff: DiffReport | None = None,
) -> str:
    """Single JSON document: {overall, by_sector, by_question, diffs}."""
    doc = {
        "overall": {r.split_tag: _metrics_json(r.overall) for r in reports},
        "by_sector": {
            name: {r.split_tag: _metrics_json(r.by_sector.get(name)) for r in reports}
            for name in sorted({n for r in reports for n in r.by_sector})
        },
        "by_question": {
            str(qid): {r.split_tag: _metrics_json(r.by_question[qid]) for r in reports}
            for qid in range(1, NUM_QUESTIONS + 1)
        },
        "averages": {
            r.split_tag: {
                "sector_f1_mean": r.sector_f1_mean,
                "question_f1_mean": r.question_f1_mean,
            }
            for r in reports
        },
        "diffs": None,
    }
    if diff is not None:
        doc["diffs"] = {
            "overall": diff.overall,
            "by_sector": diff.by_sector,
            "by_question": {str(q): d for q, d in diff.by_question.items()},
            "sector_mean_signed": diff.sector_mean_signed,
            "sector_mean_abs": diff.sector_mean_abs,
            "question_mean_signed": diff.question_mean_signed,
            "question_mean_abs": diff.question_mean_abs,
        }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _pct(x: float | None) -> str:
    return "N/A" if x is None else f"{100 * x:.1f}%"


def _pp(x: float | None) -> str:
    return "N/A" if x is None else f"{x:+.1f}"


def render_text_report(reports: list[EvalReport], diff: DiffReport | None = None) -> str:
    """Aligned text tables: results by sector, then by question."""
    tags = [r.split_tag for r in reports]
    lines: list[str] = []

    header = ["Sector"] + [f"{t} F1" for t in tags] + (["Diff (pp)"] if diff else [])
    rows = []
    sector_names = sorted({n for r in reports for n in r.by_sector},
                          key=lambda n: SECTOR_ORDER.index(n))
    for name in sector_names:
        row = [name] + [_pct(r.by_sector[name].f1 if name in r.by_sector else None) for r in reports]
        if diff:
            row.append(_pp(diff.by_sector.get(name)))
        rows.append(row)
    avg_row = ["Average across sectors"] + [_pct(r.sector_f1_mean) for r in reports]
    if diff:
        avg_row.append(_pp(diff.sector_mean_signed))
    rows.append(avg_row)
    lines.extend(_table(header, rows))

    lines.append("")
    header = ["Question"] + [f"{t} F1" for t in tags] + (["Diff (pp)"] if diff else [])
    rows = []
    for qid in range(1, NUM_QUESTIONS + 1):
        row = [f"Q{qid}"] + [
            _pct(r.by_question[qid].f1 if r.by_question[qid] is not None else None)
            for r in reports
        ]
        if diff:
            row.append(_pp(diff.by_question.get(qid)))
        rows.append(row)
    avg_row = ["Average"] + [_pct(r.question_f1_mean) for r in reports]
    if diff:
        avg_row.append(_pp(diff.question_mean_signed))
    rows.append(avg_row)
    lines.extend(_table(header, rows))

    if diff:
        lines.append("")
        lines.append(f"Sector diff, signed mean:   {_pp(diff.sector_mean_signed)} pp")
        lines.append(f"Sector diff, mean absolute: {_pp(diff.sector_mean_abs)} pp")
    lines.append("")
    for r in reports:
        m = r.overall
        lines.append(
            f"[{r.split_tag}] overall: P={_pct(m.precision)} R={_pct(m.recall)} "
            f"F1={_pct(m.f1)} (pos={m.support_pos}, neg={m.support_neg})"
        )
    return "\n".join(lines) + "\n"


def _table(header: list[str], rows: list[list[str]]) -> list[str]:
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    sep = "-" * (sum(widths) + 2 * (len(widths) - 1))
    return [fmt(header), sep] + [fmt(r) for r in rows]
