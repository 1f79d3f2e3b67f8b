"""Evaluator tests.

metrics() is checked for exact agreement with a from-first-principles
recount over a thousand random prediction sets; published difference-column
values are reproduced from their published inputs.
"""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disclosure_qa.dataset import NUM_QUESTIONS
from disclosure_qa.evaluator import (
    Confusion,
    EvalReport,
    KeyMismatch,
    LengthMismatch,
    Metrics,
    Prediction,
    confusion,
    f1_diff_pp,
    metrics,
    predictions_from_pairs,
    render_text_report,
    report,
    report_json,
    val_test_diff,
)
from disclosure_qa.pdf_extract import Sector

import random


def pred(qid=1, sector=Sector.ENERGY, label=False, decision=False):
    return Prediction(qid=qid, sector=sector, label=label, decision=decision)


class TestConfusion:
    def test_identity(self):
        c = confusion([True], [True])
        assert (c.tp, c.fp, c.fn, c.tn) == (1, 0, 0, 0)

    def test_cross(self):
        c = confusion([True, False], [False, True])
        assert (c.tp, c.fp, c.fn, c.tn) == (0, 1, 1, 0)

    def test_empty(self):
        c = confusion([], [])
        assert c == Confusion() and c.total == 0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([True], [True, False])

    def test_sum_preserves_total(self):
        a = Confusion(1, 2, 3, 4)
        b = Confusion(5, 6, 7, 8)
        assert (a + b).total == a.total + b.total


class TestMetrics:
    def test_perfect(self):
        m = metrics(Confusion(tp=1))
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)

    def test_zero_convention(self):
        m = metrics(Confusion(tn=5))
        assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)

    def test_mixed_hand_computed(self):
        m = metrics(Confusion(tp=3, fp=1, fn=2))
        assert m.precision == 0.75
        assert m.recall == 0.6
        assert m.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)

    def test_supports(self):
        m = metrics(Confusion(tp=3, fp=1, fn=2, tn=10))
        assert m.support_pos == 5 and m.support_neg == 11

    def test_oracle_equivalence_1000_random_sets(self):
        rng = random.Random(123)
        for _ in range(1000):
            n = rng.randint(0, 50)
            decisions = [rng.random() < 0.5 for _ in range(n)]
            labels = [rng.random() < 0.3 for _ in range(n)]
            m = metrics(confusion(decisions, labels))
            # first-principles recount
            tp = sum(1 for d, y in zip(decisions, labels) if d and y)
            fp = sum(1 for d, y in zip(decisions, labels) if d and not y)
            fn = sum(1 for d, y in zip(decisions, labels) if not d and y)
            p = tp / (tp + fp) if tp + fp else 0.0
            r = tp / (tp + fn) if tp + fn else 0.0
            f = 2 * p * r / (p + r) if p + r else 0.0
            assert (m.precision, m.recall, m.f1) == (p, r, f)

    @given(st.integers(0, 40), st.integers(0, 40), st.integers(0, 40), st.integers(0, 40))
    @settings(max_examples=300)
    def test_f1_between_precision_and_recall(self, tp, fp, fn, tn):
        m = metrics(Confusion(tp, fp, fn, tn))
        if m.precision + m.recall > 0:
            assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12


class TestReport:
    def test_perfect_overall(self):
        preds = [pred(label=True, decision=True) for _ in range(400)]
        preds += [pred(label=False, decision=False) for _ in range(1200)]
        r = report(preds, "test")
        assert r.overall.f1 == 1.0
        assert r.overall.support_pos == 400 and r.overall.support_neg == 1200

    def test_question_slice_without_positives_is_na(self):
        preds = [pred(qid=1, label=True, decision=True),
                 pred(qid=4, label=False, decision=False)]
        r = report(preds, "test")
        assert r.by_question[1] is not None
        assert r.by_question[4] is None        # has rows but no positive labels
        assert r.by_question[6] is None        # no rows at all
        assert len(r.by_question) == NUM_QUESTIONS

    def test_na_excluded_from_question_average(self):
        preds = [pred(qid=1, label=True, decision=True)]       # F1 1.0
        preds += [pred(qid=2, label=True, decision=False)]     # F1 0.0
        r = report(preds, "test")
        assert r.question_f1_mean == pytest.approx(0.5)

    def test_sector_average_unweighted(self):
        preds = []
        # Energy: perfect on 4 pairs -> F1 1.0
        for _ in range(4):
            preds.append(pred(sector=Sector.ENERGY, label=True, decision=True))
        # Banks: half recall -> P=1, R=0.5, F1=2/3... use exact 0.5 F1 instead:
        # one tp, one fp, one fn -> P=0.5, R=0.5, F1=0.5
        preds.append(pred(sector=Sector.BANKS, label=True, decision=True))
        preds.append(pred(sector=Sector.BANKS, label=False, decision=True))
        preds.append(pred(sector=Sector.BANKS, label=True, decision=False))
        r = report(preds, "val")
        assert r.by_sector["Energy"].f1 == 1.0
        assert r.by_sector["Banks"].f1 == pytest.approx(0.5)
        assert r.sector_f1_mean == pytest.approx(0.75)

    def test_only_present_sectors_reported(self):
        preds = [pred(sector=Sector.ENERGY, label=True, decision=True)]
        r = report(preds, "x")
        assert list(r.by_sector) == ["Energy"]

    def test_slice_confusions_sum_to_overall(self):
        rng = random.Random(5)
        sectors = list(Sector)
        preds = [
            pred(qid=rng.randint(1, 14), sector=rng.choice(sectors),
                 label=rng.random() < 0.3, decision=rng.random() < 0.5)
            for _ in range(300)
        ]
        overall = confusion([p.decision for p in preds], [p.label for p in preds])
        by_sector = Confusion()
        for s in sectors:
            rows = [p for p in preds if p.sector == s]
            by_sector = by_sector + confusion([p.decision for p in rows], [p.label for p in rows])
        by_question = Confusion()
        for q in range(1, 15):
            rows = [p for p in preds if p.qid == q]
            by_question = by_question + confusion([p.decision for p in rows], [p.label for p in rows])
        assert by_sector == overall == by_question


def report_with(overall_f1=0.9, sector_f1=None, question_f1=None, tag="val"):
    m = lambda f1: Metrics(precision=f1, recall=f1, f1=f1, support_pos=10, support_neg=100)
    sector_f1 = sector_f1 or {}
    question_f1 = question_f1 or {}
    by_question = {q: (m(question_f1[q]) if question_f1.get(q) is not None else None)
                   for q in range(1, 15)}
    sec = {k: m(v) for k, v in sector_f1.items()}
    f1s = [x.f1 for x in by_question.values() if x is not None]
    return EvalReport(
        split_tag=tag, overall=m(overall_f1), by_sector=sec, by_question=by_question,
        sector_f1_mean=(sum(v.f1 for v in sec.values()) / len(sec)) if sec else None,
        question_f1_mean=(sum(f1s) / len(f1s)) if f1s else None,
    )


class TestValTestDiff:
    def test_published_large_row(self):
        # from the published comparison: validation 92.2, test 85.5 -> -6.7
        assert round(f1_diff_pp(0.922, 0.855), 1) == -6.7

    def test_published_base_row(self):
        assert round(f1_diff_pp(0.917, 0.820), 1) == -9.7

    def test_identity(self):
        assert f1_diff_pp(0.5, 0.5) == 0.0

    def test_na_propagates(self):
        val = report_with(question_f1={1: 0.9, 4: 0.75})
        test = report_with(question_f1={1: 0.8, 4: None}, tag="test")
        diff = val_test_diff(val, test)
        assert diff.by_question[4] is None
        assert diff.by_question[1] == pytest.approx(-10.0)

    def test_key_mismatch(self):
        val = report_with(sector_f1={"Energy": 0.9})
        test = report_with(sector_f1={"Banks": 0.8}, tag="test")
        with pytest.raises(KeyMismatch):
            val_test_diff(val, test)

    def test_signed_and_absolute_means_differ(self):
        val = report_with(sector_f1={"Energy": 0.90, "Banks": 0.80})
        test = report_with(sector_f1={"Energy": 0.80, "Banks": 0.90}, tag="test")
        diff = val_test_diff(val, test)
        assert diff.sector_mean_signed == pytest.approx(0.0)
        assert diff.sector_mean_abs == pytest.approx(10.0)

    def test_published_sector_mean_abs(self):
        # Published per-sector val/test F1 pairs; their mean absolute
        # difference of 13.3pp matches the prose claim, while the signed
        # mean does not, which is why both are reported.
        val_f1 = {"Agriculture, Food & Forests": 0.894, "Energy": 0.942, "Banks": 0.919,
                  "Transportation": 0.869, "Insurance": 0.929, "Materials & Buildings": 0.918}
        test_f1 = {"Agriculture, Food & Forests": 0.721, "Energy": 0.898, "Banks": 0.866,
                   "Transportation": 0.725, "Insurance": 0.787, "Materials & Buildings": 0.676}
        diff = val_test_diff(report_with(sector_f1=val_f1),
                             report_with(sector_f1=test_f1, tag="test"))
        assert round(diff.sector_mean_abs, 1) == 13.3
        assert round(diff.sector_mean_signed, 1) == -13.3


class TestRendering:
    def test_json_shape(self):
        val = report_with(sector_f1={"Energy": 0.9}, question_f1={1: 0.9})
        test = report_with(sector_f1={"Energy": 0.8}, question_f1={1: 0.8}, tag="test")
        diff = val_test_diff(val, test)
        doc = json.loads(report_json([val, test], diff))
        assert set(doc) == {"overall", "by_sector", "by_question", "averages", "diffs"}
        assert doc["by_question"]["4"]["val"] is None  # N/A -> null
        assert doc["diffs"]["by_sector"]["Energy"] == pytest.approx(-10.0)

    def test_json_without_diff(self):
        doc = json.loads(report_json([report_with()]))
        assert doc["diffs"] is None

    def test_text_table_one_decimal(self):
        val = report_with(sector_f1={"Energy": 0.942}, question_f1={1: 0.9778})
        test = report_with(sector_f1={"Energy": 0.898}, question_f1={1: 0.8485}, tag="test")
        text = render_text_report([val, test], val_test_diff(val, test))
        assert "94.2%" in text and "89.8%" in text and "-4.4" in text
        assert "97.8%" in text and "84.9%" in text
        assert "N/A" in text  # questions 2..14 have no positives here
        assert "Average across sectors" in text

    def test_figures_written(self, tmp_path):
        from disclosure_qa.figures import render_report_figures

        val = report_with(sector_f1={"Energy": 0.9, "Banks": 0.8}, question_f1={1: 0.9})
        paths = render_report_figures([val], tmp_path)
        assert sorted(p.name for p in paths) == ["f1_by_question.png", "f1_by_sector.png"]
        for p in paths:
            assert p.stat().st_size > 1000


class TestPredictionsFromPairs:
    def test_threshold_applied(self):
        from disclosure_qa.dataset import QAPair

        pairs = [
            QAPair(qid=1, doc_id="d", sent_id=0, sentence_text="t", label="positive",
                   company="c", sector=Sector.ENERGY),
            QAPair(qid=2, doc_id="d", sent_id=1, sentence_text="t", label="negative",
                   company="c", sector=Sector.ENERGY),
        ]
        preds = predictions_from_pairs(pairs, [0.8, 0.3], threshold=0.5)
        assert preds[0].decision and preds[0].label
        assert not preds[1].decision and not preds[1].label

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            predictions_from_pairs([], [0.5], threshold=0.5)
