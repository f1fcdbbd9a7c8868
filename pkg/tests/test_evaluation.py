import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from deepck.depth import DepthScore
from deepck.evaluation import (
    DepthBandReport,
    evaluate,
    performance_by_depth,
    report_from_counts,
    sweep_k,
)
from deepck.triples import LabeledTriple


class TestReportFromCounts:
    def test_hand_example(self):
        report = report_from_counts(tp=3, fp=1, tn=0, fn=2)
        assert report.precision == 0.75
        assert report.recall == 0.6
        assert report.f1 == pytest.approx(2 / 3, abs=1e-12)
        assert report.accuracy == 0.5
        assert report.support == 6

    def test_no_predicted_positives_flags_precision(self):
        report = report_from_counts(tp=0, fp=0, tn=4, fn=2)
        assert report.precision == 0.0 and report.undefined_precision
        assert not report.undefined_recall

    def test_no_gold_positives_flags_recall(self):
        report = report_from_counts(tp=0, fp=3, tn=7, fn=0)
        assert report.recall == 0.0 and report.undefined_recall
        assert not report.undefined_precision

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            report_from_counts(0, 0, 0, 0)

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            report_from_counts(-1, 0, 1, 0)

    @given(st.integers(0, 500), st.integers(0, 500),
           st.integers(0, 500), st.integers(0, 500))
    def test_f1_is_the_harmonic_mean(self, tp, fp, tn, fn):
        if tp + fp + tn + fn == 0:
            return
        report = report_from_counts(tp, fp, tn, fn)
        p, r = report.precision, report.recall
        expect = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        assert abs(report.f1 - expect) <= 1e-12
        assert 0.0 <= report.f1 <= 1.0

    @given(st.integers(1, 500), st.integers(0, 500), st.integers(0, 500))
    def test_f1_equals_dice_form(self, tp, fp, fn):
        # 2TP / (2TP + FP + FN) is an algebraic identity for the harmonic mean
        report = report_from_counts(tp, fp, 0, fn)
        assert report.f1 == pytest.approx(2 * tp / (2 * tp + fp + fn), abs=1e-12)


class TestEvaluate:
    def test_counts(self):
        report = evaluate([1, 1, 1, 1, 0, 0], [1, 1, 1, 0, 1, 1])
        assert (report.tp, report.fp, report.tn, report.fn) == (3, 1, 0, 2)

    def test_misaligned_lengths(self):
        with pytest.raises(ValueError):
            evaluate([1, 0], [1])

    def test_empty(self):
        with pytest.raises(ValueError):
            evaluate([], [])

    def test_non_binary_label(self):
        with pytest.raises(ValueError):
            evaluate([2], [1])


def score_at(rank, i):
    triple = LabeledTriple("h%d" % i, "RelatedTo", "t%d" % i)
    return DepthScore(triple, rank, 10.0, "toy")


class TestPerformanceByDepth:
    def test_single_band_equals_global(self):
        preds, gold = [1, 0, 1], [1, 1, 0]
        scores = [score_at(r, i) for i, r in enumerate([10.0, 20.0, 30.0])]
        bands = performance_by_depth(preds, gold, scores, range_edges=[])
        assert len(bands) == 1
        assert bands[0].report == evaluate(preds, gold)
        assert bands[0].count == 3

    def test_two_bands_split_on_the_edge(self):
        preds = [1, 1, 0, 1]
        gold = [1, 0, 0, 1]
        scores = [score_at(r, i) for i, r in enumerate([100.0, 500.0, 1000.0, 3000.0])]
        bands = performance_by_depth(preds, gold, scores, range_edges=[1000.0])
        assert bands[0].count == 2 and bands[1].count == 2
        # shallow band: preds [1,1] vs gold [1,0]
        assert bands[0].report.precision == 0.5
        # deep band starts at the edge value itself
        assert bands[1].report == evaluate([0, 1], [0, 1])

    def test_empty_band_has_no_report(self):
        bands = performance_by_depth([1], [1], [score_at(50.0, 0)],
                                     range_edges=[1000.0])
        assert bands[1].count == 0 and bands[1].report is None
        assert bands[1].low == 1000.0 and bands[1].high == math.inf

    def test_misaligned_inputs(self):
        with pytest.raises(ValueError):
            performance_by_depth([1], [1, 0], [score_at(1.0, 0)], [])


class TestSweepK:
    def test_shares_rows_across_strategies(self):
        calls = []

        def run_for_k(k):
            calls.append(k)
            pair = (0.2, 0.8) if k == 1 else (0.8, 0.2)
            return [((pair,) * k, 1), ((pair,) * k, 0)]

        result = sweep_k([1, 3], ["avg", "vote"], run_for_k)
        assert calls == [1, 3]
        assert set(result.by_k) == {1, 3}
        assert set(result.by_k[1]) == {"avg", "vote"}
        assert result.by_k[1]["avg"].tp == 1

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            sweep_k([0], ["avg"], lambda k: [(((0.5, 0.5),), 1)])

    def test_empty_rows_rejected(self):
        with pytest.raises(ValueError):
            sweep_k([1], ["avg"], lambda k: [])
