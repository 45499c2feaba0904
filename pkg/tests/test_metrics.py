import json

import numpy as np
import pytest

from fpbilstm.ingest import RawFrame
from fpbilstm.metrics import (
    ConfusionMatrix,
    confusion,
    per_frame_report,
    per_sample_report,
    report_from_confusion,
)

# Published 8-class reference confusion matrix (rows truth, columns predicted)
# with its reported per-class percentages; expected values verified by direct
# arithmetic on the counts.
REFERENCE_COUNTS = np.array(
    [
        [923, 6, 0, 1, 5, 15, 9, 2],
        [9, 719, 2, 0, 0, 0, 1, 0],
        [0, 1, 336, 0, 0, 0, 0, 0],
        [3, 0, 0, 508, 0, 0, 0, 0],
        [10, 0, 0, 0, 1249, 12, 3, 2],
        [40, 4, 0, 0, 18, 826, 4, 9],
        [41, 2, 0, 0, 13, 4, 541, 46],
        [7, 0, 0, 0, 0, 0, 19, 308],
    ],
    dtype=np.int64,
)
REFERENCE_RECALL = [96.0, 98.4, 99.7, 99.4, 97.9, 91.7, 83.6, 92.2]
REFERENCE_PRECISION = [89.4, 98.2, 99.4, 99.8, 97.2, 96.4, 93.8, 83.9]
REFERENCE_F1 = [92.6, 98.3, 99.6, 99.6, 97.5, 94.0, 88.4, 87.9]


def frame_with_labels(labels, rng):
    labels = np.asarray(labels)
    return RawFrame(
        samples={s: rng.standard_normal((labels.size, 3)) for s in ("acc", "gyr", "mag")},
        sample_rate_hz=100.0,
        labels=labels,
    )


class TestConfusion:
    def test_perfect_predictions_diagonal(self):
        truth = [1, 2, 3, 4, 5, 6, 7, 8, 3, 3]
        cm = confusion(truth, truth)
        assert np.array_equal(cm.counts, np.diag(np.bincount(truth, minlength=9)[1:]))

    def test_hand_counted_pairs(self):
        cm = confusion([1, 1, 2], [1, 2, 2])
        expected = np.zeros((8, 8), dtype=np.int64)
        expected[0, 0] = 1
        expected[0, 1] = 1
        expected[1, 1] = 1
        assert np.array_equal(cm.counts, expected)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            confusion([1, 2], [1])

    def test_reference_row_sums_are_class_supports(self):
        cm = ConfusionMatrix(REFERENCE_COUNTS)
        assert cm.row_sums()[2] == 337  # Run support
        assert cm.total == REFERENCE_COUNTS.sum()

    def test_negative_counts_rejected(self):
        bad = np.zeros((8, 8), dtype=np.int64)
        bad[0, 0] = -1
        with pytest.raises(ValueError):
            ConfusionMatrix(bad)


class TestReferenceReproduction:
    def test_per_class_scores_within_rounding(self):
        report = report_from_confusion(ConfusionMatrix(REFERENCE_COUNTS))
        for k in range(8):
            assert abs(report.recall[k] - REFERENCE_RECALL[k]) <= 0.1, f"recall class {k + 1}"
            assert abs(report.precision[k] - REFERENCE_PRECISION[k]) <= 0.1, f"precision class {k + 1}"
            assert abs(report.f1[k] - REFERENCE_F1[k]) <= 0.1, f"f1 class {k + 1}"

    def test_implied_macro_f1(self):
        report = report_from_confusion(ConfusionMatrix(REFERENCE_COUNTS))
        implied = np.mean(REFERENCE_F1)
        assert abs(report.macro_f1 - implied) <= 0.1

    def test_walk_row_f1_from_rounded_inputs(self):
        report = report_from_confusion(ConfusionMatrix(REFERENCE_COUNTS))
        assert report.f1[1] == pytest.approx(98.3, abs=0.05)


class TestMacroF1:
    def test_diagonal_is_100(self):
        cm = ConfusionMatrix(np.diag([5, 4, 3, 2, 1, 6, 7, 8]))
        report = report_from_confusion(cm)
        assert report.macro_f1 == pytest.approx(100.0)
        assert report.accuracy == pytest.approx(100.0)

    def test_two_class_hand_arithmetic(self):
        counts = np.zeros((8, 8), dtype=np.int64)
        counts[0, 0], counts[0, 1] = 8, 2
        counts[1, 0], counts[1, 1] = 3, 7
        report = report_from_confusion(ConfusionMatrix(counts))
        assert report.precision[0] == pytest.approx(100 * 8 / 11, abs=0.05)
        assert report.precision[1] == pytest.approx(100 * 7 / 9, abs=0.05)
        assert report.recall[0] == pytest.approx(80.0)
        assert report.recall[1] == pytest.approx(70.0)
        assert report.macro_f1 == pytest.approx(74.9, abs=0.05)

    def test_class_relabeling_invariance(self, rng):
        counts = rng.integers(0, 30, size=(8, 8))
        base = report_from_confusion(ConfusionMatrix(counts)).macro_f1
        perm = rng.permutation(8)
        permuted = counts[np.ix_(perm, perm)]
        assert report_from_confusion(ConfusionMatrix(permuted)).macro_f1 == pytest.approx(base)

    def test_zero_support_excluded_from_macro(self):
        counts = np.zeros((8, 8), dtype=np.int64)
        counts[0, 0] = 10  # only class 1 present, perfectly predicted
        report = report_from_confusion(ConfusionMatrix(counts))
        assert report.macro_f1 == pytest.approx(100.0)
        assert report.recall[1] == 0.0

    def test_zero_prediction_class_scores_zero_but_counts(self):
        counts = np.zeros((8, 8), dtype=np.int64)
        counts[0, 0] = 10
        counts[1, 0] = 5  # class 2 present, never predicted
        report = report_from_confusion(ConfusionMatrix(counts))
        assert report.f1[1] == 0.0
        assert report.macro_f1 == pytest.approx((report.f1[0] + 0.0) / 2)

    def test_f1_between_min_and_max_of_p_and_r(self, rng):
        for _ in range(20):
            counts = rng.integers(0, 50, size=(8, 8))
            report = report_from_confusion(ConfusionMatrix(counts))
            for k in range(8):
                if report.precision[k] + report.recall[k] == 0:
                    continue
                lo = min(report.precision[k], report.recall[k])
                hi = max(report.precision[k], report.recall[k])
                assert lo - 1e-9 <= report.f1[k] <= hi + 1e-9

    def test_accuracy_is_trace_over_total(self, rng):
        counts = rng.integers(0, 50, size=(8, 8))
        report = report_from_confusion(ConfusionMatrix(counts))
        assert report.accuracy == pytest.approx(100.0 * np.trace(counts) / counts.sum())
        assert 0.0 <= report.accuracy <= 100.0


class TestPerSample:
    def test_no_transitions_equals_per_frame(self, rng):
        frames = [frame_with_labels(np.full(10, (k % 8) + 1), rng) for k in range(16)]
        preds = [((k + 1) % 8) + 1 for k in range(16)]  # systematically wrong-ish
        frame_rep = per_frame_report([f.labels[0] for f in frames], preds)
        sample_rep = per_sample_report(frames, preds)
        # broadcast over uniform frames multiplies every count by 10
        assert np.array_equal(sample_rep.confusion.counts, frame_rep.confusion.counts * 10)
        assert sample_rep.accuracy == pytest.approx(frame_rep.accuracy)
        assert sample_rep.macro_f1 == pytest.approx(frame_rep.macro_f1)

    def test_six_four_mixed_frame(self, rng):
        labels = np.array([1] * 6 + [2] * 4)
        frame = frame_with_labels(labels, rng)
        frame_rep = per_frame_report([1], [1])  # majority label, predicted right
        sample_rep = per_sample_report([frame], [1])
        assert frame_rep.accuracy == pytest.approx(100.0)
        assert sample_rep.accuracy == pytest.approx(60.0)

    def test_prediction_count_mismatch_rejected(self, rng):
        frames = [frame_with_labels(np.full(5, 1), rng)]
        with pytest.raises(ValueError):
            per_sample_report(frames, [1, 2])

    def test_unlabeled_frame_rejected(self, rng):
        frame = RawFrame(
            samples={s: rng.standard_normal((5, 3)) for s in ("acc", "gyr", "mag")},
            sample_rate_hz=100.0,
        )
        with pytest.raises(ValueError):
            per_sample_report([frame], [1])


class TestExports:
    def test_json_roundtrip(self):
        report = report_from_confusion(ConfusionMatrix(REFERENCE_COUNTS))
        blob = json.loads(report.to_json())
        assert blob["unit"] == "frame"
        assert blob["per_class"]["Walk"]["f1"] == pytest.approx(report.f1[1])
        assert np.array_equal(np.array(blob["confusion"]), REFERENCE_COUNTS)

    def test_text_table_layout(self):
        report = report_from_confusion(ConfusionMatrix(REFERENCE_COUNTS))
        text = report.to_text()
        lines = text.splitlines()
        assert "Still" in lines[1] and "Subway" in lines[1]
        assert any(line.startswith("Recall") for line in lines)
        assert any(line.startswith("Precision") for line in lines)
        assert "92.6" in text and "83.9" in text  # 1-decimal rendering
