"""Confusion matrices, per-class precision/recall/F1, macro-F1, and the
per-frame vs per-sample report variants.

Per-sample scoring broadcasts each frame's single prediction to every one
of its samples, so frames spanning a mode change are partially wrong by
construction; that is the cost of majority labeling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import MODE_NAMES, NUM_MODES


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are ground truth, columns are predictions, both over mode ids 1..8."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (NUM_MODES, NUM_MODES):
            raise ValueError(f"confusion matrix must be {NUM_MODES}x{NUM_MODES}, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def confusion(truth: Sequence[int], pred: Sequence[int]) -> ConfusionMatrix:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ValueError(f"truth and prediction lengths differ: {truth.shape} vs {pred.shape}")
    counts = np.zeros((NUM_MODES, NUM_MODES), dtype=np.int64)
    np.add.at(counts, (truth - 1, pred - 1), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class EvalReport:
    """Percent-scale metrics; classes with zero support are excluded from
    the macro average and carry zeros in the per-class arrays."""

    confusion: ConfusionMatrix
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float
    macro_f1: float
    unit: str

    def to_dict(self) -> dict:
        return {
            "unit": self.unit,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": {
                MODE_NAMES[k + 1]: {
                    "precision": float(self.precision[k]),
                    "recall": float(self.recall[k]),
                    "f1": float(self.f1[k]),
                    "support": int(self.confusion.row_sums()[k]),
                }
                for k in range(NUM_MODES)
            },
            "confusion": self.confusion.counts.tolist(),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def to_text(self) -> str:
        """Aligned table: counts grid plus recall/precision/F1 rows, 1 decimal."""
        names = [MODE_NAMES[k] for k in range(1, NUM_MODES + 1)]
        width = max(len(n) for n in names) + 2
        head = " " * width + "".join(f"{n:>{width}}" for n in names)
        lines = [f"confusion ({self.unit}s): rows = truth, columns = predicted", head]
        for k, name in enumerate(names):
            row = "".join(f"{v:>{width}d}" for v in self.confusion.counts[k])
            lines.append(f"{name:<{width}}{row}")
        for label, values in (
            ("Recall", self.recall),
            ("Precision", self.precision),
            ("F1", self.f1),
        ):
            row = "".join(f"{v:>{width}.1f}" for v in values)
            lines.append(f"{label:<{width}}{row}")
        lines.append(f"accuracy: {self.accuracy:.1f}    macro-F1: {self.macro_f1:.1f}")
        return "\n".join(lines)


def report_from_confusion(cm: ConfusionMatrix, unit: str = "frame") -> EvalReport:
    rows = cm.row_sums().astype(np.float64)
    cols = cm.col_sums().astype(np.float64)
    diag = np.diag(cm.counts).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        recall = np.where(rows > 0, diag / rows, 0.0) * 100.0
        precision = np.where(cols > 0, diag / cols, 0.0) * 100.0
        denom = recall + precision
        f1 = np.where(denom > 0, 2.0 * recall * precision / denom, 0.0)
    present = rows > 0
    if not present.any():
        raise ValueError("confusion matrix has no support in any class")
    macro = float(f1[present].mean())
    accuracy = 100.0 * float(diag.sum()) / cm.total
    return EvalReport(
        confusion=cm,
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=accuracy,
        macro_f1=macro,
        unit=unit,
    )


def per_frame_report(truth: Sequence[int], pred: Sequence[int]) -> EvalReport:
    return report_from_confusion(confusion(truth, pred), unit="frame")


def per_sample_report(frames, frame_preds: Sequence[int]) -> EvalReport:
    """Broadcast one prediction per frame to all of its samples and score
    sample-wise. ``frames`` is any iterable of labeled RawFrames."""
    frame_list = list(frames)
    frame_preds = np.asarray(frame_preds, dtype=np.int64)
    if len(frame_list) != frame_preds.size:
        raise ValueError(
            f"{len(frame_list)} frames but {frame_preds.size} predictions"
        )
    counts = np.zeros((NUM_MODES, NUM_MODES), dtype=np.int64)
    for frame, pred in zip(frame_list, frame_preds):
        if frame.labels is None:
            raise ValueError("per-sample scoring needs labeled frames")
        truth_counts = np.bincount(frame.labels, minlength=NUM_MODES + 1)[1:]
        counts[:, pred - 1] += truth_counts
    return report_from_confusion(ConfusionMatrix(counts), unit="sample")
