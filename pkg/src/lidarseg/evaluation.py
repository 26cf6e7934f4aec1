"""Confusion-matrix accumulation and intersection-over-union scores.

IoU per class is TP / (TP + FP + FN) over the accumulated counts. Pairs
whose ground truth is unlabeled are never counted, and the sky class is
excluded from the mean (invalid returns are unannotated, so sky ground
truth cannot exist). Classes that never appear at all are undefined and
likewise left out of the mean.
"""

from __future__ import annotations

import json

import numpy as np

from .labels import EVAL_CLASSES, NUM_CLASSES, UNLABELED, LidarClass


class ConfusionMatrix:
    """counts[g, p] = samples with ground truth g predicted as p."""

    def __init__(self, num_classes: int = NUM_CLASSES):
        self.num_classes = num_classes
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def accumulate(self, prediction, truth) -> "ConfusionMatrix":
        """Count prediction/truth pairs; unlabeled truth is skipped."""
        prediction = np.asarray(prediction).ravel()
        truth = np.asarray(truth).ravel()
        if prediction.shape != truth.shape:
            raise ValueError(f"length mismatch: {prediction.shape} vs {truth.shape}")
        keep = truth != UNLABELED
        pred, gt = prediction[keep].astype(np.int64), truth[keep].astype(np.int64)
        if pred.size and (pred.min() < 0 or pred.max() >= self.num_classes):
            raise ValueError("prediction outside the class range for an annotated sample")
        np.add.at(self.counts, (gt, pred), 1)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        self.counts += other.counts
        return self

    def class_iou(self, c) -> float | None:
        """IoU of one class, or None when the class never occurs (0/0)."""
        c = int(c)
        tp = int(self.counts[c, c])
        fp = int(self.counts[:, c].sum()) - tp
        fn = int(self.counts[c, :].sum()) - tp
        denom = tp + fp + fn
        if denom == 0:
            return None
        return tp / denom

    def per_class_iou(self) -> dict[str, float | None]:
        return {LidarClass(c).name.lower(): self.class_iou(c) for c in EVAL_CLASSES}

    def mean_iou(self) -> float:
        scores = [s for s in (self.class_iou(c) for c in EVAL_CLASSES) if s is not None]
        if not scores:
            raise ValueError("no class has a defined IoU")
        return float(np.mean(scores))

    def to_report(self) -> dict:
        return {
            "per_class_iou": self.per_class_iou(),
            "mean_iou": self.mean_iou(),
            "matrix": self.counts.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_report(), indent=2)

    def format_table(self) -> str:
        """Aligned one-row percentage table over the evaluated classes."""
        names = [LidarClass(c).name.lower() for c in EVAL_CLASSES] + ["mean IoU"]
        scores = [self.class_iou(c) for c in EVAL_CLASSES]
        cells = [f"{100 * s:.1f}%" if s is not None else "n/a" for s in scores]
        cells.append(f"{100 * self.mean_iou():.1f}%")
        widths = [max(len(n), len(v)) for n, v in zip(names, cells)]
        header = "  ".join(n.rjust(w) for n, w in zip(names, widths))
        row = "  ".join(v.rjust(w) for v, w in zip(cells, widths))
        return header + "\n" + row
