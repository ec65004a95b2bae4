"""Evaluation result types"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, Tuple, Union

import numpy as np

__all__ = (
    "ConfusionMatrix",
    "MetricsReport",
    "TABLE_COLUMNS",
)

TABLE_COLUMNS = ("model", "accuracy", "precision", "recall", "f1")
"""Column order of comparison table rows. Precision, recall and F1 are weighted averages."""


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of (true, predicted) class pairs.

    Attributes
    ----------
    counts: np.ndarray
        int64 ``[C, C]``, rows are true classes and columns predicted classes.
    class_names: Tuple[str, ...]
        Name of every class id.
    """

    counts: np.ndarray
    class_names: Tuple[str, ...]

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def true_positives(self) -> np.ndarray:
        return np.diag(self.counts).copy()

    @property
    def false_positives(self) -> np.ndarray:
        return self.counts.sum(axis=0) - np.diag(self.counts)

    @property
    def false_negatives(self) -> np.ndarray:
        return self.counts.sum(axis=1) - np.diag(self.counts)

    @property
    def true_negatives(self) -> np.ndarray:
        return (
            self.total - self.true_positives - self.false_positives - self.false_negatives
        )


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy plus per-class, macro and weighted precision, recall and F1.

    Attributes
    ----------
    accuracy: float
        Trace over total.
    precision, recall, f1: np.ndarray
        float64 ``[C]`` per-class values.
    support: np.ndarray
        int64 ``[C]`` true count per class.
    macro_precision, macro_recall, macro_f1: float
        Unweighted class means.
    weighted_precision, weighted_recall, weighted_f1: float
        Support-weighted class means.
    zero_divisions: int
        How many 0/0 ratios were replaced by 0.
    class_names: Tuple[str, ...]
        Name of every class id.
    """

    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    zero_divisions: int
    class_names: Tuple[str, ...]

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready representation, per-class values keyed by class name."""
        per_class: Dict[str, Dict[str, Union[float, int]]] = {}
        for i, name in enumerate(self.class_names):
            per_class[name] = {
                "precision": float(self.precision[i]),
                "recall": float(self.recall[i]),
                "f1": float(self.f1[i]),
                "support": int(self.support[i]),
            }

        return {
            "accuracy": self.accuracy,
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "weighted": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
            "per_class": per_class,
            "zero_divisions": self.zero_divisions,
        }

    def table_row(self, model: str) -> List[Union[str, float]]:
        """Return a row in `TABLE_COLUMNS` order."""
        return [
            model,
            self.accuracy,
            self.weighted_precision,
            self.weighted_recall,
            self.weighted_f1,
        ]
