"""# Metrics

Confusion matrices and the accuracy, precision, recall and F1 derived from them.

Precision, recall and F1 are computed per class and averaged two ways: macro
(unweighted) and weighted by class support. Comparison tables show the weighted
averages. A ratio with a zero denominator counts as 0 and is tallied in
`MetricsReport.zero_divisions`.
"""

import logging
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EmptyMatrix, IdOutOfRange, LengthMismatch
from .types import TABLE_COLUMNS, ConfusionMatrix, MetricsReport
from .utils import write_csv

__all__ = (
    "confusion",
    "report",
    "evaluate",
    "format_report",
    "format_table",
    "write_table_csv",
    "TABLE_AVERAGE",
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TABLE_AVERAGE = "weighted"
"""The average shown in comparison tables."""


def confusion(
    y_true: Sequence[int],
    y_pred: Sequence[int],
    num_classes: int,
    class_names: Optional[Sequence[str]] = None,
) -> ConfusionMatrix:
    """Count (true, predicted) pairs.

    Parameters
    ----------
    y_true, y_pred: Sequence[int]
        Class ids of equal, non-zero length.
    num_classes: int
        ``C``; every id must be below it.
    class_names: Optional[Sequence[str]]
        Names for the report; defaults to the ids as text.

    Returns
    -------
    ConfusionMatrix
        ``counts[i, j]`` is the number of pairs with true class ``i`` predicted as ``j``.

    Raises
    ------
    LengthMismatch
        The sequences differ in length.
    EmptyMatrix
        Both sequences are empty.
    IdOutOfRange
        An id is negative or not below `num_classes`.
    """
    true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if true.shape != pred.shape:
        msg = f"{true.size} true labels but {pred.size} predictions"
        raise LengthMismatch(msg)
    if true.size == 0:
        msg = "nothing to evaluate"
        raise EmptyMatrix(msg)

    for ids in (true, pred):
        if ids.min() < 0 or ids.max() >= num_classes:
            msg = f"class id outside [0, {num_classes})"
            raise IdOutOfRange(msg)

    names = tuple(class_names) if class_names is not None else tuple(map(str, range(num_classes)))
    if len(names) != num_classes:
        msg = f"{len(names)} class names for {num_classes} classes"
        raise ValueError(msg)

    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    return ConfusionMatrix(counts, names)


def _ratio(numerator: np.ndarray, denominator: np.ndarray) -> Tuple[np.ndarray, int]:
    zero = denominator == 0
    safe = np.where(zero, 1, denominator)
    return np.where(zero, 0.0, numerator / safe), int(zero.sum())


def report(cm: ConfusionMatrix) -> MetricsReport:
    """Derive every metric from a confusion matrix.

    ``precision = TP / (TP + FP)``, ``recall = TP / (TP + FN)`` and
    ``f1 = 2PR / (P + R)`` per class; any 0/0 is 0. A class without support still
    enters the macro average.

    Raises
    ------
    EmptyMatrix
        The matrix counts nothing.
    """
    total = cm.total
    if total == 0:
        msg = "confusion matrix is empty"
        raise EmptyMatrix(msg)

    tp = cm.true_positives.astype(np.float64)
    support = cm.counts.sum(axis=1)
    precision, zp = _ratio(tp, tp + cm.false_positives)
    recall, zr = _ratio(tp, tp + cm.false_negatives)
    f1, zf = _ratio(2.0 * precision * recall, precision + recall)
    zero_divisions = zp + zr + zf
    if zero_divisions:
        logger.warning("%d zero-division ratios were set to 0", zero_divisions)

    weights = support / total
    return MetricsReport(
        accuracy=float(np.trace(cm.counts) / total),
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=float(weights @ precision),
        weighted_recall=float(weights @ recall),
        weighted_f1=float(weights @ f1),
        zero_divisions=zero_divisions,
        class_names=cm.class_names,
    )


def evaluate(
    y_true: Sequence[int],
    y_pred: Sequence[int],
    num_classes: int,
    class_names: Optional[Sequence[str]] = None,
) -> Tuple[ConfusionMatrix, MetricsReport]:
    """`confusion` followed by `report`."""
    cm = confusion(y_true, y_pred, num_classes, class_names)
    return cm, report(cm)


def format_report(rep: MetricsReport, cm: Optional[ConfusionMatrix] = None) -> str:
    """Plain-text per-class table with averages, and the confusion matrix if given."""
    width = max(12, *(len(name) for name in rep.class_names))
    lines = [f"{'':<{width}} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>9}"]
    for i, name in enumerate(rep.class_names):
        lines.append(
            f"{name:<{width}} {rep.precision[i]:>9.4f} {rep.recall[i]:>9.4f} "
            f"{rep.f1[i]:>9.4f} {int(rep.support[i]):>9d}"
        )

    total = int(rep.support.sum())
    lines.append("")
    lines.append(f"{'accuracy':<{width}} {'':>9} {'':>9} {rep.accuracy:>9.4f} {total:>9d}")
    lines.append(
        f"{'macro avg':<{width}} {rep.macro_precision:>9.4f} {rep.macro_recall:>9.4f} "
        f"{rep.macro_f1:>9.4f} {total:>9d}"
    )
    lines.append(
        f"{'weighted avg':<{width}} {rep.weighted_precision:>9.4f} "
        f"{rep.weighted_recall:>9.4f} {rep.weighted_f1:>9.4f} {total:>9d}"
    )

    if cm is not None:
        lines.append("")
        lines.append("confusion (rows true, columns predicted)")
        cell = max(6, *(len(name) for name in cm.class_names))
        lines.append(f"{'':<{width}} " + " ".join(f"{n:>{cell}}" for n in cm.class_names))
        for name, row in zip(cm.class_names, cm.counts):
            lines.append(f"{name:<{width}} " + " ".join(f"{int(v):>{cell}d}" for v in row))

    return "\n".join(lines)


def format_table(rows: Iterable[Sequence[Any]]) -> str:
    """Render comparison rows in `TABLE_COLUMNS` order as aligned text."""
    rows = list(rows)
    width = max([len(TABLE_COLUMNS[0])] + [len(str(row[0])) for row in rows])
    header = f"{TABLE_COLUMNS[0]:<{width}} " + " ".join(f"{c:>9}" for c in TABLE_COLUMNS[1:])
    lines = [header + f"   ({TABLE_AVERAGE} averages)"]
    for row in rows:
        lines.append(f"{row[0]:<{width}} " + " ".join(f"{float(v):>9.4f}" for v in row[1:]))
    return "\n".join(lines)


def write_table_csv(
    rows: Iterable[Sequence[Any]], path: PathLike, meta: Optional[Mapping[str, Any]] = None
) -> Path:
    """Write comparison rows under a `TABLE_COLUMNS` header, flagging the average used."""
    return write_csv(path, TABLE_COLUMNS, rows, meta={"average": TABLE_AVERAGE, **(meta or {})})
