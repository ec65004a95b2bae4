import numpy as np
import pytest

from aspectly.errors import EmptyMatrix, IdOutOfRange, LengthMismatch
from aspectly.metrics import (
    confusion,
    evaluate,
    format_report,
    format_table,
    report,
    write_table_csv,
)
from aspectly.types import TABLE_COLUMNS, ConfusionMatrix
from aspectly.utils import read_csv


def pairs_from_counts(counts):
    true, pred = [], []
    for i, row in enumerate(counts):
        for j, n in enumerate(row):
            true += [i] * n
            pred += [j] * n
    return true, pred


def test_two_class_hand_fixture():
    true, pred = pairs_from_counts([[50, 10], [5, 35]])
    cm, rep = evaluate(true, pred, 2, ["neg", "pos"])

    np.testing.assert_array_equal(cm.counts, [[50, 10], [5, 35]])
    assert rep.accuracy == pytest.approx(0.85)
    np.testing.assert_allclose(rep.precision, [50 / 55, 35 / 45])
    np.testing.assert_allclose(rep.recall, [50 / 60, 35 / 40])
    f1 = [2 * p * r / (p + r) for p, r in zip(rep.precision, rep.recall)]
    np.testing.assert_allclose(rep.f1, f1)
    assert rep.macro_f1 == pytest.approx(np.mean(f1))
    assert rep.weighted_f1 == pytest.approx(0.6 * f1[0] + 0.4 * f1[1])
    np.testing.assert_array_equal(rep.support, [60, 40])
    assert rep.zero_divisions == 0


def _loop_metrics(true, pred, num_classes):
    """Per-class counting by plain loops."""
    n = len(true)
    per_class = []
    for c in range(num_classes):
        tp = sum(1 for t, p in zip(true, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(true, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(true, pred) if t == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append((precision, recall, f1, tp + fn))

    accuracy = sum(1 for t, p in zip(true, pred) if t == p) / n
    macro = [sum(m[k] for m in per_class) / num_classes for k in range(3)]
    weighted = [sum(m[k] * m[3] for m in per_class) / n for k in range(3)]
    return accuracy, per_class, macro, weighted


def test_matches_loop_counting_on_random_fixtures():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        num_classes = int(rng.integers(2, 6))
        n = int(rng.integers(1, 40))
        true = rng.integers(0, num_classes, size=n).tolist()
        pred = rng.integers(0, num_classes, size=n).tolist()

        _, rep = evaluate(true, pred, num_classes)
        accuracy, per_class, macro, weighted = _loop_metrics(true, pred, num_classes)
        assert abs(rep.accuracy - accuracy) < 1e-12
        for c, (precision, recall, f1, support) in enumerate(per_class):
            assert abs(rep.precision[c] - precision) < 1e-12
            assert abs(rep.recall[c] - recall) < 1e-12
            assert abs(rep.f1[c] - f1) < 1e-12
            assert rep.support[c] == support
        got_macro = (rep.macro_precision, rep.macro_recall, rep.macro_f1)
        got_weighted = (rep.weighted_precision, rep.weighted_recall, rep.weighted_f1)
        assert np.allclose(got_macro, macro, rtol=0, atol=1e-12)
        assert np.allclose(got_weighted, weighted, rtol=0, atol=1e-12)


def test_perfect_predictions():
    _, rep = evaluate([0, 1, 2, 2], [0, 1, 2, 2], 3)
    assert rep.accuracy == 1.0
    assert rep.macro_f1 == 1.0
    assert rep.weighted_f1 == 1.0


def test_absent_class_counts_zero_divisions():
    _, rep = evaluate([0, 0, 2], [0, 0, 2], 3)
    assert rep.zero_divisions == 3
    assert rep.f1[1] == 0.0
    assert rep.macro_f1 == pytest.approx(2 / 3)
    assert rep.weighted_f1 == pytest.approx(1.0)


def test_relabelling_classes_permutes_the_report():
    rng = np.random.default_rng(2)
    true = rng.integers(0, 4, size=60)
    pred = rng.integers(0, 4, size=60)
    perm = np.array([2, 0, 3, 1])

    _, rep = evaluate(true, pred, 4)
    _, moved = evaluate(perm[true], perm[pred], 4)
    np.testing.assert_allclose(moved.f1[perm], rep.f1)
    np.testing.assert_allclose(moved.precision[perm], rep.precision)
    assert moved.weighted_f1 == pytest.approx(rep.weighted_f1)
    assert moved.accuracy == rep.accuracy


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion([0, 1], [0], 2)
    with pytest.raises(EmptyMatrix):
        confusion([], [], 2)
    with pytest.raises(IdOutOfRange):
        confusion([0, 2], [0, 1], 2)
    with pytest.raises(IdOutOfRange):
        confusion([0, 1], [-1, 1], 2)
    with pytest.raises(ValueError):
        confusion([0, 1], [0, 1], 2, ["only"])
    with pytest.raises(EmptyMatrix):
        report(ConfusionMatrix(np.zeros((2, 2), dtype=np.int64), ("a", "b")))


def test_report_document():
    _, rep = evaluate([0, 1, 1], [0, 1, 0], 2, ["Movie", "Person"])
    document = rep.to_dict()
    assert document["accuracy"] == pytest.approx(2 / 3)
    assert set(document["per_class"]) == {"Movie", "Person"}
    assert document["per_class"]["Person"]["support"] == 2
    assert rep.table_row("NB")[0] == "NB"
    assert rep.table_row("NB")[4] == rep.weighted_f1


def test_format_report_lists_classes_and_matrix():
    cm, rep = evaluate([0, 1, 1], [0, 1, 0], 2, ["Movie", "Person"])
    text = format_report(rep, cm)
    assert "Movie" in text
    assert "weighted avg" in text
    assert "confusion (rows true, columns predicted)" in text
    assert "confusion" not in format_report(rep)


def test_table_text_and_csv(tmp_path):
    _, rep = evaluate([0, 1, 1, 0], [0, 1, 1, 1], 2)
    rows = [rep.table_row("Proposed DCNN"), rep.table_row("Naive Bayes")]

    text = format_table(rows)
    assert text.splitlines()[0].startswith("model")
    assert "weighted averages" in text
    assert "0.7500" in text.splitlines()[1]

    path = write_table_csv(rows, tmp_path / "table.csv", meta={"task": "aspect"})
    assert path.read_text(encoding="utf-8").startswith("#")
    written = read_csv(path)
    assert written[0] == list(TABLE_COLUMNS)
    assert [row[0] for row in written[1:]] == ["Proposed DCNN", "Naive Bayes"]
    assert float(written[1][1]) == pytest.approx(0.75)
