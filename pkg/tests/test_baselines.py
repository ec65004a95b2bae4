import math

import numpy as np
import pytest

from aspectly.baselines import (
    LinearSvm,
    NaiveBayes,
    baseline_from_dict,
    create,
    fit,
    grow_tree,
    load_baseline,
    predict,
    predict_proba,
    save_baseline,
)
from aspectly.corpus import split
from aspectly.errors import (
    BaselineError,
    DimensionMismatch,
    MissingClass,
    NegativeFeature,
    NotConvergedWarning,
    NotFitted,
)
from aspectly.runner import task_documents
from aspectly.textprep import fit_vocab, tfidf_fit, tfidf_transform_many
from aspectly.types import BaselineConfig, BaselineKind, Normalizer, SplitSpec, Task

quiet = pytest.mark.filterwarnings("ignore::aspectly.errors.NotConvergedWarning")

FAST = BaselineConfig(rf_trees=25, svm_max_iter=300, lr_max_iter=300)


@pytest.fixture()
def clusters():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.uniform(0, 0.2, size=(20, 3)), rng.uniform(0, 0.2, size=(20, 3))])
    X[:20, 0] += 1.0
    X[20:, 1] += 1.0
    y = np.repeat([0, 1], 20)
    return X, y


@pytest.fixture(scope="module")
def separable_tfidf(separable):
    train_ds, test_ds = split(separable, SplitSpec(0.7, seed=0))
    nz = Normalizer()
    train_docs = task_documents(train_ds, range(len(train_ds)), Task.ASPECT, nz)
    test_docs = task_documents(test_ds, range(len(test_ds)), Task.ASPECT, nz)
    vectorizer = tfidf_fit(train_docs, fit_vocab(train_docs))
    return (
        tfidf_transform_many(train_docs, vectorizer),
        np.array(train_ds.label_ids(Task.ASPECT.field)),
        tfidf_transform_many(test_docs, vectorizer),
        np.array(test_ds.label_ids(Task.ASPECT.field)),
    )


@quiet
@pytest.mark.parametrize("kind", list(BaselineKind))
def test_separable_clusters_fit_perfectly(clusters, kind):
    X, y = clusters
    model = fit(kind, X, y, FAST)
    np.testing.assert_array_equal(predict(model, X), y)


@quiet
@pytest.mark.parametrize("kind", list(BaselineKind))
def test_baselines_learn_separable_aspects(separable_tfidf, kind):
    X_train, y_train, X_test, y_test = separable_tfidf
    model = fit(kind, X_train, y_train, BaselineConfig(rf_trees=30), num_classes=4)
    accuracy = float(np.mean(predict(model, X_test) == y_test))
    majority = np.bincount(y_test).max() / y_test.size
    assert accuracy >= 0.8
    assert accuracy >= majority + 0.15


def test_naive_bayes_matches_hand_posterior():
    X = np.array([[2, 1, 0], [1, 0, 1], [0, 1, 2], [0, 2, 1]], dtype=float)
    y = np.array([0, 0, 1, 1])
    model = fit(BaselineKind.NAIVE_BAYES, X, y)

    # smoothed class 0 counts are [4, 2, 2] of 8, class 1 [1, 4, 4] of 9
    like0 = 0.5 * (4 / 8) * (2 / 8)
    like1 = 0.5 * (1 / 9) * (4 / 9)
    proba = predict_proba(model, np.array([[1.0, 1.0, 0.0]]))
    np.testing.assert_allclose(proba[0], [like0 / (like0 + like1), like1 / (like0 + like1)])
    assert predict(model, np.array([[1.0, 1.0, 0.0]]))[0] == 0
    assert math.isclose(model.feature_log_prob[1, 0], math.log(1 / 9))


def test_naive_bayes_probabilities_sum_to_one(separable_tfidf):
    X_train, y_train, X_test, _ = separable_tfidf
    proba = predict_proba(fit(BaselineKind.NAIVE_BAYES, X_train, y_train), X_test)
    assert np.all(np.abs(proba.sum(axis=1) - 1.0) < 1e-12)


def test_naive_bayes_duplicated_set_without_smoothing():
    X = np.array([[1.0, 2.0, 0.5], [3.0, 1.0, 1.0], [0.5, 0.5, 4.0], [2.0, 1.0, 1.0]])
    y = np.array([0, 0, 1, 1])
    config = BaselineConfig(nb_alpha=0.0)
    once = fit(BaselineKind.NAIVE_BAYES, X, y, config)
    twice = fit(BaselineKind.NAIVE_BAYES, np.vstack([X, X]), np.concatenate([y, y]), config)
    np.testing.assert_allclose(once.feature_log_prob, twice.feature_log_prob, atol=1e-12)
    np.testing.assert_allclose(once.class_log_prior, twice.class_log_prior, atol=1e-12)


def test_naive_bayes_zero_smoothing_needs_every_count():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        fit(BaselineKind.NAIVE_BAYES, X, [0, 1], BaselineConfig(nb_alpha=0.0))


def test_naive_bayes_rejects_negative_features():
    with pytest.raises(NegativeFeature):
        fit(BaselineKind.NAIVE_BAYES, np.array([[1.0, -0.5], [0.0, 1.0]]), [0, 1])


@quiet
@pytest.mark.parametrize("kind", [BaselineKind.NAIVE_BAYES, BaselineKind.LOGISTIC_REGRESSION])
def test_row_order_does_not_matter(clusters, kind):
    X, y = clusters
    order = np.random.default_rng(3).permutation(len(y))
    first = fit(kind, X, y, FAST)
    second = fit(kind, X[order], y[order], FAST)
    probe = np.random.default_rng(4).uniform(0, 1, size=(10, 3))
    np.testing.assert_allclose(
        predict_proba(first, probe), predict_proba(second, probe), atol=1e-10
    )


@quiet
def test_svm_holds_one_weight_vector_per_class(separable_tfidf):
    X_train, y_train, _, _ = separable_tfidf
    model = fit(BaselineKind.LINEAR_SVM, X_train, y_train, FAST)
    assert isinstance(model, LinearSvm)
    assert model.coef.shape == (4, X_train.shape[1])
    assert model.intercept.shape == (4,)


def test_forest_is_seeded_and_independent_of_threads(separable_tfidf):
    X_train, y_train, X_test, _ = separable_tfidf
    serial = fit(BaselineKind.RANDOM_FOREST, X_train, y_train, BaselineConfig(rf_trees=12))
    again = fit(BaselineKind.RANDOM_FOREST, X_train, y_train, BaselineConfig(rf_trees=12))
    threaded = fit(
        BaselineKind.RANDOM_FOREST, X_train, y_train, BaselineConfig(rf_trees=12, rf_jobs=4)
    )
    assert serial.to_dict()["state"] == again.to_dict()["state"] == threaded.to_dict()["state"]
    np.testing.assert_array_equal(predict(serial, X_test), predict(threaded, X_test))


def test_single_tree_forest_predicts_its_tree(clusters):
    X, y = clusters
    forest = fit(BaselineKind.RANDOM_FOREST, X, y, BaselineConfig(rf_trees=1), seed=2)
    probe = np.random.default_rng(5).uniform(0, 1.2, size=(25, 3))
    np.testing.assert_array_equal(predict(forest, probe), forest.trees[0].predict(probe))


def test_grown_tree_separates_its_training_rows():
    X = np.array([[0.0, 1.0], [1.0, 1.0], [2.0, 0.0], [3.0, 0.0]])
    y = np.array([0, 0, 1, 2])
    tree = grow_tree(X, y, 3, np.random.default_rng(0))
    np.testing.assert_array_equal(tree.predict(X), y)
    assert tree.node_count == 5


def test_depth_limited_tree_is_a_stump():
    X = np.arange(8, dtype=float).reshape(8, 1)
    y = np.array([0, 0, 1, 1, 0, 0, 1, 1])
    tree = grow_tree(X, y, 2, np.random.default_rng(0), max_depth=1)
    assert tree.node_count == 3


def test_ties_go_to_the_lower_class():
    untrained = fit(
        BaselineKind.LOGISTIC_REGRESSION,
        np.eye(3),
        [0, 1, 2],
        BaselineConfig(lr_max_iter=0),
    )
    np.testing.assert_array_equal(predict(untrained, np.eye(3)), [0, 0, 0])

    mirrored = fit(BaselineKind.NAIVE_BAYES, np.eye(2), [0, 1])
    assert predict(mirrored, np.array([[1.0, 1.0]]))[0] == 0


def test_not_converged_is_a_warning():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.warns(NotConvergedWarning):
        model = fit(BaselineKind.LOGISTIC_REGRESSION, X, [0, 1], BaselineConfig(lr_max_iter=1))
    assert not model.converged
    assert model.n_iter == 1


def test_contract_errors(clusters):
    X, y = clusters
    with pytest.raises(NotFitted):
        create(BaselineKind.NAIVE_BAYES).predict(X)
    with pytest.raises(NotFitted):
        NaiveBayes().to_dict()
    with pytest.raises(MissingClass):
        fit(BaselineKind.NAIVE_BAYES, X[:20], y[:20], num_classes=2)
    with pytest.raises(DimensionMismatch):
        fit(BaselineKind.NAIVE_BAYES, X, y[:5])
    with pytest.raises(DimensionMismatch):
        fit(BaselineKind.NAIVE_BAYES, X, y).predict(X[:, :2])
    with pytest.raises(DimensionMismatch):
        fit(BaselineKind.NAIVE_BAYES, X[0], y[:1])


@quiet
@pytest.mark.parametrize("kind", [BaselineKind.LINEAR_SVM, BaselineKind.RANDOM_FOREST])
def test_score_only_learners_have_no_probabilities(clusters, kind):
    X, y = clusters
    with pytest.raises(BaselineError):
        predict_proba(fit(kind, X, y, FAST), X)


@quiet
@pytest.mark.parametrize("kind", list(BaselineKind))
def test_checkpoints_survive_disk(tmp_path, clusters, kind):
    X, y = clusters
    model = fit(kind, X, y, FAST, seed=7)
    loaded = load_baseline(save_baseline(model, tmp_path / f"{kind.value}.json"))
    assert loaded.kind is kind
    assert loaded.seed == 7
    probe = np.random.default_rng(6).uniform(0, 1.2, size=(30, 3))
    np.testing.assert_array_equal(predict(loaded, probe), predict(model, probe))


def test_checkpoint_format_is_checked(clusters):
    X, y = clusters
    document = fit(BaselineKind.NAIVE_BAYES, X, y).to_dict()
    with pytest.raises(BaselineError):
        baseline_from_dict({**document, "version": 2})
    with pytest.raises(BaselineError):
        baseline_from_dict({**document, "kind": "knn"})
    with pytest.raises(BaselineError):
        baseline_from_dict({k: v for k, v in document.items() if k != "state"})
