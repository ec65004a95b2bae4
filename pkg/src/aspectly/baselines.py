"""# Classical baselines

Four learners on TF-IDF vectors behind one fit/predict contract:

- multinomial Naive Bayes with additive smoothing,
- a linear SVM, one-vs-rest hinge loss with an L2 penalty,
- a random forest of Gini CART trees on bootstrap samples,
- multinomial logistic regression with an L2 penalty.

Every prediction breaks ties toward the lower class id.
"""

import abc
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Mapping, Optional, Tuple, Type, Union

import numpy as np

from .errors import (
    BaselineError,
    DimensionMismatch,
    MissingClass,
    NegativeFeature,
    NotConvergedWarning,
    NotFitted,
)
from .types import BaselineConfig, BaselineKind
from .utils import read_json, write_json

__all__ = (
    "BaselineModel",
    "NaiveBayes",
    "LinearSvm",
    "DecisionTree",
    "grow_tree",
    "RandomForest",
    "LogisticRegression",
    "create",
    "fit",
    "predict",
    "predict_proba",
    "baseline_from_dict",
    "save_baseline",
    "load_baseline",
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BASELINE_FORMAT = "aspectly-baseline"
BASELINE_VERSION = 1


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def _as_matrix(X: Any) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        msg = f"feature matrix must be 2-dimensional, got shape {X.shape}"
        raise DimensionMismatch(msg)
    return X


class BaselineModel(abc.ABC):
    """Shared contract of the classical learners.

    Parameters
    ----------
    config: Optional[BaselineConfig]
        Hyperparameters; only the fields of the model's kind are read.
    seed: int
        Seed of any randomness in fitting.
    """

    kind: ClassVar[BaselineKind]

    def __init__(self, config: Optional[BaselineConfig] = None, seed: int = 0) -> None:
        self.config = config or BaselineConfig()
        self.config.validate()
        self.seed = seed
        self.n_features = 0
        self.num_classes = 0
        self._fitted = False

    @property
    def fitted(self) -> bool:
        return self._fitted

    def fit(self, X: Any, y: Any, num_classes: Optional[int] = None) -> "BaselineModel":
        """Fit on features ``[N, V]`` and class ids ``[N]``.

        Parameters
        ----------
        X: Any
            Feature matrix.
        y: Any
            Class ids.
        num_classes: Optional[int]
            Number of classes ``C``; defaults to ``max(y) + 1``.

        Returns
        -------
        BaselineModel
            The fitted model itself.

        Raises
        ------
        MissingClass
            A class in ``[0, C)`` has no example.
        DimensionMismatch
            `X` and `y` disagree in length.
        """
        X = _as_matrix(X)
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            msg = f"{X.shape[0]} feature rows but labels of shape {y.shape}"
            raise DimensionMismatch(msg)
        if y.size == 0:
            msg = "cannot fit on zero examples"
            raise MissingClass(msg)
        if y.min() < 0:
            msg = "class ids must be non-negative"
            raise ValueError(msg)

        num_classes = int(y.max()) + 1 if num_classes is None else num_classes
        if y.max() >= num_classes:
            msg = f"class id {int(y.max())} is not below {num_classes}"
            raise ValueError(msg)
        absent = np.flatnonzero(np.bincount(y, minlength=num_classes) == 0)
        if absent.size:
            msg = f"classes without training examples: {absent.tolist()}"
            raise MissingClass(msg)

        self.n_features = X.shape[1]
        self.num_classes = num_classes
        self._fit(X, y)
        self._fitted = True
        logger.debug("fitted %s on %d x %d", self.kind.value, *X.shape)
        return self

    def _checked(self, X: Any) -> np.ndarray:
        if not self._fitted:
            msg = f"{self.kind.display_name} must be fitted before predicting"
            raise NotFitted(msg)
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            msg = f"expected {self.n_features} features, got {X.shape[1]}"
            raise DimensionMismatch(msg)
        return X

    def predict(self, X: Any) -> np.ndarray:
        """Class ids ``[M]`` for features ``[M, V]``.

        Raises
        ------
        NotFitted
            `fit` has not been called.
        DimensionMismatch
            The feature count differs from fit time.
        """
        return self._predict(self._checked(X))

    def predict_proba(self, X: Any) -> np.ndarray:
        """Class probabilities ``[M, C]``, for the learners that define them."""
        return self._predict_proba(self._checked(X))

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        msg = f"{self.kind.display_name} does not produce probabilities"
        raise BaselineError(msg)

    @abc.abstractmethod
    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        ...

    @abc.abstractmethod
    def _predict(self, X: np.ndarray) -> np.ndarray:
        ...

    @abc.abstractmethod
    def _state(self) -> Dict[str, Any]:
        ...

    @abc.abstractmethod
    def _load_state(self, state: Mapping[str, Any]) -> None:
        ...

    def to_dict(self) -> Dict[str, Any]:
        """Versioned JSON-ready document of the configuration and fitted state."""
        if not self._fitted:
            msg = "only fitted models can be saved"
            raise NotFitted(msg)
        return {
            "format": BASELINE_FORMAT,
            "version": BASELINE_VERSION,
            "kind": self.kind.value,
            "config": self.config.to_dict(),
            "seed": self.seed,
            "n_features": self.n_features,
            "num_classes": self.num_classes,
            "state": self._state(),
        }


class NaiveBayes(BaselineModel):
    """Multinomial Naive Bayes.

    ``log P(c | x) ~ log prior[c] + sum_t x[t] * log theta[c, t]`` with
    ``theta[c, t] = (count[c, t] + alpha) / sum_t' (count[c, t'] + alpha)``.
    """

    kind = BaselineKind.NAIVE_BAYES

    class_log_prior: np.ndarray
    feature_log_prob: np.ndarray

    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        if (X < 0).any():
            msg = "multinomial Naive Bayes needs non-negative features"
            raise NegativeFeature(msg)

        alpha = self.config.nb_alpha
        onehot = np.eye(self.num_classes)[y]
        counts = onehot.T @ X + alpha
        if (counts <= 0).any():
            msg = "nb_alpha of 0 needs a positive count for every class and feature"
            raise ValueError(msg)

        class_counts = onehot.sum(axis=0)
        self.class_log_prior = np.log(class_counts / class_counts.sum())
        self.feature_log_prob = np.log(counts / counts.sum(axis=1, keepdims=True))

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        return X @ self.feature_log_prob.T + self.class_log_prior

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.joint_log_likelihood(X), axis=1)

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.joint_log_likelihood(X))

    def _state(self) -> Dict[str, Any]:
        return {
            "class_log_prior": self.class_log_prior.tolist(),
            "feature_log_prob": self.feature_log_prob.tolist(),
        }

    def _load_state(self, state: Mapping[str, Any]) -> None:
        self.class_log_prior = np.asarray(state["class_log_prior"], dtype=np.float64)
        self.feature_log_prob = np.asarray(state["feature_log_prob"], dtype=np.float64)


class _LinearModel(BaselineModel):
    """Learners scoring classes with one weight vector and bias each."""

    coef: np.ndarray
    intercept: np.ndarray
    converged: bool = False
    n_iter: int = 0

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Class scores ``[M, C]``."""
        return X @ self.coef.T + self.intercept

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)

    def _state(self) -> Dict[str, Any]:
        return {
            "coef": self.coef.tolist(),
            "intercept": self.intercept.tolist(),
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    def _load_state(self, state: Mapping[str, Any]) -> None:
        self.coef = np.asarray(state["coef"], dtype=np.float64).reshape(
            self.num_classes, self.n_features
        )
        self.intercept = np.asarray(state["intercept"], dtype=np.float64)
        self.converged = bool(state["converged"])
        self.n_iter = int(state["n_iter"])


def _warn_not_converged(model: BaselineModel, max_iter: int) -> None:
    msg = f"{model.kind.display_name} did not converge within {max_iter} iterations"
    logger.warning(msg)
    warnings.warn(msg, NotConvergedWarning, stacklevel=4)


class LinearSvm(_LinearModel):
    """One-vs-rest linear SVM.

    Each class ``c`` owns a weight vector and bias minimizing
    ``||w||^2 / (2N) + svm_c * mean(max(0, 1 - t * (x . w + b)))`` with ``t = +1`` for
    class ``c`` and ``-1`` otherwise, by full-batch subgradient descent until the
    objective changes by less than ``svm_tol``. Prediction is the class with the
    highest score.
    """

    kind = BaselineKind.LINEAR_SVM

    def _objective(self, X: np.ndarray, targets: np.ndarray) -> float:
        margins = targets * self.decision_function(X)
        hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0).sum()
        return float((self.coef**2).sum() / (2 * X.shape[0]) + self.config.svm_c * hinge)

    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        n = X.shape[0]
        cfg = self.config
        targets = np.where(np.eye(self.num_classes)[y] > 0, 1.0, -1.0)
        self.coef = np.zeros((self.num_classes, self.n_features))
        self.intercept = np.zeros(self.num_classes)
        self.converged = False
        self.n_iter = 0

        previous = self._objective(X, targets)
        for iteration in range(1, cfg.svm_max_iter + 1):
            pull = (targets * self.decision_function(X) < 1.0) * targets
            grad_coef = self.coef / n - cfg.svm_c * (pull.T @ X) / n
            grad_intercept = -cfg.svm_c * pull.sum(axis=0) / n
            self.coef -= cfg.svm_learning_rate * grad_coef
            self.intercept -= cfg.svm_learning_rate * grad_intercept

            current = self._objective(X, targets)
            self.n_iter = iteration
            if abs(previous - current) < cfg.svm_tol:
                self.converged = True
                break
            previous = current

        if not self.converged and cfg.svm_max_iter > 0:
            _warn_not_converged(self, cfg.svm_max_iter)


@dataclass
class DecisionTree:
    """A fitted CART tree stored as parallel node arrays.

    Node 0 is the root. Internal nodes send rows with ``x[feature] <= threshold`` to
    `left`, the rest to `right`. Leaves have ``feature == -1`` and predict `value`.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return int(self.feature.shape[0])

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            idx = rows[active]
            current = node[idx]
            go_left = X[idx, self.feature[current]] <= self.threshold[current]
            node[idx] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> Dict[str, List[Any]]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, List[Any]]) -> "DecisionTree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=np.float64),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=np.int64),
        )


def _gini_split(
    x: np.ndarray, y: np.ndarray, num_classes: int
) -> Optional[Tuple[float, float]]:
    """Best threshold on one feature as ``(weighted gini, threshold)``, or None if constant."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None

    n = x.shape[0]
    left_counts = np.cumsum(np.eye(num_classes)[y[order]], axis=0)[:-1]
    right_counts = left_counts[-1] + np.eye(num_classes)[y[order[-1]]] - left_counts
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    gini_left = 1.0 - ((left_counts / n_left[:, None]) ** 2).sum(axis=1)
    gini_right = 1.0 - ((right_counts / n_right[:, None]) ** 2).sum(axis=1)
    weighted = np.where(valid, (n_left * gini_left + n_right * gini_right) / n, np.inf)
    position = int(np.argmin(weighted))
    return float(weighted[position]), float((xs[position] + xs[position + 1]) / 2.0)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    num_classes: int,
    rng: np.random.Generator,
    max_features: Optional[int] = None,
    max_depth: int = 0,
) -> DecisionTree:
    """Grow a CART tree on Gini impurity.

    Each node draws `max_features` candidate features at random and splits on the best
    threshold among them; when all of them are constant at the node the search goes on
    through the remaining features. Nodes become leaves when pure, constant, or at
    `max_depth` (0 means unlimited). Leaves predict their majority class.
    """
    n_features = X.shape[1]
    per_node = n_features if max_features is None else max(1, min(max_features, n_features))
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[int] = []

    def new_node(idx: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(int(np.argmax(np.bincount(y[idx], minlength=num_classes))))
        return len(feature) - 1

    stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        labels = y[idx]
        if idx.size < 2 or (labels == labels[0]).all() or (max_depth and depth >= max_depth):
            continue

        best: Optional[Tuple[float, float, int]] = None
        for rank, candidate in enumerate(rng.permutation(n_features)):
            if rank >= per_node and best is not None:
                break
            found = _gini_split(X[idx, candidate], labels, num_classes)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], found[1], int(candidate))

        if best is None:
            continue

        _, cut, split_feature = best
        goes_left = X[idx, split_feature] <= cut
        feature[node] = split_feature
        threshold[node] = cut
        left_idx, right_idx = idx[goes_left], idx[~goes_left]
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        stack.append((right[node], right_idx, depth + 1))
        stack.append((left[node], left_idx, depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.int64),
    )


class RandomForest(BaselineModel):
    """Bagged CART trees with ``sqrt(V)`` candidate features per node and majority vote.

    Tree ``i`` draws its bootstrap sample and feature candidates from the ``i``-th child
    of the model seed, so results do not depend on ``rf_jobs``.
    """

    kind = BaselineKind.RANDOM_FOREST

    trees: List[DecisionTree]

    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        cfg = self.config
        n = X.shape[0]
        max_features = max(1, int(math.sqrt(self.n_features)))
        seeds = np.random.SeedSequence(self.seed).spawn(cfg.rf_trees)

        def grow(seed: np.random.SeedSequence) -> DecisionTree:
            rng = np.random.default_rng(seed)
            rows = rng.integers(0, n, size=n)
            return grow_tree(
                X[rows], y[rows], self.num_classes, rng, max_features, cfg.rf_max_depth
            )

        if cfg.rf_jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.rf_jobs) as executor:
                self.trees = list(executor.map(grow, seeds))
        else:
            self.trees = [grow(seed) for seed in seeds]

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Vote counts ``[M, C]``."""
        counts = np.zeros((X.shape[0], self.num_classes), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            np.add.at(counts, (rows, tree.predict(X)), 1)
        return counts

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.votes(X), axis=1)

    def _state(self) -> Dict[str, Any]:
        return {"trees": [tree.to_dict() for tree in self.trees]}

    def _load_state(self, state: Mapping[str, Any]) -> None:
        self.trees = [DecisionTree.from_dict(tree) for tree in state["trees"]]


class LogisticRegression(_LinearModel):
    """Multinomial logistic regression.

    Minimizes mean cross-entropy plus ``lr_l2 / 2 * ||W||^2`` by full-batch gradient
    descent from zero weights, until the largest gradient entry drops below ``lr_tol``
    or ``lr_max_iter`` steps have run. With ``lr_max_iter == 0`` the weights stay zero
    and every prediction is class 0.
    """

    kind = BaselineKind.LOGISTIC_REGRESSION

    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        cfg = self.config
        n = X.shape[0]
        onehot = np.eye(self.num_classes)[y]
        self.coef = np.zeros((self.num_classes, self.n_features))
        self.intercept = np.zeros(self.num_classes)
        self.converged = False
        self.n_iter = 0

        for iteration in range(1, cfg.lr_max_iter + 1):
            error = _softmax(self.decision_function(X)) - onehot
            grad_coef = error.T @ X / n + cfg.lr_l2 * self.coef
            grad_intercept = error.mean(axis=0)
            largest = max(np.abs(grad_coef).max(initial=0.0), np.abs(grad_intercept).max())
            if largest < cfg.lr_tol:
                self.converged = True
                break
            self.coef -= cfg.lr_learning_rate * grad_coef
            self.intercept -= cfg.lr_learning_rate * grad_intercept
            self.n_iter = iteration

        if not self.converged and cfg.lr_max_iter > 0:
            _warn_not_converged(self, cfg.lr_max_iter)

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.decision_function(X))


_REGISTRY: Dict[BaselineKind, Type[BaselineModel]] = {
    BaselineKind.NAIVE_BAYES: NaiveBayes,
    BaselineKind.LINEAR_SVM: LinearSvm,
    BaselineKind.RANDOM_FOREST: RandomForest,
    BaselineKind.LOGISTIC_REGRESSION: LogisticRegression,
}


def create(
    kind: BaselineKind, config: Optional[BaselineConfig] = None, seed: int = 0
) -> BaselineModel:
    """An unfitted learner of `kind`."""
    return _REGISTRY[BaselineKind(kind)](config, seed)


def fit(
    kind: BaselineKind,
    X: Any,
    y: Any,
    config: Optional[BaselineConfig] = None,
    seed: int = 0,
    num_classes: Optional[int] = None,
) -> BaselineModel:
    """Create and fit a learner of `kind`. See `BaselineModel.fit`."""
    return create(kind, config, seed).fit(X, y, num_classes)


def predict(model: BaselineModel, X: Any) -> np.ndarray:
    return model.predict(X)


def predict_proba(model: BaselineModel, X: Any) -> np.ndarray:
    """Probability rows of a Naive Bayes or logistic regression model.

    Raises
    ------
    BaselineError
        The model's kind does not define probabilities.
    """
    return model.predict_proba(X)


def save_baseline(model: BaselineModel, path: PathLike) -> Path:
    return write_json(path, model.to_dict())


def baseline_from_dict(document: Mapping[str, Any]) -> BaselineModel:
    """Rebuild a fitted model from `BaselineModel.to_dict` output.

    Raises
    ------
    BaselineError
        The document is not a baseline checkpoint of a supported version, or is malformed.
    """
    if document.get("format") != BASELINE_FORMAT or document.get("version") != BASELINE_VERSION:
        msg = f"not a version {BASELINE_VERSION} baseline checkpoint"
        raise BaselineError(msg)

    try:
        model = create(
            BaselineKind(document["kind"]),
            BaselineConfig(**document["config"]),
            int(document["seed"]),
        )
        model.n_features = int(document["n_features"])
        model.num_classes = int(document["num_classes"])
        model._load_state(document["state"])
    except (KeyError, TypeError, ValueError) as e:
        msg = f"malformed baseline checkpoint: {e}"
        raise BaselineError(msg) from e

    model._fitted = True
    return model


def load_baseline(path: PathLike) -> BaselineModel:
    """Read a model written by `save_baseline`. See `baseline_from_dict`."""
    return baseline_from_dict(read_json(path))
