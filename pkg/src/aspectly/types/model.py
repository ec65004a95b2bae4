"""Model configuration and training history types"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Tuple, TypeVar

from ..errors import BadConfig

__all__ = (
    "ModelConfig",
    "BaselineConfig",
    "EpochRow",
    "TrainRecord",
    "Trial",
    "OPTIMIZERS",
)

OPTIMIZERS = ("adam", "sgd")

_C = TypeVar("_C")


def _with_overrides(instance: _C, overrides: Mapping[str, Any], what: str) -> _C:
    names = {f.name for f in dataclasses.fields(instance)}  # type: ignore
    changes: Dict[str, Any] = {}
    for key, value in overrides.items():
        if key not in names:
            msg = f"unknown {what} setting {key!r}"
            raise BadConfig(msg)

        current = getattr(instance, key)
        try:
            changes[key] = type(current)(value)
        except (TypeError, ValueError) as e:
            msg = f"cannot use {value!r} for {key}"
            raise BadConfig(msg) from e

    return dataclasses.replace(instance, **changes)  # type: ignore


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of the convolutional-recurrent-attention network.

    The convolution and dense sizes are those of the reference architecture. The
    embedding, LSTM and dropout settings are plain defaults.

    Attributes
    ----------
    vocab_size: int
        Rows of the embedding table.
    seq_len: int
        Input length ``L``.
    embed_dim: int
        Embedding width ``D``.
    conv1_filters, conv1_kernel: int
        First convolution, 32 filters of width 2.
    conv2_filters, conv2_kernel: int
        Second convolution, 64 filters of width 2.
    lstm_hidden: int
        LSTM state size ``H``.
    dense_units: int
        Hidden dense layer width, 256.
    dropout_rate: float
        Drop probability after the hidden dense layer.
    num_classes: int
        Output width ``C``.
    seed: int
        Seeds initialization, shuffling and dropout.
    epochs, batch_size, patience: int
        Training loop settings; `patience` counts epochs without a validation loss improvement.
    learning_rate: float
        Optimizer step size.
    optimizer: str
        ``"adam"`` or ``"sgd"``.
    """

    vocab_size: int
    seq_len: int = 32
    embed_dim: int = 64
    conv1_filters: int = 32
    conv1_kernel: int = 2
    conv2_filters: int = 64
    conv2_kernel: int = 2
    lstm_hidden: int = 64
    dense_units: int = 256
    dropout_rate: float = 0.5
    num_classes: int = 4
    seed: int = 0
    epochs: int = 50
    batch_size: int = 32
    patience: int = 5
    learning_rate: float = 1e-3
    optimizer: str = "adam"

    def validate(self) -> None:
        """Check every invariant.

        Raises
        ------
        BadConfig
            On the first violated invariant.
        """
        positive = (
            "vocab_size",
            "seq_len",
            "embed_dim",
            "conv1_filters",
            "conv1_kernel",
            "conv2_filters",
            "conv2_kernel",
            "lstm_hidden",
            "dense_units",
            "epochs",
            "batch_size",
        )
        for name in positive:
            if getattr(self, name) < 1:
                msg = f"{name} must be at least 1, got {getattr(self, name)}"
                raise BadConfig(msg)

        if self.vocab_size < 2:
            msg = "vocab_size must cover the reserved PAD and UNK ids"
            raise BadConfig(msg)

        if self.num_classes < 2:
            msg = f"num_classes must be at least 2, got {self.num_classes}"
            raise BadConfig(msg)

        if self.seq_len <= self.conv1_kernel + self.conv2_kernel - 2:
            msg = (
                f"seq_len {self.seq_len} leaves no time step after convolutions of width "
                f"{self.conv1_kernel} and {self.conv2_kernel}"
            )
            raise BadConfig(msg)

        if not 0.0 <= self.dropout_rate < 1.0:
            msg = f"dropout_rate must be in [0, 1), got {self.dropout_rate}"
            raise BadConfig(msg)

        if self.patience < 0 or self.seed < 0:
            msg = "patience and seed must be non-negative"
            raise BadConfig(msg)

        if self.learning_rate <= 0:
            msg = f"learning_rate must be positive, got {self.learning_rate}"
            raise BadConfig(msg)

        if self.optimizer not in OPTIMIZERS:
            msg = f"optimizer must be one of {', '.join(OPTIMIZERS)}, got {self.optimizer!r}"
            raise BadConfig(msg)

    @property
    def time_steps(self) -> int:
        """Sequence length left after both valid convolutions."""
        return self.seq_len - self.conv1_kernel - self.conv2_kernel + 2

    def with_overrides(self, overrides: Mapping[str, Any]) -> ModelConfig:
        """Return a copy with `overrides` applied.

        String values are cast to the type of the field's current value, so
        values read from key=value files can be passed unchanged.

        Raises
        ------
        BadConfig
            An override names an unknown field or cannot be cast.
        """
        return _with_overrides(self, overrides, "model")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class BaselineConfig:
    """Hyperparameters of the classical learners.

    The defaults are conventional values.

    Attributes
    ----------
    nb_alpha: float
        Additive smoothing of Naive Bayes. Zero is only valid when every class has a
        positive count for every feature.
    svm_c: float
        Weight of the hinge loss against the L2 penalty.
    svm_learning_rate, svm_max_iter, svm_tol: float, int, float
        Full-batch subgradient descent settings; `svm_tol` bounds the objective change.
    rf_trees: int
        Number of trees in the forest.
    rf_max_depth: int
        Depth limit per tree, 0 for unlimited.
    rf_jobs: int
        Threads used to grow trees.
    lr_l2: float
        L2 penalty of logistic regression.
    lr_learning_rate, lr_max_iter, lr_tol: float, int, float
        Full-batch gradient descent settings; `lr_tol` bounds the largest gradient entry.
    """

    nb_alpha: float = 1.0
    svm_c: float = 1.0
    svm_learning_rate: float = 0.5
    svm_max_iter: int = 1000
    svm_tol: float = 1e-6
    rf_trees: int = 100
    rf_max_depth: int = 0
    rf_jobs: int = 1
    lr_l2: float = 1e-4
    lr_learning_rate: float = 1.0
    lr_max_iter: int = 1000
    lr_tol: float = 1e-6

    def validate(self) -> None:
        """Raises `BadConfig` on the first invalid setting."""
        if self.nb_alpha < 0 or self.svm_c <= 0 or self.lr_l2 < 0:
            msg = "nb_alpha and lr_l2 must be non-negative and svm_c positive"
            raise BadConfig(msg)
        if self.svm_learning_rate <= 0 or self.lr_learning_rate <= 0:
            msg = "learning rates must be positive"
            raise BadConfig(msg)
        if min(self.svm_max_iter, self.lr_max_iter, self.rf_max_depth) < 0:
            msg = "iteration caps and rf_max_depth must be non-negative"
            raise BadConfig(msg)
        if self.rf_trees < 1 or self.rf_jobs < 1:
            msg = "rf_trees and rf_jobs must be at least 1"
            raise BadConfig(msg)

    def with_overrides(self, overrides: Mapping[str, Any]) -> BaselineConfig:
        """Return a copy with `overrides` applied, cast like `ModelConfig.with_overrides`."""
        return _with_overrides(self, overrides, "baseline")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


class EpochRow(NamedTuple):
    """Metrics recorded at the end of one epoch.

    Attributes
    ----------
    epoch: int
        1-based epoch number.
    train_loss, train_accuracy: float
        Evaluated on the training partition with dropout off.
    val_loss, val_accuracy: float
        Evaluated on the validation partition.
    seconds: float
        Wall-clock time of the epoch. Not part of any deterministic artifact.
    """

    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    seconds: float


@dataclass
class TrainRecord:
    """Learning curve of one training run.

    Attributes
    ----------
    rows: List[EpochRow]
        One row per completed epoch, epochs increasing from 1.
    best_epoch: int
        Epoch with the lowest validation loss; its parameters are the ones kept.
    stopped_early: bool
        Whether patience ran out before the epoch budget.
    """

    rows: List[EpochRow] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def best(self) -> Optional[EpochRow]:
        """The row of `best_epoch`, if any epoch ran."""
        for row in self.rows:
            if row.epoch == self.best_epoch:
                return row
        return None

    @property
    def final(self) -> Optional[EpochRow]:
        return self.rows[-1] if self.rows else None

    def metric_values(self) -> List[Tuple[int, float, float, float, float]]:
        """Every row without its timing, for comparisons across runs."""
        return [row[:5] for row in self.rows]  # type: ignore


@dataclass(frozen=True)
class Trial:
    """One point of a hyperparameter grid.

    Attributes
    ----------
    index: int
        Position in Cartesian enumeration order.
    params: Tuple[Tuple[str, Any], ...]
        The overridden settings, sorted by name.
    val_accuracy, val_loss: float
        Metrics of the best epoch. NaN for failed trials.
    best_epoch: int
        Best epoch of the run, 0 for failed trials.
    error: str
        Failure message, empty on success.
    """

    index: int
    params: Tuple[Tuple[str, Any], ...]
    val_accuracy: float
    val_loss: float
    best_epoch: int
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error

    @property
    def config_key(self) -> str:
        """Lexicographic tie-break key."""
        return ",".join(f"{name}={value!r}" for name, value in self.params)
