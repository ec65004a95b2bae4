"""# Network

Build, train and apply the convolutional-recurrent-attention classifier.

The layer order is fixed::

    embedding -> conv1d(32, 2) -> conv1d(64, 2) -> lstm -> attention
    -> global max pool -> dense(256, relu) -> dropout -> dense(C) + softmax

The aspect and polarity tasks train separate models sharing this architecture. The
polarity model reads the comment followed by a token naming its gold aspect.
"""

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    AspectlyError,
    BadConfig,
    CheckpointError,
    EmptySpace,
    LabelOutOfRange,
    ModelError,
    NonFiniteLoss,
    NonFiniteValue,
    ShapeMismatch,
)
from .tensor import (
    OptimState,
    Tape,
    Tensor,
    adam_step,
    attention_forward,
    backward,
    conv1d,
    dense,
    dropout,
    embedding_lookup,
    global_max_pool,
    lstm_forward,
    parameters_from_dict,
    parameters_to_dict,
    sgd_step,
    softmax_cross_entropy,
)
from .types import (
    AspectLabel,
    EncodedBatch,
    EpochRow,
    ModelConfig,
    Task,
    TrainRecord,
    Trial,
)
from .utils import read_json, write_csv, write_json

__all__ = (
    "DcnnModel",
    "build",
    "parameter_shapes",
    "expected_parameter_count",
    "train",
    "predict",
    "grid_search",
    "aspect_token",
    "polarity_tokens",
    "write_train_record",
    "write_trials",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "TRAIN_RECORD_COLUMNS",
    "TRIAL_COLUMNS",
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TRAIN_RECORD_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")
TRIAL_COLUMNS = ("rank", "trial", "params", "val_accuracy", "val_loss", "best_epoch", "error")

EMBEDDING_INIT_RANGE = 0.05
ASPECT_CLASSES = len(AspectLabel)
EVAL_BATCH_SIZE = 256


def parameter_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Shape of every parameter, in initialization order."""
    hidden = config.lstm_hidden
    return {
        "embedding": (config.vocab_size, config.embed_dim),
        "conv1.kernel": (config.conv1_kernel, config.embed_dim, config.conv1_filters),
        "conv1.bias": (config.conv1_filters,),
        "conv2.kernel": (config.conv2_kernel, config.conv1_filters, config.conv2_filters),
        "conv2.bias": (config.conv2_filters,),
        "lstm.kernel": (config.conv2_filters, 4 * hidden),
        "lstm.recurrent_kernel": (hidden, 4 * hidden),
        "lstm.bias": (4 * hidden,),
        "attention.w": (hidden,),
        "dense.kernel": (hidden, config.dense_units),
        "dense.bias": (config.dense_units,),
        "output.kernel": (config.dense_units, config.num_classes),
        "output.bias": (config.num_classes,),
    }


def expected_parameter_count(config: ModelConfig) -> int:
    """Closed-form parameter count, summed layer by layer."""
    v, d, h, c = config.vocab_size, config.embed_dim, config.lstm_hidden, config.num_classes
    f1, f2, u = config.conv1_filters, config.conv2_filters, config.dense_units
    embedding = v * d
    conv1 = config.conv1_kernel * d * f1 + f1
    conv2 = config.conv2_kernel * f1 * f2 + f2
    lstm = f2 * 4 * h + h * 4 * h + 4 * h
    attention = h
    hidden_dense = h * u + u
    output = u * c + c
    return embedding + conv1 + conv2 + lstm + attention + hidden_dense + output


class DcnnModel:
    """The network: a configuration and its named parameters.

    Parameters
    ----------
    config: ModelConfig
        Validated configuration.
    parameters: Dict[str, Tensor]
        One tensor per name of `parameter_shapes`, shaped accordingly.
    """

    def __init__(self, config: ModelConfig, parameters: Dict[str, Tensor]) -> None:
        shapes = parameter_shapes(config)
        if set(parameters) != set(shapes):
            msg = "parameter names do not match the configuration"
            raise BadConfig(msg)
        for name, shape in shapes.items():
            if parameters[name].shape != shape:
                msg = f"{name} has shape {parameters[name].shape}, expected {shape}"
                raise BadConfig(msg)

        self.config = config
        self.parameters = {name: parameters[name] for name in shapes}

    @property
    def parameter_count(self) -> int:
        return sum(tensor.size for tensor in self.parameters.values())

    def layer_shapes(self, batch_size: int = 1) -> List[Tuple[str, Tuple[int, ...]]]:
        """Output shape of each of the nine layers for a batch of `batch_size`."""
        cfg = self.config
        b, steps = batch_size, cfg.time_steps
        return [
            ("embedding", (b, cfg.seq_len, cfg.embed_dim)),
            ("conv1", (b, cfg.seq_len - cfg.conv1_kernel + 1, cfg.conv1_filters)),
            ("conv2", (b, steps, cfg.conv2_filters)),
            ("lstm", (b, steps, cfg.lstm_hidden)),
            ("attention", (b, steps, cfg.lstm_hidden)),
            ("max_pool", (b, cfg.lstm_hidden)),
            ("dense", (b, cfg.dense_units)),
            ("dropout", (b, cfg.dense_units)),
            ("output", (b, cfg.num_classes)),
        ]

    def forward(
        self,
        ids: np.ndarray,
        lengths: np.ndarray,
        *,
        training: bool = False,
        seed: int = 0,
        tape: Optional[Tape] = None,
    ) -> Tensor:
        """Compute logits ``[B, C]`` for id sequences ``[B, L]``.

        Attention covers the time steps the valid convolutions computed from real tokens
        only: ``true_length - (conv1_kernel + conv2_kernel - 2)`` of each row, at least one.
        Ids past ``true_length`` cannot change the logits of rows long enough to leave
        such a step.

        Raises
        ------
        ShapeMismatch
            `ids` is not ``[B, seq_len]`` or `lengths` is not ``[B]``.
        """
        cfg, p = self.config, self.parameters
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 2 or ids.shape[1] != cfg.seq_len:
            msg = f"expected ids of shape [B, {cfg.seq_len}], got {ids.shape}"
            raise ShapeMismatch(msg)

        lengths = np.asarray(lengths, dtype=np.int64)
        if lengths.shape != (ids.shape[0],):
            msg = f"expected {ids.shape[0]} lengths, got shape {lengths.shape}"
            raise ShapeMismatch(msg)

        x = embedding_lookup(ids, p["embedding"], tape)
        x = conv1d(x, p["conv1.kernel"], p["conv1.bias"], tape)
        x = conv1d(x, p["conv2.kernel"], p["conv2.bias"], tape)
        x = lstm_forward(
            x, p["lstm.kernel"], p["lstm.recurrent_kernel"], p["lstm.bias"], tape
        )
        reach = cfg.conv1_kernel + cfg.conv2_kernel - 2
        steps = np.clip(lengths - reach, 1, cfg.time_steps)
        x, _ = attention_forward(x, p["attention.w"], steps, tape)
        x = global_max_pool(x, tape)
        x = dense(x, p["dense.kernel"], p["dense.bias"], "relu", tape)
        x = dropout(x, cfg.dropout_rate, training, seed, tape)
        return dense(x, p["output.kernel"], p["output.bias"], "none", tape)

    def snapshot(self) -> Dict[str, np.ndarray]:
        """A copy of every parameter's values."""
        return {name: tensor.data.copy() for name, tensor in self.parameters.items()}

    def restore(self, values: Mapping[str, np.ndarray]) -> None:
        for name, tensor in self.parameters.items():
            tensor.data = values[name].copy()

    def zero_grad(self) -> None:
        for tensor in self.parameters.values():
            tensor.zero_grad()


def _glorot(
    rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int
) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def build(config: ModelConfig) -> DcnnModel:
    """Create a model with freshly initialized parameters.

    Embeddings are drawn from ``uniform(-0.05, 0.05)``, weight matrices are
    Glorot-uniform and biases start at zero. Equal seeds give equal parameters.

    Raises
    ------
    BadConfig
        `config` violates an invariant.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    params: Dict[str, Tensor] = {}
    for name, shape in parameter_shapes(config).items():
        if name == "embedding":
            values = rng.uniform(-EMBEDDING_INIT_RANGE, EMBEDDING_INIT_RANGE, size=shape)
        elif name.endswith("bias"):
            values = np.zeros(shape)
        elif name.startswith("conv"):
            width, c_in, c_out = shape
            values = _glorot(rng, shape, width * c_in, width * c_out)
        elif name == "attention.w":
            values = _glorot(rng, shape, shape[0], 1)
        else:
            values = _glorot(rng, shape, shape[0], shape[1])
        params[name] = Tensor(values, requires_grad=True, name=name)

    model = DcnnModel(config, params)
    logger.debug("built model with %d parameters", model.parameter_count)
    return model


def _check_labels(batch: EncodedBatch, num_classes: int, what: str) -> np.ndarray:
    if batch.labels is None:
        msg = f"{what} batch has no labels"
        raise ModelError(msg)
    labels = batch.labels
    if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
        msg = f"{what} labels must lie in [0, {num_classes})"
        raise LabelOutOfRange(msg)
    return labels


def _evaluate(model: DcnnModel, batch: EncodedBatch) -> Tuple[float, float]:
    """Mean loss and accuracy with dropout off."""
    total_loss = 0.0
    correct = 0
    n = len(batch)
    for lo in range(0, n, EVAL_BATCH_SIZE):
        part = batch.take(np.arange(lo, min(lo + EVAL_BATCH_SIZE, n)))
        logits = model.forward(part.ids, part.lengths)
        loss, probs = softmax_cross_entropy(logits, part.labels)  # type: ignore
        total_loss += loss.item() * len(part)
        correct += int((np.argmax(probs.data, axis=1) == part.labels).sum())
    return total_loss / n, correct / n


def _dropout_seed(seed: int, epoch: int, step: int) -> int:
    return int(np.random.SeedSequence([seed, epoch, step]).generate_state(1)[0])


def train(
    model: DcnnModel,
    train_set: EncodedBatch,
    val_set: Optional[EncodedBatch],
    task: Task,
) -> TrainRecord:
    """Fit `model` with mini-batch gradient descent on softmax cross-entropy.

    Batches are reshuffled every epoch from ``(seed, epoch)``. After each epoch the loss
    and accuracy of both partitions are measured with dropout off. Training stops once
    the validation loss has not improved for ``patience`` epochs, and the parameters of
    the best epoch are restored. Without a validation set the training partition stands
    in for it.

    Parameters
    ----------
    model: DcnnModel
        Model to train in place.
    train_set: EncodedBatch
        Labeled training sequences.
    val_set: Optional[EncodedBatch]
        Labeled validation sequences.
    task: Task
        The task the labels belong to.

    Returns
    -------
    TrainRecord
        One row per completed epoch.

    Raises
    ------
    BadConfig
        An aspect model does not have four outputs.
    LabelOutOfRange
        A label is not below ``num_classes``.
    NonFiniteLoss
        A loss or parameter became NaN or infinite; carries the epoch.
    """
    cfg = model.config
    if task is Task.ASPECT and cfg.num_classes != ASPECT_CLASSES:
        msg = f"the aspect task needs {ASPECT_CLASSES} classes, got {cfg.num_classes}"
        raise BadConfig(msg)
    if len(train_set) == 0:
        msg = "training set is empty"
        raise ModelError(msg)

    _check_labels(train_set, cfg.num_classes, "training")
    if val_set is not None and len(val_set):
        _check_labels(val_set, cfg.num_classes, "validation")
    else:
        val_set = train_set

    state = OptimState(learning_rate=cfg.learning_rate)
    step_fn = adam_step if cfg.optimizer == "adam" else sgd_step
    record = TrainRecord()
    best_loss = math.inf
    best_values = model.snapshot()
    waited = 0
    n = len(train_set)

    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        try:
            for step, lo in enumerate(range(0, n, cfg.batch_size)):
                batch = train_set.take(order[lo : lo + cfg.batch_size])
                tape = Tape()
                logits = model.forward(
                    batch.ids,
                    batch.lengths,
                    training=True,
                    seed=_dropout_seed(cfg.seed, epoch, step),
                    tape=tape,
                )
                loss, _ = softmax_cross_entropy(logits, batch.labels, tape)  # type: ignore
                backward(tape, loss)
                grads = {name: t.grad for name, t in model.parameters.items()}
                step_fn(model.parameters, grads, state)  # type: ignore
                model.zero_grad()

            train_loss, train_acc = _evaluate(model, train_set)
            val_loss, val_acc = _evaluate(model, val_set)
        except NonFiniteValue as e:
            raise NonFiniteLoss(epoch, str(e)) from e

        row = EpochRow(
            epoch, train_loss, train_acc, val_loss, val_acc, time.perf_counter() - started
        )
        record.rows.append(row)
        logger.info(
            "epoch %d: loss %.4f acc %.4f val_loss %.4f val_acc %.4f",
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        )

        if val_loss < best_loss:
            best_loss = val_loss
            best_values = model.snapshot()
            record.best_epoch = epoch
            waited = 0
            continue

        waited += 1
        if waited >= cfg.patience and epoch < cfg.epochs:
            record.stopped_early = True
            logger.info("early stop after epoch %d, best epoch %d", epoch, record.best_epoch)
            break

    model.restore(best_values)
    return record


def predict(model: DcnnModel, batch: EncodedBatch) -> Tuple[np.ndarray, np.ndarray]:
    """Classify sequences with dropout off.

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        Class ids ``[N]`` and probability rows ``[N, C]``. Equal probabilities resolve to
        the lower class id.

    Raises
    ------
    ShapeMismatch
        The sequences are not ``seq_len`` long.
    """
    n = len(batch)
    probs = np.zeros((n, model.config.num_classes))
    for lo in range(0, n, EVAL_BATCH_SIZE):
        rows = slice(lo, min(lo + EVAL_BATCH_SIZE, n))
        logits = model.forward(batch.ids[rows], batch.lengths[rows]).data
        shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs[rows] = shifted / shifted.sum(axis=1, keepdims=True)
    return np.argmax(probs, axis=1).astype(np.int64), probs


def aspect_token(aspect: AspectLabel) -> str:
    """Token carrying the gold aspect into the polarity model, e.g. ``<aspect:person>``."""
    return f"<aspect:{aspect.name.lower()}>"


def polarity_tokens(tokens: Sequence[str], aspect: AspectLabel, seq_len: int) -> List[str]:
    """Comment tokens followed by the aspect token.

    The content is cut to ``seq_len - 1`` tokens so the aspect token is never truncated.
    """
    return [*tokens[: max(seq_len - 1, 0)], aspect_token(aspect)]


def _run_trial(
    index: int,
    params: Tuple[Tuple[str, Any], ...],
    base: ModelConfig,
    train_set: EncodedBatch,
    val_set: Optional[EncodedBatch],
    task: Task,
) -> Trial:
    try:
        config = base.with_overrides(dict(params))
        record = train(build(config), train_set, val_set, task)
    except AspectlyError as e:
        logger.warning("trial %d (%s) failed: %s", index, dict(params), e)
        return Trial(index, params, math.nan, math.nan, 0, str(e))

    best = record.best
    if best is None:
        return Trial(index, params, math.nan, math.nan, 0, "no epoch completed")
    logger.info(
        "trial %d done: val_acc %.4f val_loss %.4f", index, best.val_accuracy, best.val_loss
    )
    return Trial(index, params, best.val_accuracy, best.val_loss, record.best_epoch)


def _trial_rank_key(trial: Trial) -> Tuple[Any, ...]:
    if not trial.ok:
        return (1, 0.0, 0.0, trial.config_key)
    return (0, -trial.val_accuracy, trial.val_loss, trial.config_key)


def grid_search(
    space: Mapping[str, Sequence[Any]],
    base: ModelConfig,
    train_set: EncodedBatch,
    val_set: Optional[EncodedBatch],
    task: Task,
    workers: int = 1,
) -> List[Trial]:
    """Train one model per point of the Cartesian product of `space`.

    Each trial owns its model and seed, so trials run concurrently on up to `workers`
    threads without affecting the results.

    Parameters
    ----------
    space: Mapping[str, Sequence[Any]]
        Candidate values per `ModelConfig` field.
    base: ModelConfig
        Values of every field the space does not vary.
    train_set, val_set: EncodedBatch
        Training and ranking partitions.
    task: Task
        Task of the labels.
    workers: int
        Thread count.

    Returns
    -------
    List[Trial]
        Every trial, ranked by validation accuracy, then lower validation loss, then
        configuration text. Failed trials come last.

    Raises
    ------
    EmptySpace
        `space` has no axis or an axis without values.
    """
    if not space:
        msg = "search space has no axis"
        raise EmptySpace(msg)

    names = sorted(space)
    for name in names:
        if len(space[name]) == 0:
            msg = f"search axis {name!r} has no values"
            raise EmptySpace(msg)

    points = [
        tuple(zip(names, values)) for values in itertools.product(*(space[n] for n in names))
    ]
    logger.info("grid search over %d configurations with %d workers", len(points), workers)

    if workers <= 1:
        trials = [
            _run_trial(i, params, base, train_set, val_set, task)
            for i, params in enumerate(points)
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_run_trial, i, params, base, train_set, val_set, task)
                for i, params in enumerate(points)
            ]
            trials = [future.result() for future in futures]

    return sorted(trials, key=_trial_rank_key)


def write_train_record(
    record: TrainRecord, path: PathLike, meta: Optional[Mapping[str, Any]] = None
) -> Path:
    """Write the learning curve as ``epoch,train_loss,train_acc,val_loss,val_acc``."""
    return write_csv(path, TRAIN_RECORD_COLUMNS, record.metric_values(), meta=meta)


def write_trials(
    trials: Sequence[Trial], path: PathLike, meta: Optional[Mapping[str, Any]] = None
) -> Path:
    """Write a ranked trial table, one row per trial."""
    rows = [
        (
            rank,
            trial.index,
            trial.config_key,
            trial.val_accuracy,
            trial.val_loss,
            trial.best_epoch,
            trial.error,
        )
        for rank, trial in enumerate(trials, start=1)
    ]
    return write_csv(path, TRIAL_COLUMNS, rows, meta=meta)


def model_to_dict(
    model: DcnnModel, metadata: Optional[Mapping[str, Any]] = None
) -> Dict[str, Any]:
    """Parameter checkpoint document with the configuration echoed under ``metadata.config``."""
    return parameters_to_dict(
        model.parameters, {**(metadata or {}), "config": model.config.to_dict()}
    )


def model_from_dict(document: Mapping[str, Any]) -> Tuple[DcnnModel, Dict[str, Any]]:
    """Rebuild a model from `model_to_dict` output.

    Returns
    -------
    Tuple[DcnnModel, Dict[str, Any]]
        The model and the checkpoint metadata.

    Raises
    ------
    CheckpointError
        The document is not a parameter checkpoint, has no valid configuration, or its
        shapes disagree with its configuration.
    """
    try:
        config = ModelConfig(**document["metadata"]["config"])
        config.validate()
    except (KeyError, TypeError, BadConfig) as e:
        msg = f"checkpoint has no usable model configuration: {e}"
        raise CheckpointError(msg) from e

    params, metadata = parameters_from_dict(document, parameter_shapes(config))
    return DcnnModel(config, params), metadata


def save_model(
    model: DcnnModel, path: PathLike, metadata: Optional[Mapping[str, Any]] = None
) -> Path:
    return write_json(path, model_to_dict(model, metadata))


def load_model(path: PathLike) -> Tuple[DcnnModel, Dict[str, Any]]:
    """Read a model written by `save_model`. See `model_from_dict`."""
    try:
        document = read_json(path)
    except ValueError as e:
        msg = f"{path} is not valid JSON: {e}"
        raise CheckpointError(msg) from e
    return model_from_dict(document)
