import dataclasses
import math

import numpy as np
import pytest

from aspectly.corpus import split
from aspectly.errors import (
    BadConfig,
    CheckpointError,
    EmptySpace,
    LabelOutOfRange,
    ModelError,
    NonFiniteLoss,
    ShapeMismatch,
)
from aspectly.model import (
    TRAIN_RECORD_COLUMNS,
    build,
    expected_parameter_count,
    grid_search,
    load_model,
    parameter_shapes,
    polarity_tokens,
    predict,
    save_model,
    train,
    write_train_record,
)
from aspectly.runner import task_documents
from aspectly.tensor import Tape, backward, softmax_cross_entropy
from aspectly.textprep import encode_batch, fit_vocab
from aspectly.types import AspectLabel, EncodedBatch, ModelConfig, Normalizer, SplitSpec, Task
from aspectly.utils import read_csv


def random_batch(config: ModelConfig, n: int, seed: int = 0) -> EncodedBatch:
    rng = np.random.default_rng(seed)
    ids = rng.integers(2, config.vocab_size, size=(n, config.seq_len))
    lengths = rng.integers(1, config.seq_len + 1, size=n)
    for row, length in enumerate(lengths):
        ids[row, length:] = 0
    labels = np.arange(n) % config.num_classes
    return EncodedBatch(ids, lengths, labels)


def encode_split(ds, task, seq_len):
    """Encode a dataset's 70/30 split the way the training command does."""
    train_ds, test_ds = split(ds, SplitSpec(0.7, seed=0))
    nz = Normalizer()
    train_docs = task_documents(train_ds, range(len(train_ds)), task, nz, seq_len)
    test_docs = task_documents(test_ds, range(len(test_ds)), task, nz, seq_len)
    vocab = fit_vocab(train_docs)
    return (
        encode_batch(train_docs, vocab, seq_len, train_ds.label_ids(task.field)),
        encode_batch(test_docs, vocab, seq_len, test_ds.label_ids(task.field)),
        vocab,
    )


def test_layer_shapes_and_parameter_count():
    config = ModelConfig(vocab_size=500)
    model = build(config)
    assert [shape for _, shape in model.layer_shapes(batch_size=2)] == [
        (2, 32, 64),
        (2, 31, 32),
        (2, 30, 64),
        (2, 30, 64),
        (2, 30, 64),
        (2, 64),
        (2, 256),
        (2, 256),
        (2, 4),
    ]
    assert model.parameter_count == expected_parameter_count(config)
    assert model.parameter_count == sum(int(np.prod(s)) for s in parameter_shapes(config).values())

    logits = model.forward(np.zeros((2, 32), dtype=np.int64), np.array([1, 32]))
    assert logits.shape == (2, 4)


def test_build_is_seeded(tiny_config):
    first, second = build(tiny_config), build(tiny_config)
    other = build(dataclasses.replace(tiny_config, seed=1))
    for name, tensor in first.parameters.items():
        np.testing.assert_array_equal(tensor.data, second.parameters[name].data)
    embedding = first.parameters["embedding"].data
    assert not np.array_equal(embedding, other.parameters["embedding"].data)


@pytest.mark.parametrize(
    "change",
    [
        {"vocab_size": 1},
        {"seq_len": 2},
        {"dropout_rate": 1.0},
        {"optimizer": "rmsprop"},
        {"num_classes": 1},
        {"learning_rate": 0.0},
    ],
)
def test_invalid_configs(tiny_config, change):
    with pytest.raises(BadConfig):
        build(dataclasses.replace(tiny_config, **change))


def test_model_gradients_match_finite_differences(tiny_config):
    model = build(tiny_config)
    batch = random_batch(tiny_config, 3, seed=4)

    def loss(tape=None):
        logits = model.forward(batch.ids, batch.lengths, tape=tape)
        return softmax_cross_entropy(logits, batch.labels, tape)[0]

    tape = Tape()
    backward(tape, loss(tape))

    eps = 1e-6
    for name, tensor in model.parameters.items():
        numeric = np.zeros_like(tensor.data)
        flat, out = tensor.data.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = loss().item()
            flat[i] = original - eps
            minus = loss().item()
            flat[i] = original
            out[i] = (plus - minus) / (2 * eps)
        error = np.linalg.norm(tensor.grad - numeric) / max(
            np.linalg.norm(tensor.grad) + np.linalg.norm(numeric), 1e-12
        )
        assert error < 1e-4, name


def test_forward_checks_shapes(tiny_config):
    model = build(tiny_config)
    with pytest.raises(ShapeMismatch):
        model.forward(np.zeros((2, 7), dtype=np.int64), np.array([1, 1]))
    with pytest.raises(ShapeMismatch):
        model.forward(np.zeros((2, 8), dtype=np.int64), np.array([1]))


def test_ids_past_the_true_length_do_not_change_logits(tiny_config):
    model = build(tiny_config)
    lengths = np.array([3, 5, 8])
    ids = np.random.default_rng(2).integers(2, tiny_config.vocab_size, size=(3, 8))
    padded = ids.copy()
    for row, length in enumerate(lengths):
        padded[row, length:] = 0

    np.testing.assert_allclose(
        model.forward(ids, lengths).data, model.forward(padded, lengths).data, atol=1e-12
    )


def test_train_memorizes_a_tiny_set(tiny_config):
    config = dataclasses.replace(
        tiny_config, learning_rate=0.01, batch_size=1, epochs=200, patience=200
    )
    model = build(config)
    batch = random_batch(config, 8, seed=2)
    record = train(model, batch, None, Task.ASPECT)

    predicted, _ = predict(model, batch)
    np.testing.assert_array_equal(predicted, batch.labels)
    assert record.best is not None
    assert record.best.train_accuracy == 1.0


def test_best_epoch_minimizes_validation_loss(tiny_config):
    config = dataclasses.replace(tiny_config, epochs=12, patience=3, learning_rate=0.01)
    model = build(config)
    record = train(model, random_batch(config, 16, 1), random_batch(config, 8, 9), Task.ASPECT)

    losses = {row.epoch: row.val_loss for row in record.rows}
    assert record.best_epoch == min(losses, key=losses.get)
    assert [row.epoch for row in record.rows] == list(range(1, len(record.rows) + 1))
    if record.stopped_early:
        assert len(record.rows) - record.best_epoch == config.patience


def test_early_stopping_on_flat_validation_loss(tiny_config):
    # steps this small leave every parameter unchanged
    config = dataclasses.replace(
        tiny_config, optimizer="sgd", learning_rate=1e-300, epochs=10, patience=1
    )
    record = train(build(config), random_batch(config, 8), None, Task.ASPECT)
    assert record.stopped_early
    assert len(record.rows) == 2
    assert record.best_epoch == 1


def test_train_restores_best_parameters(tiny_config):
    config = dataclasses.replace(tiny_config, epochs=8, patience=8, learning_rate=0.02)
    model = build(config)
    val = random_batch(config, 8, 5)
    record = train(model, random_batch(config, 16, 6), val, Task.ASPECT)

    logits = model.forward(val.ids, val.lengths)
    loss, _ = softmax_cross_entropy(logits, val.labels)
    assert loss.item() == pytest.approx(record.best.val_loss, rel=1e-12)


def test_training_is_deterministic(tiny_config):
    config = dataclasses.replace(tiny_config, epochs=3, dropout_rate=0.3)
    batch = random_batch(config, 12)
    first = train(build(config), batch, None, Task.ASPECT)
    second = train(build(config), batch, None, Task.ASPECT)
    assert first.metric_values() == second.metric_values()


def test_train_errors(tiny_config):
    with pytest.raises(BadConfig):
        train(build(dataclasses.replace(tiny_config, num_classes=3)), None, None, Task.ASPECT)

    empty = EncodedBatch(
        np.zeros((0, 8), dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, np.int64)
    )
    with pytest.raises(ModelError):
        train(build(tiny_config), empty, None, Task.ASPECT)

    batch = random_batch(tiny_config, 4)
    bad = EncodedBatch(batch.ids, batch.lengths, np.array([0, 1, 2, 7]))
    with pytest.raises(LabelOutOfRange):
        train(build(tiny_config), bad, None, Task.ASPECT)


def test_exploding_steps_raise_non_finite_loss(tiny_config):
    config = dataclasses.replace(tiny_config, optimizer="sgd", learning_rate=1e300, epochs=3)
    with pytest.raises(NonFiniteLoss) as info:
        train(build(config), random_batch(config, 8), None, Task.ASPECT)
    assert info.value.epoch >= 1


def test_predict_breaks_ties_toward_lower_class(tiny_config):
    model = build(tiny_config)
    model.parameters["output.kernel"].data[:] = 0.0
    labels, probs = predict(model, random_batch(tiny_config, 5))
    np.testing.assert_array_equal(labels, np.zeros(5))
    np.testing.assert_allclose(probs, 0.25)


def test_polarity_tokens_keep_the_aspect_token():
    tokens = ["fim", "ya", "yi", "kyau", "sosai"]
    assert polarity_tokens(tokens, AspectLabel.PERSON, 10) == [*tokens, "<aspect:person>"]
    assert polarity_tokens(tokens, AspectLabel.MOVIE, 3) == ["fim", "ya", "<aspect:movie>"]


def test_learns_separable_aspects(separable):
    config = ModelConfig(
        vocab_size=2,
        seq_len=16,
        embed_dim=32,
        lstm_hidden=32,
        dense_units=64,
        dropout_rate=0.0,
        learning_rate=0.005,
        epochs=40,
        patience=10,
    )
    train_set, test_set, vocab = encode_split(separable, Task.ASPECT, config.seq_len)
    model = build(dataclasses.replace(config, vocab_size=len(vocab)))
    train(model, train_set, None, Task.ASPECT)

    predicted, _ = predict(model, test_set)
    assert np.mean(predicted == test_set.labels) >= 0.95


def test_polarity_model_has_manifest_classes(small_separable, tiny_config):
    train_set, _, vocab = encode_split(small_separable, Task.POLARITY, tiny_config.seq_len)
    config = dataclasses.replace(tiny_config, vocab_size=len(vocab), num_classes=3, epochs=2)
    model = build(config)
    train(model, train_set, None, Task.POLARITY)
    _, probs = predict(model, train_set)
    assert probs.shape == (len(train_set), 3)


def test_grid_search_ranks_trials(tiny_config):
    base = dataclasses.replace(tiny_config, epochs=3)
    train_set, val_set = random_batch(base, 12, 1), random_batch(base, 8, 2)
    space = {"learning_rate": [0.01, 0.001], "embed_dim": [4, 8]}

    trials = grid_search(space, base, train_set, val_set, Task.ASPECT)
    assert len(trials) == 4
    assert sorted(t.index for t in trials) == [0, 1, 2, 3]
    keys = [(-t.val_accuracy, t.val_loss, t.config_key) for t in trials]
    assert keys == sorted(keys)
    assert dict(trials[0].params).keys() == {"embed_dim", "learning_rate"}

    threaded = grid_search(space, base, train_set, val_set, Task.ASPECT, workers=3)
    assert threaded == trials

    best = trials[0]
    refit = train(build(base.with_overrides(dict(best.params))), train_set, val_set, Task.ASPECT)
    assert abs(refit.best.val_accuracy - best.val_accuracy) < 1e-9


def test_grid_search_records_failed_trials(tiny_config):
    base = dataclasses.replace(tiny_config, epochs=2)
    batch = random_batch(base, 8)
    trials = grid_search({"dropout_rate": [0.0, 1.5]}, base, batch, None, Task.ASPECT)
    assert trials[0].ok
    assert not trials[1].ok
    assert math.isnan(trials[1].val_accuracy)
    assert "dropout_rate" in trials[1].error


def test_grid_search_rejects_empty_space(tiny_config):
    batch = random_batch(tiny_config, 4)
    with pytest.raises(EmptySpace):
        grid_search({}, tiny_config, batch, None, Task.ASPECT)
    with pytest.raises(EmptySpace):
        grid_search({"embed_dim": []}, tiny_config, batch, None, Task.ASPECT)


def test_model_survives_disk(tmp_path, tiny_config):
    model = build(tiny_config)
    batch = random_batch(tiny_config, 6)
    path = save_model(model, tmp_path / "model.json", {"task": "aspect"})
    loaded, metadata = load_model(path)
    assert metadata["task"] == "aspect"
    assert loaded.config == model.config
    np.testing.assert_array_equal(predict(loaded, batch)[1], predict(model, batch)[1])

    document = path.read_text().replace('"embed_dim": 8', '"embed_dim": 9')
    path.write_text(document)
    with pytest.raises(CheckpointError):
        load_model(path)


def test_write_train_record(tmp_path, tiny_config):
    config = dataclasses.replace(tiny_config, epochs=2)
    record = train(build(config), random_batch(config, 8), None, Task.ASPECT)
    path = write_train_record(record, tmp_path / "history.csv", {"seed": 0})
    rows = read_csv(path)
    assert tuple(rows[0]) == TRAIN_RECORD_COLUMNS
    assert [int(row[0]) for row in rows[1:]] == [1, 2]
    assert path.read_text().startswith("# seed=0\n")
