import pytest

from aspectly import runner
from aspectly.config import resolve_config
from aspectly.errors import BadLabel, ConfigError, StageError
from aspectly.model import aspect_token
from aspectly.types import ModelKind, Normalizer, Task
from aspectly.utils import sha256_indices


@pytest.fixture()
def prepared(dataset_file):
    return runner.prepare(resolve_config(None, {"data": str(dataset_file)}))


def test_stage_names_the_failing_step():
    with pytest.raises(StageError) as info:
        with runner.stage("split"):
            raise BadLabel(3, "aspect", "Film")
    assert info.value.stage == "split"
    assert isinstance(info.value.cause, BadLabel)
    assert str(info.value).startswith("stage 'split' failed: row 3")

    with pytest.raises(StageError) as info:
        with runner.stage("outer"), runner.stage("inner"):
            raise OSError("disk full")
    assert info.value.stage == "inner"


def test_partitions_cover_the_dataset(prepared):
    plan = prepared.plan
    assert plan.sizes() == {"train": 75, "val": 9, "test": 36}
    everything = plan.train + plan.val + plan.test
    assert sorted(everything) == list(range(120))
    assert plan.split_sha256 == sha256_indices(plan.train + plan.val)


def test_no_validation_partition(dataset_file):
    cfg = resolve_config(None, {"data": str(dataset_file), "val_fraction": 0.0})
    plan = runner.prepare(cfg).plan
    assert plan.val == ()
    assert len(plan.train) == 84


def test_missing_data_is_a_config_error():
    with pytest.raises(ConfigError, match="no dataset given"):
        runner.load_data(resolve_config())


def test_polarity_documents_end_with_the_aspect(small_separable):
    docs = runner.task_documents(small_separable, [0, 1], Task.POLARITY, Normalizer(), 4)
    for doc, i in zip(docs, (0, 1)):
        assert doc[-1] == aspect_token(small_separable[i].aspect)
        assert len(doc) <= 4
    plain = runner.task_documents(small_separable, [0], Task.ASPECT, Normalizer())
    assert not any(token.startswith("<aspect:") for token in plain[0])


def test_bundle_class_names_must_match(prepared):
    result = runner.run_model(prepared, Task.ASPECT, ModelKind.NAIVE_BAYES)
    cm, _ = runner.evaluate_bundle(result.bundle, prepared.dataset)
    assert cm.total == 120

    renamed = {**result.bundle, "class_names": ["a", "b", "c", "d"]}
    with pytest.raises(StageError) as info:
        runner.evaluate_bundle(renamed, prepared.dataset)
    assert info.value.stage == "load"

    truncated = {k: v for k, v in result.bundle.items() if k != "vectorizer"}
    with pytest.raises(StageError):
        runner.evaluate_bundle(truncated, prepared.dataset)


def test_search_refuses_sequence_length(prepared):
    with pytest.raises(StageError) as info:
        runner.search(prepared, Task.ASPECT, {"seq_len": [8, 16]})
    assert info.value.stage == "preprocess"
