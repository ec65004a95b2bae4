import json

import pytest
from click.testing import CliRunner

from aspectly import __version__
from aspectly.cli import cli
from aspectly.config import resolve_config
from aspectly.corpus import save_dataset
from aspectly.utils import read_csv, sha256_file

TINY_NETWORK = """\
seq_len=8
embed_dim=8
conv1_filters=6
conv2_filters=6
lstm_hidden=8
dense_units=10
epochs=2
batch_size=16
"""


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def tiny_env(tmp_path):
    path = tmp_path / "tiny.env"
    path.write_text(TINY_NETWORK)
    return path


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_validate_clean_file(runner, dataset_file):
    result = runner.invoke(cli, ["validate", "--data", str(dataset_file)])
    assert result.exit_code == 0
    assert "0 errors" in result.output


def test_validate_reports_every_bad_row(runner, write_rows):
    path = write_rows(
        ["fim,Movie,Happy,Hausa", "fim,Movie,Positive,Hausa", ",Movie,Positive,Hausa"]
    )
    result = runner.invoke(cli, ["validate", "--data", str(path)])
    assert result.exit_code == 1
    assert "row 1" in result.output
    assert "row 3" in result.output
    assert "2 errors" in result.output


def test_validate_reports_a_non_utf8_file(runner, tmp_path):
    path = tmp_path / "latin1.csv"
    content = "text,aspect,polarity,language\nna ji dé,Movie,Positive,Hausa\n"
    path.write_bytes(content.encode("latin-1"))
    result = runner.invoke(cli, ["validate", "--data", str(path)])
    assert result.exit_code == 1
    assert isinstance(result.exception, SystemExit)
    assert "line 2: byte 37 is not valid UTF-8" in result.output
    assert "1 errors" in result.output

    result = runner.invoke(cli, ["stats", "--data", str(path)])
    assert result.exit_code == 1
    assert "stage 'load' failed: line 2" in result.output


def test_validate_without_data_is_a_usage_error(runner):
    result = runner.invoke(cli, ["validate"])
    assert result.exit_code == 2


def test_unknown_model_is_a_usage_error(runner, dataset_file):
    result = runner.invoke(cli, ["train", "--data", str(dataset_file), "--model", "knn"])
    assert result.exit_code == 2


def test_stats_writes_distributions(runner, dataset_file, tmp_path):
    out = tmp_path / "stats"
    result = runner.invoke(cli, ["stats", "--data", str(dataset_file), "--out", str(out)])
    assert result.exit_code == 0, result.output

    for field in ("aspect", "polarity", "language"):
        rows = read_csv(out / f"{field}-distribution.csv")
        assert rows[0] == ["label", "count"]
        assert sum(int(count) for _, count in rows[1:]) == 120
    header = (out / "aspect-distribution.csv").read_text().splitlines()[1]
    assert header == f"# dataset_sha256={sha256_file(dataset_file)}"


def test_train_baseline_writes_reproducible_artifacts(runner, dataset_file, tmp_path):
    out = tmp_path / "run"
    args = ["train", "--data", str(dataset_file), "--task", "polarity", "--model", "logreg"]
    args += ["--seed", "1", "--out", str(out)]

    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    assert "weighted avg" in result.output

    metrics_path = out / "polarity-logreg-metrics.json"
    first = metrics_path.read_bytes()
    assert (out / "polarity-logreg-checkpoint.json").is_file()
    assert not (out / "polarity-logreg-history.csv").exists()

    document = json.loads(first)
    assert document["dataset_sha256"] == sha256_file(dataset_file)
    assert document["run_config"]["seed"] == 1
    assert document["run_config"]["model"] == "logreg"
    assert document["class_names"] == ["Negative", "Neutral", "Positive"]
    assert sum(document["partitions"].values()) == 120

    assert runner.invoke(cli, args).exit_code == 0
    assert metrics_path.read_bytes() == first


def test_train_network_writes_learning_curve(runner, dataset_file, tiny_env, tmp_path):
    out = tmp_path / "run"
    result = runner.invoke(
        cli,
        ["train", "--data", str(dataset_file), "--config", str(tiny_env), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output

    history = read_csv(out / "aspect-dcnn-history.csv")
    assert history[0] == ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]
    assert len(history) == 3
    document = json.loads((out / "aspect-dcnn-metrics.json").read_text())
    assert document["training"]["epochs_run"] == 2
    assert document["run_config"]["embed_dim"] == 8


def test_evaluate_rescores_a_checkpoint(runner, dataset_file, tmp_path):
    out = tmp_path / "run"
    train_args = ["train", "--data", str(dataset_file), "--model", "nb", "--out", str(out)]
    assert runner.invoke(cli, train_args).exit_code == 0

    checkpoint = out / "aspect-nb-checkpoint.json"
    result = runner.invoke(
        cli,
        ["evaluate", "--checkpoint", str(checkpoint), "--data", str(dataset_file)]
        + ["--out", str(out)],
    )
    assert result.exit_code == 0, result.output

    document = json.loads((out / "aspect-nb-evaluation.json").read_text())
    assert document["trained_on_sha256"] == document["dataset_sha256"]
    assert sum(sum(row) for row in document["confusion"]) == 120
    assert document["metrics"]["accuracy"] > 0.8


def test_evaluate_rejects_other_documents(runner, dataset_file, tmp_path):
    bogus = tmp_path / "bogus.json"
    bogus.write_text('{"format": "something-else"}')
    result = runner.invoke(
        cli, ["evaluate", "--checkpoint", str(bogus), "--data", str(dataset_file)]
    )
    assert result.exit_code == 1
    assert "stage 'load' failed" in result.output


def test_missing_data_file_fails_the_load_stage(runner, tmp_path):
    result = runner.invoke(cli, ["stats", "--data", str(tmp_path / "absent.csv")])
    assert result.exit_code == 1
    assert "stage 'load' failed" in result.output


def test_compare_needs_two_models(runner, dataset_file):
    result = runner.invoke(cli, ["compare", "--data", str(dataset_file), "--model", "nb"])
    assert result.exit_code == 2
    result = runner.invoke(
        cli, ["compare", "--data", str(dataset_file), "--model", "nb", "--model", "nb"]
    )
    assert result.exit_code == 2


def test_compare_ranks_models_on_one_split(runner, dataset_file, tmp_path):
    out = tmp_path / "cmp"
    args = ["compare", "--data", str(dataset_file), "--out", str(out)]
    args += ["--model", "nb", "--model", "logreg", "--model", "svm"]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output

    rows = read_csv(out / "aspect-comparison.csv")
    assert rows[0] == ["model", "accuracy", "precision", "recall", "f1"]
    assert len(rows) == 4
    accuracies = [float(row[1]) for row in rows[1:]]
    assert accuracies == sorted(accuracies, reverse=True)

    hashes = {
        json.loads((out / f"aspect-{m}-metrics.json").read_text())["split_sha256"]
        for m in ("nb", "logreg", "svm")
    }
    assert len(hashes) == 1


def test_gridsearch_tries_every_point(runner, dataset_file, tiny_env, tmp_path):
    space = tmp_path / "space.env"
    space.write_text("learning_rate=0.001,0.01\nlstm_hidden=4,8\n")
    out = tmp_path / "grid"
    result = runner.invoke(
        cli,
        ["gridsearch", "--data", str(dataset_file), "--config", str(tiny_env)]
        + ["--space", str(space), "--workers", "2", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output

    trials = read_csv(out / "aspect-trials.csv")
    assert trials[0][0] == "rank"
    assert [row[0] for row in trials[1:]] == ["1", "2", "3", "4"]
    assert sorted(row[1] for row in trials[1:]) == ["0", "1", "2", "3"]

    best = resolve_config(out / "aspect-best.env")
    assert best.network.embed_dim == 8
    assert best.network.lstm_hidden in (4, 8)
    assert best.network.learning_rate in (0.001, 0.01)


def test_gridsearch_refuses_sequence_length(runner, dataset_file, tiny_env, tmp_path):
    space = tmp_path / "space.env"
    space.write_text("seq_len=8,16\n")
    result = runner.invoke(
        cli,
        ["gridsearch", "--data", str(dataset_file), "--config", str(tiny_env)]
        + ["--space", str(space), "--out", str(tmp_path / "grid")],
    )
    assert result.exit_code == 1
    assert "seq_len" in result.output


def test_gridsearch_is_reproducible(runner, dataset_file, tiny_env, tmp_path):
    space = tmp_path / "space.env"
    space.write_text("learning_rate=0.001,0.01\ndense_units=6,10\n")
    out = tmp_path / "grid"
    args = ["gridsearch", "--data", str(dataset_file), "--config", str(tiny_env)]
    args += ["--space", str(space), "--workers", "2", "--seed", "5", "--out", str(out)]

    assert runner.invoke(cli, args).exit_code == 0
    first = [(out / name).read_bytes() for name in ("aspect-trials.csv", "aspect-best.env")]
    assert runner.invoke(cli, args).exit_code == 0
    again = [(out / name).read_bytes() for name in ("aspect-trials.csv", "aspect-best.env")]
    assert again == first


def test_train_network_on_polarity(runner, dataset_file, tiny_env, tmp_path):
    out = tmp_path / "run"
    args = ["train", "--data", str(dataset_file), "--config", str(tiny_env)]
    args += ["--task", "polarity", "--model", "dcnn", "--out", str(out)]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output

    document = json.loads((out / "polarity-dcnn-metrics.json").read_text())
    assert document["class_names"] == ["Negative", "Neutral", "Positive"]
    assert [len(row) for row in document["confusion"]] == [3, 3, 3]
    assert sum(map(sum, document["confusion"])) == 36

    history = read_csv(out / "polarity-dcnn-history.csv")
    rows = history[1:]
    assert len(rows) == document["training"]["epochs_run"]
    val_losses = [float(row[3]) for row in rows]
    best = document["training"]["best_epoch"]
    assert val_losses[best - 1] == min(val_losses)
    assert (out / "polarity-dcnn-checkpoint.json").is_file()


@pytest.fixture()
def separable_file(tmp_path, separable):
    return save_dataset(separable, tmp_path / "separable.csv")


def test_compare_ranks_the_network_first(runner, separable_file, tmp_path):
    settings = tmp_path / "compare.env"
    settings.write_text("rf_trees=25\n")
    out = tmp_path / "cmp"
    args = ["compare", "--data", str(separable_file), "--config", str(settings)]
    args += ["--out", str(out)]
    for model in ("dcnn", "nb", "svm", "rf", "logreg"):
        args += ["--model", model]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output

    rows = read_csv(out / "aspect-comparison.csv")
    assert len(rows) == 6
    assert rows[1][0] == "DCNN"

    network = json.loads((out / "aspect-dcnn-metrics.json").read_text())
    assert network["metrics"]["accuracy"] >= 0.95
    assert network["training"]["epochs_run"] <= 50
    assert network["run_config"]["seq_len"] == 32
    assert network["run_config"]["dense_units"] == 256
    for model in ("nb", "svm", "rf", "logreg"):
        document = json.loads((out / f"aspect-{model}-metrics.json").read_text())
        assert document["metrics"]["accuracy"] >= 0.8
