"""Pipeline stages behind the command-line interface.

Each command runs some of ``load -> split -> preprocess -> fit -> evaluate -> write``.
Any error inside a stage is re-raised as `StageError` naming that stage.

Every artifact written here embeds the resolved run configuration, the SHA-256 of
the dataset file and the SHA-256 of the training partition's indices.
"""

import contextlib
import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import baselines as baseline_lib
from .config import RunConfig, write_config_file
from .corpus import (
    class_distribution,
    load_dataset,
    load_manifest,
    split_indices,
    write_distribution_csv,
)
from .errors import AspectlyError, CheckpointError, ConfigError, StageError
from .metrics import evaluate, write_table_csv
from .model import (
    build,
    grid_search,
    model_from_dict,
    model_to_dict,
    polarity_tokens,
    predict,
    train,
    write_train_record,
    write_trials,
)
from .textprep import (
    encode_batch,
    fit_vocab,
    load_stopwords,
    preprocess,
    tfidf_fit,
    tfidf_transform_many,
    vectorizer_from_dict,
    vectorizer_to_dict,
)
from .types import (
    DEFAULT_STOPWORDS,
    ConfusionMatrix,
    Dataset,
    LabelField,
    MetricsReport,
    ModelKind,
    Normalizer,
    SplitSpec,
    Task,
    TrainRecord,
    Trial,
    Vocabulary,
)
from .utils import read_json, sha256_file, sha256_indices, write_json

__all__ = (
    "Prepared",
    "SplitPlan",
    "RunResult",
    "stage",
    "load_data",
    "prepare",
    "plan_split",
    "task_documents",
    "run_model",
    "metrics_document",
    "write_run_artifacts",
    "write_stats",
    "compare_models",
    "write_comparison",
    "search",
    "write_search",
    "load_bundle",
    "evaluate_bundle",
    "write_evaluation",
)

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = "aspectly-run"
METRICS_FORMAT = "aspectly-metrics"
ARTIFACT_VERSION = 1


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    """Re-raise library, file and value errors as `StageError` for stage `name`."""
    try:
        yield
    except StageError:
        raise
    except (AspectlyError, OSError, ValueError) as e:
        logger.debug("stage %s failed", name, exc_info=True)
        raise StageError(name, e) from e


@dataclass(frozen=True)
class SplitPlan:
    """Record positions of the three partitions.

    The validation partition is carved out of the training side of the train/test
    split, so `split_sha256` covers both.
    """

    train: Tuple[int, ...]
    val: Tuple[int, ...]
    test: Tuple[int, ...]

    @property
    def split_sha256(self) -> str:
        return sha256_indices(self.train + self.val)

    def sizes(self) -> Dict[str, int]:
        return {"train": len(self.train), "val": len(self.val), "test": len(self.test)}


@dataclass(frozen=True)
class Prepared:
    """A loaded and split dataset with its provenance."""

    config: RunConfig
    dataset: Dataset
    dataset_sha256: str
    plan: SplitPlan
    normalizer: Normalizer

    def provenance(self, **overrides: Any) -> Dict[str, Any]:
        """The run configuration, with `overrides` applied, and both hashes."""
        run_config = self.config.to_dict()
        run_config.update({key: getattr(v, "value", v) for key, v in overrides.items()})
        return {
            "run_config": run_config,
            "dataset_sha256": self.dataset_sha256,
            "split_sha256": self.plan.split_sha256,
        }


@dataclass
class RunResult:
    """Outcome of training and testing one model on one task."""

    task: Task
    model: ModelKind
    confusion: ConfusionMatrix
    report: MetricsReport
    bundle: Dict[str, Any]
    record: Optional[TrainRecord] = None

    @property
    def name(self) -> str:
        return f"{self.task.value}-{self.model.value}"


def load_normalizer(config: RunConfig) -> Normalizer:
    if not config.stopwords:
        return Normalizer()
    return Normalizer(stopwords=DEFAULT_STOPWORDS | load_stopwords(config.stopwords))


def load_data(config: RunConfig) -> Tuple[Dataset, str]:
    if not config.data:
        msg = "no dataset given; pass --data or set data in the config file"
        raise ConfigError(msg)

    with stage("load"):
        manifest = load_manifest(config.manifest or None)
        dataset = load_dataset(config.data, manifest, drop_unlabeled=config.drop_unlabeled)
        digest = sha256_file(config.data)
    return dataset, digest


def plan_split(dataset: Dataset, config: RunConfig) -> SplitPlan:
    """Split into train/test, then hold out `val_fraction` of the train side."""
    field = config.stratify_field
    outer, test = split_indices(dataset, SplitSpec(config.train_fraction, config.seed, field))
    if config.val_fraction == 0.0:
        return SplitPlan(tuple(outer), (), tuple(test))

    inner = dataset.subset(outer)
    inner_spec = SplitSpec(1.0 - config.val_fraction, config.seed, field)
    fit_part, val_part = split_indices(inner, inner_spec)
    plan = SplitPlan(
        tuple(outer[i] for i in fit_part), tuple(outer[i] for i in val_part), tuple(test)
    )
    logger.info("partitions: %s", plan.sizes())
    return plan


def prepare(config: RunConfig) -> Prepared:
    """Run the ``load`` and ``split`` stages."""
    dataset, digest = load_data(config)
    with stage("split"):
        plan = plan_split(dataset, config)
    with stage("load"):
        normalizer = load_normalizer(config)
    return Prepared(config, dataset, digest, plan, normalizer)


def task_documents(
    dataset: Dataset,
    indices: Sequence[int],
    task: Task,
    normalizer: Normalizer,
    seq_len: Optional[int] = None,
) -> List[List[str]]:
    """Token lists of the records at `indices`.

    Polarity documents end with the record's aspect token; with `seq_len` the content is
    cut so that token survives encoding.
    """
    documents = []
    for i in indices:
        record = dataset[i]
        tokens = preprocess(record.text, normalizer)
        if task is Task.POLARITY:
            limit = seq_len if seq_len is not None else len(tokens) + 1
            tokens = polarity_tokens(tokens, record.aspect, limit)
        documents.append(tokens)
    return documents


def _labels(dataset: Dataset, indices: Sequence[int], field: LabelField) -> np.ndarray:
    ids = dataset.label_ids(field)
    return np.array([ids[i] for i in indices], dtype=np.int64)


def _run_dcnn(prepared: Prepared, task: Task) -> RunResult:
    cfg, ds, plan = prepared.config, prepared.dataset, prepared.plan
    seq_len = cfg.network.seq_len
    num_classes = ds.manifest.num_classes(task)
    with stage("preprocess"):
        docs = {
            part: task_documents(ds, getattr(plan, part), task, prepared.normalizer, seq_len)
            for part in ("train", "val", "test")
        }
        vocab = fit_vocab(docs["train"], cfg.max_vocab or None, cfg.min_freq)
        batches = {
            part: encode_batch(
                docs[part], vocab, seq_len, _labels(ds, getattr(plan, part), task.field)
            )
            for part in docs
        }
        logger.info("vocabulary of %d tokens", len(vocab))

    with stage("fit"):
        network = dataclasses.replace(
            cfg.network, vocab_size=len(vocab), num_classes=num_classes, seed=cfg.seed
        )
        model = build(network)
        val = batches["val"] if len(batches["val"]) else None
        record = train(model, batches["train"], val, task)

    with stage("evaluate"):
        predicted, _ = predict(model, batches["test"])
        cm, rep = evaluate(
            batches["test"].labels,  # type: ignore
            predicted,
            num_classes,
            ds.manifest.class_names(task.field),
        )

    bundle = _bundle(prepared, task, ModelKind.DCNN, model_to_dict(model))
    bundle["vocabulary"] = list(vocab.tokens)
    return RunResult(task, ModelKind.DCNN, cm, rep, bundle, record)


def _run_baseline(prepared: Prepared, task: Task, kind: ModelKind) -> RunResult:
    cfg, ds, plan = prepared.config, prepared.dataset, prepared.plan
    num_classes = ds.manifest.num_classes(task)
    # no early stopping, so the validation records train the baselines too
    fit_indices = tuple(sorted(plan.train + plan.val))
    with stage("preprocess"):
        train_docs = task_documents(ds, fit_indices, task, prepared.normalizer)
        test_docs = task_documents(ds, plan.test, task, prepared.normalizer)
        vocab = fit_vocab(train_docs, cfg.max_vocab or None, cfg.min_freq)
        vectorizer = tfidf_fit(train_docs, vocab)
        x_train = tfidf_transform_many(train_docs, vectorizer)
        x_test = tfidf_transform_many(test_docs, vectorizer)

    with stage("fit"):
        learner = baseline_lib.fit(
            kind.baseline,
            x_train,
            _labels(ds, fit_indices, task.field),
            cfg.baselines,
            cfg.seed,
            num_classes,
        )

    with stage("evaluate"):
        cm, rep = evaluate(
            _labels(ds, plan.test, task.field),
            learner.predict(x_test),
            num_classes,
            ds.manifest.class_names(task.field),
        )

    bundle = _bundle(prepared, task, kind, learner.to_dict())
    bundle["vectorizer"] = vectorizer_to_dict(vectorizer)
    return RunResult(task, kind, cm, rep, bundle)


def _bundle(
    prepared: Prepared, task: Task, kind: ModelKind, model_document: Dict[str, Any]
) -> Dict[str, Any]:
    return {
        "format": BUNDLE_FORMAT,
        "version": ARTIFACT_VERSION,
        "task": task.value,
        "model": kind.value,
        "class_names": list(prepared.dataset.manifest.class_names(task.field)),
        "polarity_classes": [c.value for c in prepared.dataset.manifest.polarity_classes],
        "normalizer": prepared.normalizer.to_dict(),
        "checkpoint": model_document,
        **prepared.provenance(task=task, model=kind),
    }


def run_model(prepared: Prepared, task: Task, kind: ModelKind) -> RunResult:
    """Preprocess, fit and test one model on one task."""
    logger.info("running %s on the %s task", kind.display_name, task.value)
    if kind is ModelKind.DCNN:
        return _run_dcnn(prepared, task)
    return _run_baseline(prepared, task, kind)


def metrics_document(prepared: Prepared, result: RunResult) -> Dict[str, Any]:
    """Test-set metrics of one run. Holds no timings, so equal runs give equal bytes."""
    document: Dict[str, Any] = {
        "format": METRICS_FORMAT,
        "version": ARTIFACT_VERSION,
        "task": result.task.value,
        "model": result.model.value,
        "partitions": prepared.plan.sizes(),
        "metrics": result.report.to_dict(),
        "confusion": result.confusion.counts.tolist(),
        "class_names": list(result.confusion.class_names),
        **prepared.provenance(task=result.task, model=result.model),
    }
    if result.record is not None:
        document["training"] = {
            "best_epoch": result.record.best_epoch,
            "epochs_run": len(result.record.rows),
            "stopped_early": result.record.stopped_early,
        }
    return document


def write_run_artifacts(prepared: Prepared, result: RunResult, out: Path) -> List[Path]:
    """Write the checkpoint, the learning curve (network only) and the metrics JSON."""
    with stage("write"):
        paths = [write_json(out / f"{result.name}-checkpoint.json", result.bundle)]
        if result.record is not None:
            meta = prepared.provenance(task=result.task, model=result.model)
            paths.append(
                write_train_record(result.record, out / f"{result.name}-history.csv", meta)
            )
        paths.append(
            write_json(out / f"{result.name}-metrics.json", metrics_document(prepared, result))
        )
    return paths


def write_stats(dataset: Dataset, digest: str, config: RunConfig, out: Path) -> List[Path]:
    """Write one ``label,count`` CSV per label field."""
    meta = {"run_config": config.to_dict(), "dataset_sha256": digest}
    with stage("write"):
        return [
            write_distribution_csv(
                class_distribution(dataset, field),
                out / f"{field.value}-distribution.csv",
                meta=meta,
            )
            for field in LabelField
        ]


def compare_models(
    prepared: Prepared, tasks: Sequence[Task], models: Sequence[ModelKind]
) -> Dict[Task, List[RunResult]]:
    """Train every model on every task over one shared split.

    Results of each task are ranked by accuracy, then weighted F1, then the order the
    models were given in.
    """
    ranked: Dict[Task, List[RunResult]] = {}
    for task in tasks:
        results = [run_model(prepared, task, kind) for kind in models]
        order = {id(result): i for i, result in enumerate(results)}
        ranked[task] = sorted(
            results,
            key=lambda r: (-r.report.accuracy, -r.report.weighted_f1, order[id(r)]),
        )
    return ranked


def write_comparison(
    prepared: Prepared, ranked: Mapping[Task, Sequence[RunResult]], out: Path
) -> List[Path]:
    """Write one comparison table per task plus every model's metrics JSON."""
    paths = []
    with stage("write"):
        for task, results in ranked.items():
            rows = [r.report.table_row(r.model.display_name) for r in results]
            meta = prepared.provenance(task=task)
            meta["ranking"] = "accuracy, weighted f1, order given"
            paths.append(write_table_csv(rows, out / f"{task.value}-comparison.csv", meta))
            for result in results:
                paths.append(
                    write_json(
                        out / f"{result.name}-metrics.json", metrics_document(prepared, result)
                    )
                )
    return paths


def search(
    prepared: Prepared, task: Task, space: Mapping[str, Sequence[Any]], workers: int = 1
) -> List[Trial]:
    """Grid search the network on the training and validation partitions."""
    cfg, ds, plan = prepared.config, prepared.dataset, prepared.plan
    seq_len = cfg.network.seq_len
    if "seq_len" in space:
        msg = "seq_len cannot be searched; the vocabulary and encoding depend on it"
        raise StageError("preprocess", ConfigError(msg))

    with stage("preprocess"):
        docs = {
            part: task_documents(ds, getattr(plan, part), task, prepared.normalizer, seq_len)
            for part in ("train", "val")
        }
        vocab = fit_vocab(docs["train"], cfg.max_vocab or None, cfg.min_freq)
        batches = {
            part: encode_batch(
                docs[part], vocab, seq_len, _labels(ds, getattr(plan, part), task.field)
            )
            for part in docs
        }

    with stage("fit"):
        base = dataclasses.replace(
            cfg.network,
            vocab_size=len(vocab),
            num_classes=ds.manifest.num_classes(task),
            seed=cfg.seed,
        )
        val = batches["val"] if len(batches["val"]) else None
        return grid_search(space, base, batches["train"], val, task, workers)


def write_search(
    prepared: Prepared, task: Task, trials: Sequence[Trial], out: Path
) -> List[Path]:
    """Write the ranked trial table and, if any trial succeeded, the best configuration."""
    meta = prepared.provenance(task=task, model=ModelKind.DCNN)
    with stage("write"):
        paths = [write_trials(trials, out / f"{task.value}-trials.csv", meta)]
        best = next((t for t in trials if t.ok), None)
        if best is not None:
            values = {**meta["run_config"], **dict(best.params)}
            header = (
                f"best of {len(trials)} trials: val_accuracy={best.val_accuracy!r}\n"
                f"dataset_sha256={prepared.dataset_sha256}"
            )
            paths.append(write_config_file(out / f"{task.value}-best.env", values, header))
    return paths


def load_bundle(path: Path) -> Dict[str, Any]:
    """Read a checkpoint written by `write_run_artifacts`."""
    with stage("load"):
        document = read_json(path)
        if document.get("format") != BUNDLE_FORMAT or document.get("version") != ARTIFACT_VERSION:
            msg = f"{path} is not a version {ARTIFACT_VERSION} run checkpoint"
            raise CheckpointError(msg)
    return document


def _bundle_predictor(
    bundle: Mapping[str, Any], task: Task, kind: ModelKind, normalizer: Normalizer
) -> Callable[[Dataset], np.ndarray]:
    if kind is ModelKind.DCNN:
        model, _ = model_from_dict(bundle["checkpoint"])
        vocab = Vocabulary(tuple(bundle["vocabulary"]))
        seq_len = model.config.seq_len

        def predict_dcnn(ds: Dataset) -> np.ndarray:
            docs = task_documents(ds, range(len(ds)), task, normalizer, seq_len)
            return predict(model, encode_batch(docs, vocab, seq_len))[0]

        return predict_dcnn

    learner = baseline_lib.baseline_from_dict(bundle["checkpoint"])
    vectorizer = vectorizer_from_dict(bundle["vectorizer"])

    def predict_baseline(ds: Dataset) -> np.ndarray:
        docs = task_documents(ds, range(len(ds)), task, normalizer)
        return learner.predict(tfidf_transform_many(docs, vectorizer))

    return predict_baseline


def evaluate_bundle(
    bundle: Mapping[str, Any], dataset: Dataset
) -> Tuple[ConfusionMatrix, MetricsReport]:
    """Score a saved model on every record of `dataset`."""
    with stage("load"):
        try:
            task = Task(bundle["task"])
            kind = ModelKind(bundle["model"])
            class_names = list(bundle["class_names"])
            predictor = _bundle_predictor(
                bundle, task, kind, Normalizer.from_dict(bundle["normalizer"])
            )
        except KeyError as e:
            msg = f"run checkpoint lacks {e}"
            raise CheckpointError(msg) from e

        expected = list(dataset.manifest.class_names(task.field))
        if expected != class_names:
            msg = f"dataset classes {expected} differ from the checkpoint's {class_names}"
            raise CheckpointError(msg)

    with stage("evaluate"):
        labels = _labels(dataset, range(len(dataset)), task.field)
        return evaluate(labels, predictor(dataset), len(class_names), class_names)


def write_evaluation(
    bundle: Mapping[str, Any],
    checkpoint: Path,
    dataset_sha256: str,
    cm: ConfusionMatrix,
    rep: MetricsReport,
    out: Path,
) -> Path:
    """Write the metrics of a saved model re-scored on a dataset.

    The run configuration and split hash come from the checkpoint; the dataset hash is
    that of the dataset just scored.
    """
    document = {
        "format": METRICS_FORMAT,
        "version": ARTIFACT_VERSION,
        "task": bundle["task"],
        "model": bundle["model"],
        "checkpoint": str(checkpoint),
        "metrics": rep.to_dict(),
        "confusion": cm.counts.tolist(),
        "class_names": list(cm.class_names),
        "run_config": bundle["run_config"],
        "dataset_sha256": dataset_sha256,
        "trained_on_sha256": bundle["dataset_sha256"],
        "split_sha256": bundle["split_sha256"],
    }
    with stage("write"):
        return write_json(out / f"{bundle['task']}-{bundle['model']}-evaluation.json", document)
