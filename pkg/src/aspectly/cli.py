"""# Command line

```
aspectly [-v|-vv] validate   --data comments.csv [--manifest manifest.env]
aspectly [-v|-vv] stats      --data comments.csv --out runs/
aspectly [-v|-vv] train      --data comments.csv --task aspect --model dcnn
aspectly [-v|-vv] evaluate   --checkpoint runs/aspect-dcnn-checkpoint.json --data test.csv
aspectly [-v|-vv] compare    --data comments.csv --model dcnn --model nb --model svm
aspectly [-v|-vv] gridsearch --data comments.csv --space space.env --workers 4
```

Every setting can also come from ``--config file.env``; flags win over the file, the
file wins over built-in defaults.

Exit status is 0 on success, 1 when validation or any pipeline stage fails and 2 on
usage errors.
"""

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Tuple, TypeVar

import click

from . import __version__, runner
from .config import RunConfig, load_space, resolve_config
from .corpus import load_manifest, validate_file
from .errors import AspectlyError
from .metrics import format_report, format_table
from .types import ModelKind, Task

__all__ = ("cli", "main")

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_F = TypeVar("_F", bound=Callable[..., Any])


def _configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _reports_errors(command: _F) -> _F:
    """Turn library errors into a one-line diagnostic and exit status 1."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except (AspectlyError, OSError) as e:
            raise click.ClickException(str(e)) from e

    return wrapper  # type: ignore


def _input_options(command: _F) -> _F:
    options = (
        click.option(
            "--data",
            type=click.Path(dir_okay=False),
            help="Dataset CSV with the columns text, aspect, polarity, language.",
        ),
        click.option(
            "--manifest",
            type=click.Path(exists=True, dir_okay=False),
            help="Manifest declaring the polarity classes. Defaults to three classes.",
        ),
        click.option(
            "--config",
            "config_file",
            type=click.Path(exists=True, dir_okay=False),
            help="key=value file with settings; flags take precedence.",
        ),
    )
    for option in reversed(options):
        command = option(command)
    return command


def _run_options(command: _F) -> _F:
    options = (
        click.option("--seed", type=click.IntRange(min=0), help="Seed of every random choice."),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory."),
    )
    for option in reversed(options):
        command = option(command)
    return command


_TASK = click.Choice([task.value for task in Task])
_MODEL = click.Choice(ModelKind.choices())


def _resolve(config_file: Optional[str], **flags: Any) -> RunConfig:
    return resolve_config(config_file, flags)


@click.group()
@click.version_option(__version__, prog_name="aspectly")
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug output.")
def cli(verbose: int) -> None:
    """Aspect and polarity classification of Hausa and Engausa comments."""
    _configure_logging(verbose)


@cli.command()
@_input_options
@_reports_errors
def validate(data: Optional[str], manifest: Optional[str], config_file: Optional[str]) -> None:
    """List every problem in a dataset file."""
    cfg = _resolve(config_file, data=data, manifest=manifest)
    if not cfg.data:
        msg = "no dataset given"
        raise click.UsageError(msg)

    errors = validate_file(cfg.data, load_manifest(cfg.manifest or None))
    for error in errors:
        click.echo(str(error))
    click.echo(f"{len(errors)} errors")
    if errors:
        raise SystemExit(1)


@cli.command()
@_input_options
@click.option("--out", type=click.Path(file_okay=False), help="Output directory.")
@_reports_errors
def stats(
    data: Optional[str], manifest: Optional[str], config_file: Optional[str], out: Optional[str]
) -> None:
    """Write the aspect, polarity and language distributions as CSV."""
    cfg = _resolve(config_file, data=data, manifest=manifest, out=out)
    dataset, digest = runner.load_data(cfg)
    for path in runner.write_stats(dataset, digest, cfg, Path(cfg.out)):
        click.echo(f"wrote {path}")


@cli.command()
@_input_options
@click.option("--task", type=_TASK, help="Task to train.")
@click.option("--model", type=_MODEL, help="Learner to train.")
@_run_options
@_reports_errors
def train(
    data: Optional[str],
    manifest: Optional[str],
    config_file: Optional[str],
    task: Optional[str],
    model: Optional[str],
    seed: Optional[int],
    out: Optional[str],
) -> None:
    """Split, fit one model and score it on the test partition."""
    cfg = _resolve(
        config_file, data=data, manifest=manifest, task=task, model=model, seed=seed, out=out
    )
    prepared = runner.prepare(cfg)
    result = runner.run_model(prepared, cfg.task, cfg.model)

    click.echo(f"{result.model.display_name} on the {result.task.value} task")
    click.echo(format_report(result.report, result.confusion))
    for path in runner.write_run_artifacts(prepared, result, Path(cfg.out)):
        click.echo(f"wrote {path}")


@cli.command()
@click.option(
    "--checkpoint",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Checkpoint written by train.",
)
@_input_options
@click.option("--out", type=click.Path(file_okay=False), help="Output directory.")
@_reports_errors
def evaluate(
    checkpoint: str,
    data: Optional[str],
    manifest: Optional[str],
    config_file: Optional[str],
    out: Optional[str],
) -> None:
    """Score a saved model on every record of a dataset."""
    cfg = _resolve(config_file, data=data, manifest=manifest, out=out)
    bundle = runner.load_bundle(Path(checkpoint))
    dataset, digest = runner.load_data(cfg)
    cm, rep = runner.evaluate_bundle(bundle, dataset)

    click.echo(format_report(rep, cm))
    path = runner.write_evaluation(bundle, Path(checkpoint), digest, cm, rep, Path(cfg.out))
    click.echo(f"wrote {path}")


def _unique(values: Sequence[str], what: str) -> Tuple[str, ...]:
    if len(set(values)) != len(values):
        msg = f"each {what} may be named once"
        raise click.UsageError(msg)
    return tuple(values)


@cli.command()
@_input_options
@click.option(
    "--task",
    "tasks",
    type=_TASK,
    multiple=True,
    help="Task to compare on; repeatable. Defaults to the configured task.",
)
@click.option("--model", "models", type=_MODEL, multiple=True, help="Learner; at least two.")
@_run_options
@_reports_errors
def compare(
    data: Optional[str],
    manifest: Optional[str],
    config_file: Optional[str],
    tasks: Sequence[str],
    models: Sequence[str],
    seed: Optional[int],
    out: Optional[str],
) -> None:
    """Train several models on one shared split and rank them."""
    if len(models) < 2:
        msg = "compare needs at least two --model options"
        raise click.UsageError(msg)
    _unique(models, "model")
    _unique(tasks, "task")

    cfg = _resolve(config_file, data=data, manifest=manifest, seed=seed, out=out)
    chosen_tasks = [Task(task) for task in tasks] or [cfg.task]
    prepared = runner.prepare(cfg)
    ranked = runner.compare_models(prepared, chosen_tasks, [ModelKind(m) for m in models])

    for task, results in ranked.items():
        click.echo(f"\n{task.value} task (split {prepared.plan.split_sha256[:12]})")
        click.echo(format_table(r.report.table_row(r.model.display_name) for r in results))
    for path in runner.write_comparison(prepared, ranked, Path(cfg.out)):
        click.echo(f"wrote {path}")


@cli.command()
@_input_options
@click.option(
    "--space",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="key=value file of comma-separated candidates per network setting.",
)
@click.option("--task", type=_TASK, help="Task to tune.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@_run_options
@_reports_errors
def gridsearch(
    data: Optional[str],
    manifest: Optional[str],
    config_file: Optional[str],
    space: str,
    task: Optional[str],
    workers: int,
    seed: Optional[int],
    out: Optional[str],
) -> None:
    """Tune the network over a grid, ranking trials on the validation partition."""
    cfg = _resolve(
        config_file, data=data, manifest=manifest, task=task, model="dcnn", seed=seed, out=out
    )
    candidates = load_space(space, cfg.network)
    prepared = runner.prepare(cfg)
    trials = runner.search(prepared, cfg.task, candidates, workers)

    for trial in trials:
        status = trial.error or f"val_acc {trial.val_accuracy:.4f} val_loss {trial.val_loss:.4f}"
        click.echo(f"#{trial.index:<4d} {trial.config_key:<48} {status}")
    for path in runner.write_search(prepared, cfg.task, trials, Path(cfg.out)):
        click.echo(f"wrote {path}")


def main() -> None:
    """Console-script entry point."""
    cli(prog_name="aspectly")
