"""Run configuration.

A run is configured from three layers, highest precedence first: command-line flags,
a key=value config file, built-in defaults. Every key lives in one flat namespace:

- run keys: ``data``, ``manifest``, ``task``, ``model``, ``seed``, ``out``,
  ``stopwords``, ``train_fraction``, ``val_fraction``, ``stratify_by``, ``max_vocab``,
  ``min_freq``, ``drop_unlabeled``;
- every `ModelConfig` field except ``vocab_size``, ``num_classes`` and ``seed``,
  which are derived from the data and the run seed;
- every `BaselineConfig` field.

Search-space files use the same format, with comma-separated candidate values.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from dotenv import dotenv_values

from .errors import BadConfig, ConfigError
from .types import BaselineConfig, LabelField, ModelConfig, ModelKind, Task

__all__ = (
    "RunConfig",
    "resolve_config",
    "read_config_file",
    "load_space",
    "write_config_file",
    "MODEL_KEYS",
    "BASELINE_KEYS",
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_DERIVED_MODEL_KEYS = ("vocab_size", "num_classes", "seed")

MODEL_KEYS = tuple(
    f.name for f in dataclasses.fields(ModelConfig) if f.name not in _DERIVED_MODEL_KEYS
)
BASELINE_KEYS = tuple(f.name for f in dataclasses.fields(BaselineConfig))

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off", "")


def _default_network() -> ModelConfig:
    # vocab_size is replaced once the vocabulary is fitted
    return ModelConfig(vocab_size=2)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one command.

    Attributes
    ----------
    data: str
        Dataset CSV path.
    manifest: str
        Manifest path; empty for the three-class default.
    task: Task
        Task to train or evaluate.
    model: ModelKind
        Learner to train.
    seed: int
        Seeds the split, initialization, shuffling, dropout and forest bootstraps.
    out: str
        Output directory.
    stopwords: str
        Optional stopword file extending the built-in list.
    train_fraction: float
        Share of records in the training partition.
    val_fraction: float
        Share of the training partition held out for early stopping and ranking.
        Zero disables the hold-out.
    stratify_by: str
        Empty, or the label field to stratify splits on.
    max_vocab: int
        Vocabulary cap including the reserved entries; 0 for uncapped.
    min_freq: int
        Minimum token frequency.
    drop_unlabeled: bool
        Skip rows with an empty aspect instead of failing.
    network: ModelConfig
        Network settings.
    baselines: BaselineConfig
        Classical learner settings.
    """

    data: str = ""
    manifest: str = ""
    task: Task = Task.ASPECT
    model: ModelKind = ModelKind.DCNN
    seed: int = 0
    out: str = "runs"
    stopwords: str = ""
    train_fraction: float = 0.7
    val_fraction: float = 0.1
    stratify_by: str = ""
    max_vocab: int = 0
    min_freq: int = 1
    drop_unlabeled: bool = False
    network: ModelConfig = field(default_factory=_default_network)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)

    @property
    def stratify_field(self) -> Optional[LabelField]:
        return LabelField(self.stratify_by) if self.stratify_by else None

    def validate(self) -> None:
        """Raises `ConfigError` on the first invalid setting."""
        if not 0.0 < self.train_fraction < 1.0:
            msg = f"train_fraction must be in (0, 1), got {self.train_fraction}"
            raise ConfigError(msg)
        if not 0.0 <= self.val_fraction < 1.0:
            msg = f"val_fraction must be in [0, 1), got {self.val_fraction}"
            raise ConfigError(msg)
        if self.max_vocab < 0 or self.max_vocab == 1 or self.min_freq < 1:
            msg = "max_vocab must be 0 or at least 2, and min_freq at least 1"
            raise ConfigError(msg)
        if self.seed < 0:
            msg = f"seed must be non-negative, got {self.seed}"
            raise ConfigError(msg)
        try:
            self.network.validate()
            self.baselines.validate()
        except BadConfig as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> Dict[str, Any]:
        """Flat key/value echo of every setting, as written into artifacts."""
        flat: Dict[str, Any] = {}
        for f in dataclasses.fields(self):
            if f.name in ("network", "baselines"):
                continue
            value = getattr(self, f.name)
            flat[f.name] = value.value if isinstance(value, (Task, ModelKind)) else value

        network = self.network.to_dict()
        flat.update({key: network[key] for key in MODEL_KEYS})
        flat.update(self.baselines.to_dict())
        return flat


def _cast_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    msg = f"{key} must be a boolean, got {value!r}"
    raise ConfigError(msg)


def _cast_run_value(key: str, value: Any, default: Any) -> Any:
    if key == "task":
        return Task(str(value).strip().lower())
    if key == "model":
        return ModelKind(str(value).strip().lower())
    if key == "stratify_by":
        text = str(value).strip().lower()
        return LabelField(text).value if text else ""
    if isinstance(default, bool):
        return _cast_bool(key, value)
    return type(default)(value)


def resolve_config(
    config_file: Optional[PathLike] = None,
    flags: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Merge defaults, a config file and command-line flags.

    Parameters
    ----------
    config_file: Optional[PathLike]
        key=value file read with ``dotenv_values``.
    flags: Optional[Mapping[str, Any]]
        Values given on the command line; None entries are ignored.

    Returns
    -------
    RunConfig
        The validated configuration.

    Raises
    ------
    ConfigError
        Unknown key, uncastable value or invalid setting.
    """
    layered: Dict[str, Any] = {}
    if config_file is not None:
        layered.update(read_config_file(config_file))
    layered.update({key: value for key, value in (flags or {}).items() if value is not None})

    defaults = RunConfig()
    run_fields = {f.name for f in dataclasses.fields(RunConfig)} - {"network", "baselines"}
    run_values: Dict[str, Any] = {}
    network_values: Dict[str, Any] = {}
    baseline_values: Dict[str, Any] = {}
    for key, value in layered.items():
        if key in MODEL_KEYS:
            network_values[key] = value
        elif key in BASELINE_KEYS:
            baseline_values[key] = value
        elif key not in run_fields:
            msg = f"unknown configuration key {key!r}"
            raise ConfigError(msg)
        else:
            try:
                run_values[key] = _cast_run_value(key, value, getattr(defaults, key))
            except (TypeError, ValueError) as e:
                if isinstance(e, ConfigError):
                    raise
                msg = f"invalid value {value!r} for {key}"
                raise ConfigError(msg) from e

    try:
        network = defaults.network.with_overrides(network_values)
        baselines = defaults.baselines.with_overrides(baseline_values)
    except BadConfig as e:
        raise ConfigError(str(e)) from e

    config = dataclasses.replace(defaults, network=network, baselines=baselines, **run_values)
    config.validate()
    logger.debug("resolved configuration: %s", config.to_dict())
    return config


def read_config_file(path: PathLike) -> Dict[str, str]:
    """Read a key=value file.

    Raises
    ------
    ConfigError
        The file is missing or a line has no ``=``.
    """
    path = Path(path)
    if not path.is_file():
        msg = f"config file {path} does not exist"
        raise ConfigError(msg)

    values = dotenv_values(path)
    incomplete = sorted(key for key, value in values.items() if value is None)
    if incomplete:
        msg = f"{path}: keys without a value: {', '.join(incomplete)}"
        raise ConfigError(msg)
    return {key: value for key, value in values.items() if value is not None}


def load_space(path: PathLike, base: Optional[ModelConfig] = None) -> Dict[str, List[Any]]:
    """Read a search-space file: one network key per line, comma-separated candidates.

    Candidates are cast to the type of the field in `base`.

    Raises
    ------
    ConfigError
        A key is not a tunable network setting or a candidate cannot be cast.
    """
    base = base or _default_network()
    space: Dict[str, List[Any]] = {}
    for key, text in read_config_file(path).items():
        if key not in MODEL_KEYS:
            msg = f"{path}: {key!r} is not a tunable network setting"
            raise ConfigError(msg)

        candidates = [part.strip() for part in text.split(",") if part.strip()]
        try:
            space[key] = [getattr(base.with_overrides({key: c}), key) for c in candidates]
        except BadConfig as e:
            msg = f"{path}: {e}"
            raise ConfigError(msg) from e
    return space


def write_config_file(
    path: PathLike, values: Mapping[str, Any], header: Optional[str] = None
) -> Path:
    """Write a key=value file that `resolve_config` reads back to the same values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {line}" for line in (header or "").splitlines()]
    for key in sorted(values):
        value = values[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        if isinstance(value, str):
            value = '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
