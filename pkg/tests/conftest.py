from pathlib import Path
from typing import Callable, Iterable, Optional

import pytest

from aspectly.corpus import save_dataset, synth_generate
from aspectly.types import Dataset, ModelConfig, SynthSpec

HEADER = "text,aspect,polarity,language"


@pytest.fixture()
def write_rows(tmp_path: Path) -> Callable[..., Path]:
    """Write a dataset CSV from raw lines, header included unless `header` is None."""

    def write(
        rows: Iterable[str], name: str = "data.csv", header: Optional[str] = HEADER
    ) -> Path:
        lines = ([header] if header is not None else []) + list(rows)
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture(scope="session")
def separable() -> Dataset:
    return synth_generate(SynthSpec(n=400, seed=0, class_signal=1.0))


@pytest.fixture(scope="session")
def small_separable() -> Dataset:
    return synth_generate(SynthSpec(n=120, seed=3, class_signal=1.0))


@pytest.fixture()
def dataset_file(tmp_path: Path, small_separable: Dataset) -> Path:
    return save_dataset(small_separable, tmp_path / "comments.csv")


@pytest.fixture()
def tiny_config() -> ModelConfig:
    """Smallest useful network, for gradient checks and quick fits."""
    return ModelConfig(
        vocab_size=20,
        seq_len=8,
        embed_dim=8,
        conv1_filters=6,
        conv2_filters=6,
        lstm_hidden=8,
        dense_units=10,
        dropout_rate=0.0,
        num_classes=4,
        seed=0,
    )
