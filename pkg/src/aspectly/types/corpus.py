"""Dataset record types"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Sequence, Tuple, Union, overload

from .enums import AspectLabel, LabelField, LanguageTag, PolarityLabel, Task

__all__ = (
    "Comment",
    "Manifest",
    "Dataset",
    "SplitSpec",
    "SynthSpec",
    "DEFAULT_POLARITY_CLASSES",
)

DEFAULT_POLARITY_CLASSES: Tuple[PolarityLabel, ...] = (
    PolarityLabel.NEGATIVE,
    PolarityLabel.NEUTRAL,
    PolarityLabel.POSITIVE,
)
"""Three-class polarity set used when a manifest does not declare one."""

Label = Union[AspectLabel, PolarityLabel, LanguageTag]


@dataclass(frozen=True)
class Comment:
    """One annotated review.

    Attributes
    ----------
    text: str
        The raw comment, non-empty after trimming.
    aspect: AspectLabel
        The aspect the comment targets.
    polarity: PolarityLabel
        Sentiment towards that aspect.
    language: LanguageTag
        Hausa or Engausa.
    """

    text: str
    aspect: AspectLabel
    polarity: PolarityLabel
    language: LanguageTag

    def __post_init__(self) -> None:
        if not self.text.strip():
            msg = "comment text must not be empty"
            raise ValueError(msg)

    def label(self, label_field: LabelField) -> Label:
        """Return the label stored in `label_field`."""
        return getattr(self, label_field.value)


@dataclass(frozen=True)
class Manifest:
    """Per-dataset declarations.

    Attributes
    ----------
    polarity_classes: Tuple[PolarityLabel, ...]
        Polarity set of the dataset, in class-id order.
    source: str
        Free text describing where the data came from.
    schema_version: int
        Version of the CSV schema. Only version 1 exists.
    """

    polarity_classes: Tuple[PolarityLabel, ...] = DEFAULT_POLARITY_CLASSES
    source: str = ""
    schema_version: int = 1

    def classes(self, label_field: LabelField) -> Tuple[Label, ...]:
        """Return the member set of `label_field` in class-id order."""
        if label_field is LabelField.POLARITY:
            return self.polarity_classes
        if label_field is LabelField.ASPECT:
            return tuple(AspectLabel)
        return tuple(LanguageTag)

    def class_names(self, label_field: LabelField) -> Tuple[str, ...]:
        return tuple(label.value for label in self.classes(label_field))

    def num_classes(self, task: Task) -> int:
        """Class count a model for `task` must have."""
        return len(self.classes(task.field))


@dataclass(frozen=True)
class Dataset:
    """An ordered, immutable collection of comments.

    Records are identified by position, so duplicate texts are distinct records.

    Attributes
    ----------
    records: Tuple[Comment, ...]
        The comments in file order.
    manifest: Manifest
        Declarations the records were validated against.
    """

    records: Tuple[Comment, ...]
    manifest: Manifest = field(default_factory=Manifest)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Comment]:
        return iter(self.records)

    @overload
    def __getitem__(self, index: int) -> Comment:
        ...

    @overload
    def __getitem__(self, index: slice) -> Tuple[Comment, ...]:
        ...

    def __getitem__(self, index: Union[int, slice]) -> Union[Comment, Tuple[Comment, ...]]:
        return self.records[index]

    def subset(self, indices: Sequence[int]) -> Dataset:
        """Return a dataset holding the records at `indices`, in the given order."""
        return Dataset(tuple(self.records[i] for i in indices), self.manifest)

    def label_ids(self, label_field: LabelField) -> Tuple[int, ...]:
        """Class ids of every record for `label_field`."""
        lookup: Dict[Label, int] = {
            label: i for i, label in enumerate(self.manifest.classes(label_field))
        }
        return tuple(lookup[record.label(label_field)] for record in self.records)


@dataclass(frozen=True)
class SplitSpec:
    """How to divide a dataset into train and test partitions.

    Attributes
    ----------
    train_fraction: float
        Share of records assigned to train, in (0, 1). The train size is
        ``floor(train_fraction * N)``.
    seed: int
        Seed of the permutation.
    stratify_by: Optional[LabelField]
        Keep each class of this field at the train fraction, give or take one record.
    """

    train_fraction: float = 0.7
    seed: int = 0
    stratify_by: Optional[LabelField] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            msg = f"train_fraction must be in (0, 1), got {self.train_fraction}"
            raise ValueError(msg)
        if self.seed < 0:
            msg = f"seed must be non-negative, got {self.seed}"
            raise ValueError(msg)


@dataclass(frozen=True)
class SynthSpec:
    """Request for a synthetic corpus.

    Attributes
    ----------
    n: int
        Number of records, at least 8.
    seed: int
        Generator seed.
    class_signal: float
        Probability in [0, 1] that a record carries the marker tokens of its own
        classes rather than markers of a random class.
    polarity_classes: Tuple[PolarityLabel, ...]
        Polarity set of the generated manifest.
    """

    n: int
    seed: int = 0
    class_signal: float = 1.0
    polarity_classes: Tuple[PolarityLabel, ...] = DEFAULT_POLARITY_CLASSES

    def __post_init__(self) -> None:
        if not 0.0 <= self.class_signal <= 1.0:
            msg = f"class_signal must be in [0, 1], got {self.class_signal}"
            raise ValueError(msg)
