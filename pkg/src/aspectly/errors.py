"""Exceptions raised by aspectly.

Every exception derives from `AspectlyError`. Errors that describe a bad value also derive
from `ValueError` so callers that only know the standard library can still catch them.
"""

from typing import Optional

__all__ = (
    "AspectlyError",
    "CorpusError",
    "RowError",
    "MissingColumn",
    "BadLabel",
    "EmptyText",
    "MalformedRow",
    "NotUtf8",
    "DegenerateSplit",
    "SpecTooSmall",
    "ManifestError",
    "TextPrepError",
    "EmptyCorpus",
    "VectorizerFormatError",
    "TensorError",
    "ShapeMismatch",
    "IdOutOfRange",
    "AllMasked",
    "LabelOutOfRange",
    "NonFiniteValue",
    "NotScalarLoss",
    "DetachedTensor",
    "CheckpointError",
    "ModelError",
    "BadConfig",
    "NonFiniteLoss",
    "EmptySpace",
    "BaselineError",
    "MissingClass",
    "NegativeFeature",
    "NotFitted",
    "DimensionMismatch",
    "NotConvergedWarning",
    "MetricsError",
    "LengthMismatch",
    "EmptyMatrix",
    "ConfigError",
    "StageError",
)


class AspectlyError(Exception):
    """Base class for every error raised by aspectly."""


# corpus


class CorpusError(AspectlyError):
    """Base class for dataset loading, validation and splitting errors."""


class RowError(CorpusError, ValueError):
    """A problem tied to one data row.

    Parameters
    ----------
    row: int
        1-based index of the data row (the header is not counted).
    message: str
        Human readable description.
    """

    def __init__(self, row: int, message: str) -> None:
        super().__init__(f"row {row}: {message}")
        self.row = row


class MissingColumn(CorpusError, ValueError):
    """A required header column is absent, or the file has no header at all."""

    def __init__(self, column: str) -> None:
        super().__init__(f"missing required column {column!r}")
        self.column = column
        self.row = 0


class BadLabel(RowError):
    """A label field holds a value outside its enumeration."""

    def __init__(self, row: int, column: str, value: str) -> None:
        super().__init__(row, f"column {column!r} has invalid label {value!r}")
        self.column = column
        self.value = value


class EmptyText(RowError):
    """The text field is empty after trimming whitespace."""

    def __init__(self, row: int) -> None:
        super().__init__(row, "text is empty")
        self.column = "text"


class MalformedRow(RowError):
    """The row does not have one field per header column."""

    def __init__(self, row: int, expected: int, found: int) -> None:
        super().__init__(row, f"expected {expected} fields, found {found}")
        self.column = None
        self.expected = expected
        self.found = found


class NotUtf8(CorpusError, ValueError):
    """The file holds a byte sequence that is not valid UTF-8.

    Parameters
    ----------
    offset: int
        Byte offset of the first undecodable byte, counted from the start of the file.
    line: int
        1-based physical line holding that byte.
    """

    def __init__(self, offset: int, line: int) -> None:
        super().__init__(f"line {line}: byte {offset} is not valid UTF-8")
        self.offset = offset
        self.line = line
        self.row = 0


class DegenerateSplit(CorpusError, ValueError):
    """A split would leave the train or the test side empty."""


class SpecTooSmall(CorpusError, ValueError):
    """A synthetic corpus request cannot hold two records per class."""


class ManifestError(CorpusError, ValueError):
    """The dataset manifest is unreadable or inconsistent."""


# textprep


class TextPrepError(AspectlyError):
    """Base class for preprocessing errors."""


class EmptyCorpus(TextPrepError, ValueError):
    """A vocabulary or TF-IDF model was fitted on zero documents."""


class VectorizerFormatError(TextPrepError, ValueError):
    """A persisted vectorizer document has the wrong format or version."""


# tensor


class TensorError(AspectlyError):
    """Base class for numeric engine errors."""


class ShapeMismatch(TensorError, ValueError):
    """Operand shapes do not agree."""


class IdOutOfRange(TensorError, ValueError):
    """An integer id is outside ``[0, size)``."""


class AllMasked(TensorError, ValueError):
    """A batch row has no unmasked position to attend to."""


class LabelOutOfRange(TensorError, ValueError):
    """A class label is outside ``[0, num_classes)``."""


class NonFiniteValue(TensorError, ArithmeticError):
    """A tensor would hold NaN or infinity."""


class NotScalarLoss(TensorError, ValueError):
    """`backward` was called on a tensor with more than one element."""


class DetachedTensor(TensorError, ValueError):
    """`backward` was called on a tensor that the tape did not record."""


class CheckpointError(TensorError, ValueError):
    """A parameter checkpoint has the wrong format, names or shapes."""


# model


class ModelError(AspectlyError):
    """Base class for network assembly and training errors."""


class BadConfig(ModelError, ValueError):
    """A `ModelConfig` violates one of its invariants."""


class NonFiniteLoss(ModelError, ArithmeticError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, epoch: int, detail: str = "") -> None:
        message = f"non-finite loss in epoch {epoch}"
        if detail:
            message += f": {detail}"
        super().__init__(message)
        self.epoch = epoch


class EmptySpace(ModelError, ValueError):
    """A hyperparameter search space has no axis or an empty axis."""


# baselines


class BaselineError(AspectlyError):
    """Base class for classical learner errors."""


class MissingClass(BaselineError, ValueError):
    """A class has no training example."""


class NegativeFeature(BaselineError, ValueError):
    """Multinomial Naive Bayes received a negative feature value."""


class NotFitted(BaselineError, RuntimeError):
    """`predict` was called before `fit`."""


class DimensionMismatch(BaselineError, ValueError):
    """The feature count at predict time differs from fit time."""


class NotConvergedWarning(UserWarning):
    """An iterative learner stopped at its iteration cap before reaching tolerance."""


# metrics


class MetricsError(AspectlyError):
    """Base class for evaluation errors."""


class LengthMismatch(MetricsError, ValueError):
    """True and predicted label sequences differ in length."""


class EmptyMatrix(MetricsError, ValueError):
    """A confusion matrix holds no evaluated pair."""


# cli


class ConfigError(AspectlyError, ValueError):
    """A run configuration, config file or search-space file is invalid."""


class StageError(AspectlyError):
    """Wrap an error with the pipeline stage it happened in.

    Parameters
    ----------
    stage: str
        Name of the failing stage (``load``, ``split``, ``preprocess``, ``fit``, ...).
    cause: Exception
        The original error.
    """

    def __init__(self, stage: str, cause: Optional[BaseException] = None) -> None:
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
