"""Label and option enumerations"""
from __future__ import annotations

import enum
from typing import Dict, Tuple, Type, TypeVar

__all__ = (
    "AspectLabel",
    "PolarityLabel",
    "LanguageTag",
    "LabelField",
    "Task",
    "BaselineKind",
    "ModelKind",
)

_E = TypeVar("_E", bound="_Label")


class _Label(str, enum.Enum):
    """Shared parsing for the annotation enumerations."""

    @classmethod
    def _aliases(cls) -> Dict[str, str]:
        return {}

    @classmethod
    def parse(cls: Type[_E], value: str) -> _E:
        """Return the member named by `value`.

        Matching ignores case and surrounding whitespace.

        Raises
        ------
        ValueError
            `value` names no member.
        """
        key = value.strip().casefold()
        key = cls._aliases().get(key, key)
        for member in cls:
            if member.value.casefold() == key:
                return member

        msg = f"{value!r} is not a valid {cls.__name__}"
        raise ValueError(msg)

    @property
    def class_id(self) -> int:
        """Position of the member in declaration order."""
        return list(type(self)).index(self)


class AspectLabel(_Label):
    """The aspect a comment targets.

    The integer annotation codes 1-4 used by the original annotators are
    accepted by `parse` as aliases.

    Attributes
    ----------
    PERSON
        "Person" - actor, actress, director. Class id 0.
    EPISODE
        "Episode". Class id 1.
    MOVIE
        "Movie". Class id 2.
    GENERAL
        "General". Class id 3.
    """

    PERSON = "Person"
    EPISODE = "Episode"
    MOVIE = "Movie"
    GENERAL = "General"

    @classmethod
    def _aliases(cls) -> Dict[str, str]:
        return {"1": "person", "2": "episode", "3": "movie", "4": "general"}


class PolarityLabel(_Label):
    """Sentiment polarity.

    The set in use for a dataset is declared by its manifest, and class ids come from the
    position in that set, not from `class_id`.
    """

    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"
    POSITIVE = "Positive"


class LanguageTag(_Label):
    """Language of a comment. Engausa is code-switched Hausa and English."""

    HAUSA = "Hausa"
    ENGAUSA = "Engausa"


class LabelField(str, enum.Enum):
    """A label column of the dataset."""

    ASPECT = "aspect"
    POLARITY = "polarity"
    LANGUAGE = "language"


class Task(str, enum.Enum):
    """A classification task. Each task trains its own model.

    Attributes
    ----------
    ASPECT
        "aspect" - 4-way aspect classification.
    POLARITY
        "polarity" - polarity classification over the manifest's classes.
    """

    ASPECT = "aspect"
    POLARITY = "polarity"

    @property
    def field(self) -> LabelField:
        """The dataset column holding this task's labels."""
        return LabelField(self.value)


class BaselineKind(str, enum.Enum):
    """The classical learners, in comparison-table order."""

    NAIVE_BAYES = "nb"
    LINEAR_SVM = "svm"
    RANDOM_FOREST = "rf"
    LOGISTIC_REGRESSION = "logreg"

    @property
    def display_name(self) -> str:
        """Row label used in comparison tables."""
        return _DISPLAY_NAMES[self.value]


class ModelKind(str, enum.Enum):
    """Every model the cli can train: the network plus the four baselines."""

    DCNN = "dcnn"
    NAIVE_BAYES = "nb"
    LINEAR_SVM = "svm"
    RANDOM_FOREST = "rf"
    LOGISTIC_REGRESSION = "logreg"

    @property
    def baseline(self) -> BaselineKind:
        """The matching `BaselineKind`.

        Raises
        ------
        ValueError
            Called on `DCNN`.
        """
        return BaselineKind(self.value)

    @property
    def display_name(self) -> str:
        """Row label used in comparison tables."""
        return _DISPLAY_NAMES[self.value]

    @classmethod
    def choices(cls) -> Tuple[str, ...]:
        """The command-line spellings."""
        return tuple(member.value for member in cls)


_DISPLAY_NAMES = {
    "dcnn": "DCNN",
    "nb": "Naive Bayes",
    "svm": "SVM",
    "rf": "Random Forest",
    "logreg": "Logistic Regression",
}
