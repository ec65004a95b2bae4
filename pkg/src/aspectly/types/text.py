"""Preprocessing types"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Optional, Tuple

import numpy as np

__all__ = (
    "NoiseRule",
    "Normalizer",
    "Vocabulary",
    "TfIdfModel",
    "EncodedSequence",
    "EncodedBatch",
    "PAD_ID",
    "UNK_ID",
    "PAD_TOKEN",
    "UNK_TOKEN",
    "DEFAULT_STOPWORDS",
)

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

DEFAULT_STOPWORDS: FrozenSet[str] = frozenset({"a", "ni", "to", "su", "an"})
"""Seed stopword list. Extend it with a stopword file."""


class NoiseRule:
    """Names of the character classes a `Normalizer` can strip.

    Attributes
    ----------
    USERNAME
        Tokens starting with ``@``.
    EMOJI
        Unicode categories ``So`` and ``Sk``.
    SPECIAL
        The ``@`` and ``#`` characters.
    PUNCTUATION
        Unicode categories ``P*`` and the remaining ASCII symbols.
    DIGITS
        Numeric characters.
    """

    USERNAME = "username"
    EMOJI = "emoji"
    SPECIAL = "special"
    PUNCTUATION = "punctuation"
    DIGITS = "digits"

    ALL: Tuple[str, ...] = (USERNAME, EMOJI, SPECIAL, PUNCTUATION, DIGITS)


@dataclass(frozen=True)
class Normalizer:
    """Text cleaning configuration.

    Attributes
    ----------
    stopwords: FrozenSet[str]
        Lowercase tokens removed by `remove_stopwords`.
    strip_patterns: Tuple[str, ...]
        `NoiseRule` names applied by `normalize`, in order.
    retained_chars: str
        Non-letter characters kept verbatim.
    """

    stopwords: FrozenSet[str] = DEFAULT_STOPWORDS
    strip_patterns: Tuple[str, ...] = NoiseRule.ALL
    retained_chars: str = ""

    def __post_init__(self) -> None:
        unknown = [rule for rule in self.strip_patterns if rule not in NoiseRule.ALL]
        if unknown:
            msg = f"unknown noise rules: {', '.join(unknown)}"
            raise ValueError(msg)

    def to_dict(self) -> Dict[str, object]:
        return {
            "stopwords": sorted(self.stopwords),
            "strip_patterns": list(self.strip_patterns),
            "retained_chars": self.retained_chars,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> Normalizer:
        return cls(
            stopwords=frozenset(data.get("stopwords", DEFAULT_STOPWORDS)),  # type: ignore
            strip_patterns=tuple(data.get("strip_patterns", NoiseRule.ALL)),  # type: ignore
            retained_chars=str(data.get("retained_chars", "")),
        )


@dataclass(frozen=True)
class Vocabulary:
    """Token to id mapping.

    Ids are dense, ``PAD_TOKEN`` is id 0 and ``UNK_TOKEN`` is id 1.

    Attributes
    ----------
    tokens: Tuple[str, ...]
        Token of every id, reserved tokens included.
    max_size: Optional[int]
        Cap the vocabulary was fitted with, reserved entries included.
    min_freq: int
        Minimum corpus frequency the vocabulary was fitted with.
    """

    tokens: Tuple[str, ...]
    max_size: Optional[int] = None
    min_freq: int = 1
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.tokens[:2] != (PAD_TOKEN, UNK_TOKEN):
            msg = "vocabulary must start with the reserved PAD and UNK tokens"
            raise ValueError(msg)

        index = {token: i for i, token in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            msg = "vocabulary tokens must be unique"
            raise ValueError(msg)

        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def id_of(self, token: str) -> int:
        """Return the id of `token`, or ``UNK_ID`` when it is out of vocabulary."""
        return self._index.get(token, UNK_ID)

    def lookup(self, token: str) -> Optional[int]:
        """Return the id of `token`, or None when it is out of vocabulary."""
        return self._index.get(token)

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]


@dataclass(frozen=True)
class TfIdfModel:
    """A fitted TF-IDF vectorizer.

    ``idf[t] = ln((1 + n_documents) / (1 + df[t])) + 1``

    Attributes
    ----------
    vocabulary: Vocabulary
        Column order of the vectors.
    idf: np.ndarray
        Inverse document frequency per vocabulary id, float64, shape ``[V]``.
    df: np.ndarray
        Document frequency per vocabulary id, int64, shape ``[V]``.
    n_documents: int
        Number of documents the model was fitted on.
    """

    vocabulary: Vocabulary
    idf: np.ndarray
    df: np.ndarray
    n_documents: int

    @property
    def dimension(self) -> int:
        return len(self.vocabulary)


@dataclass(frozen=True)
class EncodedSequence:
    """A fixed-length id sequence.

    Attributes
    ----------
    ids: Tuple[int, ...]
        Exactly ``L`` ids, ``PAD_ID`` from `true_length` onwards.
    true_length: int
        Number of real tokens kept.
    """

    ids: Tuple[int, ...]
    true_length: int


@dataclass(frozen=True)
class EncodedBatch:
    """Encoded sequences stacked for the network.

    Attributes
    ----------
    ids: np.ndarray
        int64 ``[N, L]``.
    lengths: np.ndarray
        int64 ``[N]`` true lengths.
    labels: Optional[np.ndarray]
        int64 ``[N]`` class ids, absent for unlabeled batches.
    """

    ids: np.ndarray
    lengths: np.ndarray
    labels: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def take(self, indices: np.ndarray) -> EncodedBatch:
        """Return the rows at `indices`."""
        labels = None if self.labels is None else self.labels[indices]
        return EncodedBatch(self.ids[indices], self.lengths[indices], labels)
