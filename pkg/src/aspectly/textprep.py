"""# Text preprocessing

Normalize and tokenize comments, remove stopwords, build vocabularies, encode id
sequences for the network and fit/apply TF-IDF for the classical baselines.

Both fitted representations must only ever see the training partition.
"""

import logging
import math
import re
import unicodedata
from collections import Counter
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .errors import EmptyCorpus, VectorizerFormatError
from .types import (
    PAD_ID,
    PAD_TOKEN,
    UNK_TOKEN,
    EncodedBatch,
    EncodedSequence,
    NoiseRule,
    Normalizer,
    TfIdfModel,
    Vocabulary,
)
from .utils import read_json, write_json

__all__ = (
    "load_stopwords",
    "normalize",
    "tokenize",
    "remove_stopwords",
    "preprocess",
    "fit_vocab",
    "encode",
    "encode_batch",
    "tfidf_fit",
    "tfidf_transform",
    "tfidf_transform_many",
    "save_vectorizer",
    "load_vectorizer",
    "vectorizer_to_dict",
    "vectorizer_from_dict",
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

VECTORIZER_FORMAT = "aspectly-tfidf"
VECTORIZER_VERSION = 1

_USERNAME = re.compile(r"@\w+")
_WHITESPACE = re.compile(r"\s+")
_SPECIAL = frozenset("@#")
_EMOJI_CATEGORIES = frozenset({"So", "Sk"})
# dropped without leaving a gap: combining marks and format characters (ZWJ, variation selectors)
_SILENT_CATEGORIES = frozenset({"Mn", "Mc", "Me", "Cf"})


def load_stopwords(path: PathLike) -> frozenset:
    """Read a stopword file: one token per line, ``#`` starts a comment.

    Tokens are lowercased and stripped; blank lines are ignored.
    """
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        token = line.split("#", 1)[0].strip().lower()
        if token:
            words.add(token)
    return frozenset(words)


def _char_class(ch: str) -> Optional[str]:
    """Return the `NoiseRule` a non-letter character belongs to, or None."""
    if ch in _SPECIAL:
        return NoiseRule.SPECIAL
    if ch.isdigit() or ch.isnumeric():
        return NoiseRule.DIGITS
    category = unicodedata.category(ch)
    if category in _EMOJI_CATEGORIES:
        return NoiseRule.EMOJI
    if category.startswith("P") or category in ("Sm", "Sc"):
        return NoiseRule.PUNCTUATION
    return None


def normalize(text: str, nz: Optional[Normalizer] = None) -> str:
    """Lowercase `text` and strip the noise classes configured in `nz`.

    Combining marks and format characters are dropped first, so they cannot hide a
    username. Usernames are then removed whole, other noise characters become spaces and
    whitespace runs collapse to one space.
    The result holds only lowercase letters, single spaces, the normalizer's retained
    characters and characters of classes left unstripped. ``normalize(normalize(s))``
    equals ``normalize(s)``.

    Parameters
    ----------
    text: str
        Raw comment.
    nz: Optional[Normalizer]
        Rules to apply; the default strips every noise class.

    Returns
    -------
    str
        The normalized text, possibly empty.
    """
    nz = nz or Normalizer()
    rules = set(nz.strip_patterns)
    text = "".join(
        ch
        for ch in text.lower()
        if ch in nz.retained_chars or unicodedata.category(ch) not in _SILENT_CATEGORIES
    )
    if NoiseRule.USERNAME in rules:
        text = _USERNAME.sub(" ", text)

    out: List[str] = []
    for ch in text:
        if ch.isalpha() or ch in nz.retained_chars:
            out.append(ch)
        elif ch.isspace():
            out.append(" ")
        else:
            rule = _char_class(ch)
            out.append(ch if rule is not None and rule not in rules else " ")

    return _WHITESPACE.sub(" ", "".join(out)).strip()


def tokenize(text: str) -> List[str]:
    """Split normalized text on whitespace."""
    return text.split()


def remove_stopwords(tokens: Iterable[str], nz: Optional[Normalizer] = None) -> List[str]:
    """Drop stopwords, keeping the order of the remaining tokens."""
    stopwords = (nz or Normalizer()).stopwords
    return [token for token in tokens if token not in stopwords]


def preprocess(text: str, nz: Optional[Normalizer] = None) -> List[str]:
    """Normalize, tokenize and remove stopwords in one call."""
    return remove_stopwords(tokenize(normalize(text, nz)), nz)


def fit_vocab(
    corpus: Sequence[Sequence[str]],
    max_size: Optional[int] = None,
    min_freq: int = 1,
) -> Vocabulary:
    """Build a vocabulary from tokenized training documents.

    Tokens are ranked by descending frequency, ties broken lexicographically, and those
    seen fewer than `min_freq` times are left out. The reserved PAD and UNK entries count
    towards `max_size`.

    Parameters
    ----------
    corpus: Sequence[Sequence[str]]
        Token lists of the training partition.
    max_size: Optional[int]
        Total entry cap, at least 2. None means uncapped.
    min_freq: int
        Minimum total count.

    Returns
    -------
    Vocabulary
        The fitted vocabulary.

    Raises
    ------
    EmptyCorpus
        `corpus` holds no document.
    """
    if len(corpus) == 0:
        msg = "cannot fit a vocabulary on an empty corpus"
        raise EmptyCorpus(msg)

    if max_size is not None and max_size < 2:
        msg = f"max_size must leave room for PAD and UNK, got {max_size}"
        raise ValueError(msg)

    counts = Counter(token for document in corpus for token in document)
    counts.pop(PAD_TOKEN, None)
    counts.pop(UNK_TOKEN, None)
    ranked = sorted(
        (token for token, count in counts.items() if count >= min_freq),
        key=lambda token: (-counts[token], token),
    )
    if max_size is not None:
        ranked = ranked[: max_size - 2]

    logger.debug("vocabulary: %d of %d distinct tokens kept", len(ranked), len(counts))
    return Vocabulary((PAD_TOKEN, UNK_TOKEN, *ranked), max_size=max_size, min_freq=min_freq)


def encode(tokens: Sequence[str], vocab: Vocabulary, length: int) -> EncodedSequence:
    """Map tokens to a fixed-length id sequence.

    Out-of-vocabulary tokens map to UNK. Longer inputs are cut at the tail, shorter ones
    padded at the tail with PAD.

    Raises
    ------
    ValueError
        `length` is below 1.
    """
    if length < 1:
        msg = f"sequence length must be at least 1, got {length}"
        raise ValueError(msg)

    ids = [vocab.id_of(token) for token in tokens[:length]]
    true_length = len(ids)
    ids.extend([PAD_ID] * (length - true_length))
    return EncodedSequence(tuple(ids), true_length)


def encode_batch(
    documents: Sequence[Sequence[str]],
    vocab: Vocabulary,
    length: int,
    labels: Optional[Sequence[int]] = None,
) -> EncodedBatch:
    """Encode several documents into stacked arrays."""
    encoded = [encode(tokens, vocab, length) for tokens in documents]
    ids = np.array([e.ids for e in encoded], dtype=np.int64).reshape(len(encoded), length)
    lengths = np.array([e.true_length for e in encoded], dtype=np.int64)
    label_array = None if labels is None else np.asarray(labels, dtype=np.int64)
    return EncodedBatch(ids, lengths, label_array)


def tfidf_fit(corpus: Sequence[Sequence[str]], vocab: Vocabulary) -> TfIdfModel:
    """Fit document frequencies and smoothed inverse document frequencies.

    ``idf[t] = ln((1 + N) / (1 + df[t])) + 1`` where ``df[t]`` counts the documents that
    contain token ``t`` at least once.

    Raises
    ------
    EmptyCorpus
        `corpus` holds no document.
    """
    if len(corpus) == 0:
        msg = "cannot fit TF-IDF on an empty corpus"
        raise EmptyCorpus(msg)

    df = np.zeros(len(vocab), dtype=np.int64)
    for document in corpus:
        present = {vocab.lookup(token) for token in document}
        present.discard(None)
        for token_id in present:
            df[token_id] += 1  # type: ignore

    n_documents = len(corpus)
    idf = np.log((1.0 + n_documents) / (1.0 + df)) + 1.0
    return TfIdfModel(vocab, idf, df, n_documents)


def tfidf_transform(tokens: Iterable[str], model: TfIdfModel) -> np.ndarray:
    """Weight one document.

    Entries are raw term count times idf; out-of-vocabulary tokens are dropped and the
    vector is scaled to unit L2 norm unless it is zero.

    Returns
    -------
    np.ndarray
        float64 vector of length ``V``.
    """
    vector = np.zeros(model.dimension, dtype=np.float64)
    for token in tokens:
        token_id = model.vocabulary.lookup(token)
        if token_id is not None:
            vector[token_id] += 1.0

    vector *= model.idf
    norm = math.sqrt(float(np.dot(vector, vector)))
    if norm > 0.0:
        vector /= norm
    return vector


def tfidf_transform_many(documents: Sequence[Sequence[str]], model: TfIdfModel) -> np.ndarray:
    """Weight several documents into an ``[N, V]`` matrix."""
    matrix = np.zeros((len(documents), model.dimension), dtype=np.float64)
    for i, tokens in enumerate(documents):
        matrix[i] = tfidf_transform(tokens, model)
    return matrix


def vectorizer_to_dict(
    model: TfIdfModel, config: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """JSON-ready, versioned representation of a fitted vectorizer."""
    vocab = model.vocabulary
    return {
        "format": VECTORIZER_FORMAT,
        "version": VECTORIZER_VERSION,
        "vocabulary": list(vocab.tokens),
        "max_size": vocab.max_size,
        "min_freq": vocab.min_freq,
        "idf": model.idf.tolist(),
        "df": model.df.tolist(),
        "n_documents": model.n_documents,
        "config": dict(config or {}),
    }


def vectorizer_from_dict(document: Dict[str, Any]) -> TfIdfModel:
    """Rebuild a vectorizer from `vectorizer_to_dict` output.

    Raises
    ------
    VectorizerFormatError
        Wrong format tag, unsupported version or inconsistent lengths.
    """
    if document.get("format") != VECTORIZER_FORMAT:
        msg = f"not a vectorizer document: format={document.get('format')!r}"
        raise VectorizerFormatError(msg)
    if document.get("version") != VECTORIZER_VERSION:
        msg = f"unsupported vectorizer version {document.get('version')!r}"
        raise VectorizerFormatError(msg)

    try:
        vocab = Vocabulary(
            tuple(document["vocabulary"]),
            max_size=document.get("max_size"),
            min_freq=int(document.get("min_freq", 1)),
        )
        idf = np.asarray(document["idf"], dtype=np.float64)
        df = np.asarray(document["df"], dtype=np.int64)
        n_documents = int(document["n_documents"])
    except (KeyError, TypeError, ValueError) as e:
        msg = f"malformed vectorizer document: {e}"
        raise VectorizerFormatError(msg) from e

    if idf.shape != (len(vocab),) or df.shape != (len(vocab),):
        msg = "idf and df lengths must match the vocabulary"
        raise VectorizerFormatError(msg)

    return TfIdfModel(vocab, idf, df, n_documents)


def save_vectorizer(
    model: TfIdfModel, path: PathLike, config: Optional[Dict[str, Any]] = None
) -> Path:
    """Write a fitted vectorizer as a versioned JSON document."""
    return write_json(path, vectorizer_to_dict(model, config))


def load_vectorizer(path: PathLike) -> TfIdfModel:
    """Read a vectorizer written by `save_vectorizer`."""
    return vectorizer_from_dict(read_json(path))
