"""# Corpus

Load, validate, summarize, split and synthesize annotated comment datasets.

Datasets are UTF-8 CSV files with the header ``text,aspect,polarity,language``. The
polarity class set of a dataset is declared by a key=value manifest file.
"""

import codecs
import csv
import io
import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from dotenv import dotenv_values

from .errors import (
    BadLabel,
    CorpusError,
    DegenerateSplit,
    EmptyText,
    MalformedRow,
    ManifestError,
    MissingColumn,
    NotUtf8,
    SpecTooSmall,
)
from .types import (
    DEFAULT_POLARITY_CLASSES,
    AspectLabel,
    Comment,
    Dataset,
    LabelField,
    LanguageTag,
    Manifest,
    PolarityLabel,
    SplitSpec,
    SynthSpec,
)
from .utils import write_csv

__all__ = (
    "REQUIRED_COLUMNS",
    "ASPECT_MARKERS",
    "POLARITY_MARKERS",
    "load_manifest",
    "manifest_from_mapping",
    "load_dataset",
    "validate_file",
    "save_dataset",
    "split_indices",
    "split",
    "class_distribution",
    "write_distribution_csv",
    "synth_generate",
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
Label = Union[AspectLabel, PolarityLabel, LanguageTag]

REQUIRED_COLUMNS = ("text", "aspect", "polarity", "language")

SUPPORTED_SCHEMA_VERSIONS = (1,)

# absorbs representation error in products such as 0.7 * 590
_FLOOR_EPS = 1e-9


def load_manifest(path: Optional[PathLike] = None) -> Manifest:
    """Read a manifest file.

    Recognised keys are ``polarity_classes`` (comma separated polarity names),
    ``schema_version`` and ``source``. Without a path the default manifest is returned.

    Parameters
    ----------
    path: Optional[PathLike]
        Location of the key=value manifest file.

    Returns
    -------
    Manifest
        The parsed manifest.

    Raises
    ------
    ManifestError
        The file is missing or declares an invalid class set or schema version.
    """
    if path is None:
        return Manifest()

    if not Path(path).is_file():
        msg = f"manifest {path} does not exist"
        raise ManifestError(msg)

    values = {k.strip().lower(): (v or "") for k, v in dotenv_values(path).items()}
    return manifest_from_mapping(values, origin=str(path))


def manifest_from_mapping(values: Mapping[str, str], origin: str = "manifest") -> Manifest:
    """Build a `Manifest` from already parsed key=value pairs."""
    unknown = set(values) - {"polarity_classes", "schema_version", "source"}
    if unknown:
        msg = f"{origin}: unknown manifest keys {', '.join(sorted(unknown))}"
        raise ManifestError(msg)

    classes: Tuple[PolarityLabel, ...] = DEFAULT_POLARITY_CLASSES
    raw_classes = values.get("polarity_classes", "").strip()
    if raw_classes:
        try:
            classes = tuple(PolarityLabel.parse(name) for name in raw_classes.split(","))
        except ValueError as e:
            msg = f"{origin}: {e}"
            raise ManifestError(msg) from e

    if len(set(classes)) != len(classes):
        msg = f"{origin}: polarity_classes lists a class twice"
        raise ManifestError(msg)
    if len(classes) < 2:
        msg = f"{origin}: polarity_classes needs at least two classes"
        raise ManifestError(msg)

    try:
        version = int(values.get("schema_version", "1") or "1")
    except ValueError as e:
        msg = f"{origin}: schema_version must be an integer"
        raise ManifestError(msg) from e
    if version not in SUPPORTED_SCHEMA_VERSIONS:
        msg = f"{origin}: unsupported schema_version {version}"
        raise ManifestError(msg)

    return Manifest(
        polarity_classes=classes, source=values.get("source", ""), schema_version=version
    )


def _parse_label(
    row: int, column: str, raw: str, allowed: Sequence[Label], errors: List[CorpusError]
) -> Optional[Label]:
    enum_type = type(allowed[0])
    try:
        label = enum_type.parse(raw)
    except ValueError:
        errors.append(BadLabel(row, column, raw))
        return None

    if label not in allowed:
        errors.append(BadLabel(row, column, raw))
        return None
    return label


def _read_rows(
    path: PathLike, manifest: Manifest, *, drop_unlabeled: bool
) -> Tuple[List[Comment], List[CorpusError]]:
    """Parse every data row, collecting errors instead of raising them."""
    records: List[Comment] = []
    errors: List[CorpusError] = []

    raw = Path(path).read_bytes()
    start = len(codecs.BOM_UTF8) if raw.startswith(codecs.BOM_UTF8) else 0
    try:
        content = raw[start:].decode("utf-8")
    except UnicodeDecodeError as e:
        offset = start + e.start
        return records, [NotUtf8(offset, raw.count(b"\n", 0, offset) + 1)]

    with io.StringIO(content, newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if not header:
            return records, [MissingColumn(column) for column in REQUIRED_COLUMNS]

        header = [name.strip().lower() for name in header]
        missing = [column for column in REQUIRED_COLUMNS if column not in header]
        if missing:
            return records, [MissingColumn(column) for column in missing]

        position = {column: header.index(column) for column in REQUIRED_COLUMNS}
        row = 0
        dropped = 0
        for fields in reader:
            # blank lines are not rows
            if not fields:
                continue
            row += 1

            if len(fields) != len(header):
                errors.append(MalformedRow(row, len(header), len(fields)))
                continue

            text = fields[position["text"]]
            if not text.strip():
                errors.append(EmptyText(row))
                continue

            if drop_unlabeled and not fields[position["aspect"]].strip():
                dropped += 1
                continue

            row_errors: List[CorpusError] = []
            aspect = _parse_label(
                row, "aspect", fields[position["aspect"]], tuple(AspectLabel), row_errors
            )
            polarity = _parse_label(
                row, "polarity", fields[position["polarity"]], manifest.polarity_classes, row_errors
            )
            language = _parse_label(
                row, "language", fields[position["language"]], tuple(LanguageTag), row_errors
            )
            if row_errors:
                errors.extend(row_errors)
                continue

            records.append(Comment(text, aspect, polarity, language))  # type: ignore

    if dropped:
        logger.warning("dropped %d rows without an aspect label from %s", dropped, path)

    return records, errors


def validate_file(path: PathLike, manifest: Optional[Manifest] = None) -> List[CorpusError]:
    """Return every row and header error in a dataset file, in file order.

    An empty list means `load_dataset` will succeed.
    """
    _, errors = _read_rows(path, manifest or Manifest(), drop_unlabeled=False)
    return errors


def load_dataset(
    path: PathLike,
    manifest: Optional[Manifest] = None,
    *,
    drop_unlabeled: bool = False,
) -> Dataset:
    """Load a dataset file.

    Parameters
    ----------
    path: PathLike
        CSV file with the header ``text,aspect,polarity,language``.
    manifest: Optional[Manifest]
        Declared polarity set. Defaults to the three-class manifest.
    drop_unlabeled: bool
        Skip rows whose aspect field is empty instead of rejecting them, matching the
        removal of comments that capture no aspect category.

    Returns
    -------
    Dataset
        One record per data row, in file order.

    Raises
    ------
    MissingColumn, BadLabel, EmptyText, MalformedRow, NotUtf8
        The first problem found. Use `validate_file` to list all of them.
    """
    manifest = manifest or Manifest()
    records, errors = _read_rows(path, manifest, drop_unlabeled=drop_unlabeled)
    if errors:
        raise errors[0]

    logger.info("loaded %d records from %s", len(records), path)
    return Dataset(tuple(records), manifest)


def save_dataset(ds: Dataset, path: PathLike) -> Path:
    """Write `ds` in the format `load_dataset` reads."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(REQUIRED_COLUMNS)
        for record in ds:
            writer.writerow(
                (record.text, record.aspect.value, record.polarity.value, record.language.value)
            )
    return path


def _apportion(weights: Sequence[float], total: int) -> List[int]:
    """Split `total` proportionally to `weights` by largest remainder.

    Ties in the remainder go to the earlier class.
    """
    norm = float(sum(weights))
    exact = [w * total / norm for w in weights]
    base = [math.floor(e + _FLOOR_EPS) for e in exact]
    leftover = total - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def split_indices(ds: Dataset, spec: SplitSpec) -> Tuple[List[int], List[int]]:
    """Return the sorted record positions of the train and test partitions.

    See `split`.
    """
    n = len(ds)
    n_train = math.floor(spec.train_fraction * n + _FLOOR_EPS)
    if n_train < 1 or n_train >= n:
        msg = f"splitting {n} records at {spec.train_fraction} leaves an empty partition"
        raise DegenerateSplit(msg)

    rng = np.random.default_rng(spec.seed)
    if spec.stratify_by is None:
        train = rng.permutation(n)[:n_train].tolist()
    else:
        labels = ds.label_ids(spec.stratify_by)
        num_classes = len(ds.manifest.classes(spec.stratify_by))
        members: List[List[int]] = [[] for _ in range(num_classes)]
        for i, label in enumerate(labels):
            members[label].append(i)

        counts = [len(m) for m in members]
        quotas = _stratum_quotas(counts, spec.train_fraction, n_train)
        train = []
        for group, quota in zip(members, quotas):
            if group:
                train.extend(int(i) for i in rng.permutation(group)[:quota])

    train.sort()
    chosen = set(train)
    test = [i for i in range(n) if i not in chosen]
    return train, test


def _stratum_quotas(counts: Sequence[int], fraction: float, target: int) -> List[int]:
    exact = [c * fraction for c in counts]
    base = [math.floor(e + _FLOOR_EPS) for e in exact]
    leftover = target - sum(base)
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order:
        if leftover <= 0:
            break
        if base[i] < counts[i]:
            base[i] += 1
            leftover -= 1
    return base


def split(ds: Dataset, spec: Optional[SplitSpec] = None) -> Tuple[Dataset, Dataset]:
    """Partition a dataset into train and test.

    The train side holds ``floor(train_fraction * N)`` records. The permutation depends only
    on ``spec.seed``. Both partitions keep the original record order.

    Parameters
    ----------
    ds: Dataset
        The dataset to divide.
    spec: Optional[SplitSpec]
        Fraction, seed and optional stratification field. Defaults to a 70/30 split with
        seed 0.

    Returns
    -------
    Tuple[Dataset, Dataset]
        The train and test datasets.

    Raises
    ------
    DegenerateSplit
        Either side would be empty.
    """
    spec = spec or SplitSpec()
    train, test = split_indices(ds, spec)
    logger.info("split %d records into %d train / %d test", len(ds), len(train), len(test))
    return ds.subset(train), ds.subset(test)


def class_distribution(ds: Dataset, label_field: LabelField) -> Dict[Label, int]:
    """Count the records of every class of `label_field`.

    Every class of the field appears, with a zero count when unused.
    """
    counts: Dict[Label, int] = {label: 0 for label in ds.manifest.classes(label_field)}
    for record in ds:
        counts[record.label(label_field)] += 1
    return counts


def write_distribution_csv(
    histogram: Mapping[Label, int],
    path: PathLike,
    *,
    meta: Optional[Mapping[str, object]] = None,
) -> Path:
    """Write a histogram as a two-column ``label,count`` CSV."""
    rows = [(label.value, count) for label, count in histogram.items()]
    return write_csv(path, ("label", "count"), rows, meta=meta)


ASPECT_MARKERS: Dict[AspectLabel, Tuple[str, ...]] = {
    AspectLabel.PERSON: ("jarumi", "jaruma", "darakta"),
    AspectLabel.EPISODE: ("kashi", "zango", "shiri"),
    AspectLabel.MOVIE: ("fim", "labari", "wasan"),
    AspectLabel.GENERAL: ("gaskiya", "duniya", "jama"),
}
"""Tokens `synth_generate` plants to signal each aspect."""

POLARITY_MARKERS: Dict[PolarityLabel, Tuple[str, ...]] = {
    PolarityLabel.NEGATIVE: ("muni", "banza", "haushi"),
    PolarityLabel.NEUTRAL: ("kallo", "tambaya", "sanarwa"),
    PolarityLabel.POSITIVE: ("madalla", "kyakkyawa", "burge"),
}
"""Tokens `synth_generate` plants to signal each polarity."""

_FILLER = (
    "kuma", "amma", "wannan", "yau", "gobe", "sosai", "dai", "mana", "nan", "can",
    "ina", "yana", "suna", "zai", "wani", "wata", "lokaci", "gida", "hanya", "ruwa",
    "abinci", "kasuwa", "aiki", "yara", "mata", "maza", "rana", "dare", "ya", "da",
)  # fmt: skip
_ENGLISH_FILLER = ("the", "and", "this", "then", "just", "really")
_DECORATIONS = ("", "!", " \U0001F600", " #1", " @masoyi")

# polarity shares of the generated corpus; neutral and positive dominate
_POLARITY_SHARES = {
    PolarityLabel.NEGATIVE: 0.2,
    PolarityLabel.NEUTRAL: 0.4,
    PolarityLabel.POSITIVE: 0.4,
}
_ENGAUSA_SHARE = 0.3


def _label_sequence(rng: np.random.Generator, quotas: Sequence[int]) -> List[int]:
    labels = [cls for cls, quota in enumerate(quotas) for _ in range(quota)]
    return [int(i) for i in rng.permutation(labels)]


def synth_generate(spec: SynthSpec) -> Dataset:
    """Generate a labeled corpus with a controllable class signal.

    Each comment is a run of filler tokens with one aspect marker and one polarity marker
    inserted at random positions. With probability ``class_signal`` a marker belongs to the
    record's own class, otherwise to a uniformly drawn class, so at ``class_signal=1`` the
    labels are exactly recoverable from the markers. Polarity classes follow a 20/40/40
    negative/neutral/positive mix; aspects are balanced.

    Parameters
    ----------
    spec: SynthSpec
        Size, seed, signal strength and polarity set.

    Returns
    -------
    Dataset
        The generated records. Equal specs give equal datasets.

    Raises
    ------
    SpecTooSmall
        Fewer than 8 records, or fewer than two records for some class.
    """
    aspects = tuple(AspectLabel)
    polarities = spec.polarity_classes
    if spec.n < 8:
        msg = f"synthetic corpora need at least 8 records, got {spec.n}"
        raise SpecTooSmall(msg)

    aspect_quotas = _apportion([1.0] * len(aspects), spec.n)
    shares = [_POLARITY_SHARES[p] for p in polarities]
    polarity_quotas = _apportion(shares, spec.n)
    if min(aspect_quotas) < 2 or min(polarity_quotas) < 2:
        msg = f"{spec.n} records cannot hold two records of every class"
        raise SpecTooSmall(msg)

    rng = np.random.default_rng(spec.seed)
    aspect_ids = _label_sequence(rng, aspect_quotas)
    polarity_ids = _label_sequence(rng, polarity_quotas)

    records: List[Comment] = []
    for aspect_id, polarity_id in zip(aspect_ids, polarity_ids):
        engausa = bool(rng.random() < _ENGAUSA_SHARE)
        tokens = [str(t) for t in rng.choice(_FILLER, size=int(rng.integers(4, 11)))]
        if engausa:
            for position in rng.choice(len(tokens), size=2, replace=False):
                tokens[int(position)] = str(rng.choice(_ENGLISH_FILLER))

        for own, classes, markers in (
            (aspect_id, aspects, ASPECT_MARKERS),
            (polarity_id, polarities, POLARITY_MARKERS),
        ):
            noise = int(rng.integers(len(classes)))
            chosen = own if rng.random() < spec.class_signal else noise
            marker = str(rng.choice(markers[classes[chosen]]))  # type: ignore
            tokens.insert(int(rng.integers(len(tokens) + 1)), marker)

        if rng.random() < 0.5:
            tokens[0] = tokens[0].capitalize()
        text = " ".join(tokens) + str(rng.choice(_DECORATIONS))

        records.append(
            Comment(
                text=text,
                aspect=aspects[aspect_id],
                polarity=polarities[polarity_id],
                language=LanguageTag.ENGAUSA if engausa else LanguageTag.HAUSA,
            )
        )

    manifest = Manifest(polarity_classes=polarities, source=f"synthetic seed={spec.seed}")
    return Dataset(tuple(records), manifest)
